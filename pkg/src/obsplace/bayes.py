"""Gaussian prior/posterior algebra and MAP-point stability.

The inferred parameter is low-dimensional, so the posterior is carried in
closed form as a dense Gaussian in parameter space.  The stability helpers
quantify how strongly a change in the data can move the MAP point and its
state, in terms of the observability coefficient and noise-to-state norm
ratios.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Model
from .sensors import ObservationOperator
from . import observability as obs

_COND_LIMIT = 1e13


@dataclass
class GaussianPrior:
    """Non-degenerate Gaussian prior on the parameter vector."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        m = self.mean.size
        if self.cov.shape != (m, m):
            raise ValueError("covariance shape does not match the mean")
        if not np.allclose(self.cov, self.cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        eigvals = np.linalg.eigvalsh(0.5 * (self.cov + self.cov.T))
        if eigvals[0] <= 0:
            raise ValueError("covariance must be positive definite")
        self.cov_inv = np.linalg.inv(self.cov)
        self.cov_inv = 0.5 * (self.cov_inv + self.cov_inv.T)
        self.norm_equiv = float(np.sqrt(eigvals[-1]))

    @property
    def dim(self) -> int:
        return self.mean.size

    def norm(self, m: np.ndarray) -> float:
        """Prior-precision norm of a parameter vector."""
        m = np.asarray(m, dtype=float)
        return float(np.sqrt(max(m @ (self.cov_inv @ m), 0.0)))

    @classmethod
    def standard(cls, mean) -> "GaussianPrior":
        mean = np.asarray(mean, dtype=float)
        return cls(mean=mean, cov=np.eye(mean.size))


@dataclass
class PosteriorGaussian:
    """Closed-form Gaussian posterior with its spectral summary."""

    mean: np.ndarray
    cov: np.ndarray
    eigvals: np.ndarray  # ascending
    eigvecs: np.ndarray  # columns, Euclidean-orthonormal
    trace: float
    ptg_matrix: np.ndarray


def assemble_ptg(model: Model, theta, op: ObservationOperator) -> np.ndarray:
    """Parameter-to-observable matrix: sensors applied to the state map."""
    states = model.state_matrix(theta)
    return op.observe_states(states)


def posterior(ptg: np.ndarray, op: ObservationOperator, sigma: float, prior: GaussianPrior, d) -> PosteriorGaussian:
    """Posterior Gaussian for data ``d`` under the linear noise model."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = np.asarray(d, dtype=float)
    ptg = np.asarray(ptg, dtype=float)
    if ptg.shape[0] != op.k or ptg.shape[1] != prior.dim:
        raise ValueError("parameter-to-observable matrix shape mismatch")
    if op.k:
        wg = op.solve_cov(ptg)
        hess = ptg.T @ wg / sigma**2 + prior.cov_inv
        rhs = ptg.T @ op.solve_cov(d) / sigma**2 + prior.cov_inv @ prior.mean
    else:
        hess = prior.cov_inv.copy()
        rhs = prior.cov_inv @ prior.mean
    hess = 0.5 * (hess + hess.T)
    cond = np.linalg.cond(hess)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise ValueError(f"posterior Hessian ill-conditioned (cond ~ {cond:.2e})")
    cov = np.linalg.inv(hess)
    cov = 0.5 * (cov + cov.T)
    mean = np.linalg.solve(hess, rhs)
    eigvals, eigvecs = np.linalg.eigh(cov)
    return PosteriorGaussian(
        mean=mean,
        cov=cov,
        eigvals=eigvals,
        eigvecs=eigvecs,
        trace=float(np.trace(cov)),
        ptg_matrix=ptg,
    )


def map_objective(m, ptg: np.ndarray, op: ObservationOperator, sigma: float, prior: GaussianPrior, d) -> float:
    """Negative log-posterior up to a constant; the posterior mean is its argmin."""
    m = np.asarray(m, dtype=float)
    d = np.asarray(d, dtype=float)
    misfit = op.noise_norm(ptg @ m - d) if op.k else 0.0
    return 0.5 * misfit**2 / sigma**2 + 0.5 * prior.norm(m - prior.mean) ** 2


def stability_coefficient(beta: float, eta_inf: float, eta_sup: float, gamma: float, sigma: float) -> float:
    """Amplification factor from data perturbations to MAP-point perturbations.

    The active norm ratio switches between its extremes depending on whether
    the observability coefficient dominates the noise scale.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if min(beta, eta_inf, eta_sup, gamma) < 0:
        raise ValueError("coefficients must be non-negative")
    eta = eta_sup if beta**2 <= sigma**2 else eta_inf
    return gamma * (1.0 + eta**2) / (sigma**2 + beta**2 * eta**2)


@dataclass
class StabilityReport:
    lhs: float
    rhs: float
    ratio: float
    coefficient: float
    beta: float
    eta_inf: float
    eta_sup: float
    gamma: float


def stability_inequality_check(
    model: Model,
    theta,
    op: ObservationOperator,
    sigma: float,
    prior: GaussianPrior,
    d1,
    d2,
) -> StabilityReport:
    """Evaluate both sides of the two-data MAP stability bound.

    lhs: squared prior-norm distance of the two MAP points plus the squared
    state-norm distance of their states; rhs: the squared stability
    coefficient times the squared noise-norm data distance.
    """
    from .sensors import gamma_L as _gamma

    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    ptg = assemble_ptg(model, theta, op)
    m1 = posterior(ptg, op, sigma, prior, d1).mean
    m2 = posterior(ptg, op, sigma, prior, d2).mean
    du = model.solve(theta, m1 - m2)  # state map is linear in m
    lhs = prior.norm(m1 - m2) ** 2 + model.norm(du) ** 2

    decomp = obs.kernel_subspace(model, theta)
    etas = obs.eta_bounds(model, theta, prior, decomp.complement_basis)
    beta = obs.observability_beta(model, theta, op, decomposition=decomp).beta
    gamma = _gamma(op, model)
    coeff = stability_coefficient(beta, etas.eta_inf, etas.eta_sup, gamma, sigma)
    rhs = coeff**2 * op.noise_norm(d1 - d2) ** 2
    ratio = 0.0 if rhs == 0.0 and lhs == 0.0 else lhs / rhs
    return StabilityReport(
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        coefficient=coeff,
        beta=beta,
        eta_inf=etas.eta_inf,
        eta_sup=etas.eta_sup,
        gamma=gamma,
    )
