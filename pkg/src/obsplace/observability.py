"""Observability coefficients and posterior-eigenvalue bounds.

The observability coefficient is the worst-case ratio of the noise-weighted
observation norm to the state norm over all attainable states.  Parameter
directions that produce a zero state are unobservable by construction and are
removed via an SVD-based orthogonal complement before the generalized
eigenvalue problem is solved; all pencils live in the (small) parameter
dimension, never in the finite element dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .model import Model

KERNEL_TOL = 1e-10


@dataclass
class SubspaceDecomposition:
    """Orthonormal split of parameter space into unobservable kernel and complement."""

    kernel_basis: np.ndarray  # (M, k0)
    complement_basis: np.ndarray  # (M, M - k0)

    @property
    def projector(self) -> np.ndarray:
        """Euclidean-orthogonal projector onto the complement."""
        c = self.complement_basis
        return c @ c.T

    @property
    def kernel_dim(self) -> int:
        return self.kernel_basis.shape[1]

    @property
    def complement_dim(self) -> int:
        return self.complement_basis.shape[1]


@dataclass
class EtaBounds:
    """Extreme state-norm to prior-norm ratios over a parameter subspace."""

    eta_inf: float
    eta_sup: float
    subspace: str = "complement"


@dataclass
class ObservabilityResult:
    beta: float
    minimizer_m: np.ndarray
    minimizer_state: np.ndarray


def split_by_svd(matrix: np.ndarray, tol: float = KERNEL_TOL) -> SubspaceDecomposition:
    """Split the column space of a tall map into numerical kernel and complement.

    Right singular vectors with singular value below ``tol`` times the largest
    one span the kernel.
    """
    m = matrix.shape[1]
    full = matrix.shape[0] < m  # wide maps are rank-deficient by shape
    _, s, vt = np.linalg.svd(matrix, full_matrices=full)
    s_full = np.zeros(m)
    s_full[: s.size] = s
    if s_full.max() == 0.0:
        raise ValueError("map is identically zero; no observable directions exist")
    keep = s_full >= tol * s_full.max()
    return SubspaceDecomposition(
        kernel_basis=vt[~keep].T.copy(),
        complement_basis=vt[keep].T.copy(),
    )


def kernel_subspace(model: Model, theta=None, tol: float = KERNEL_TOL) -> SubspaceDecomposition:
    """Unobservable parameter directions: the null space of the load map."""
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    return split_by_svd(model.load_free, tol)


def eta_bounds(model: Model, theta, prior, subspace_basis: np.ndarray) -> EtaBounds:
    """Extreme ratios of state norm to prior-precision norm over a subspace.

    ``subspace_basis`` holds the (Euclidean-orthonormal) basis columns; the
    bounds are the square roots of the extreme generalized eigenvalues of the
    projected state Gram against the projected prior precision.
    """
    c = np.asarray(subspace_basis, dtype=float)
    if c.ndim != 2 or c.shape[1] == 0:
        raise ValueError("subspace basis must have at least one column")
    states = model.state_matrix(theta) @ c
    a = model.gram_matrix(states)
    b = c.T @ prior.cov_inv @ c
    eigvals = sla.eigh(0.5 * (a + a.T), 0.5 * (b + b.T), eigvals_only=True)
    return EtaBounds(
        eta_inf=float(np.sqrt(max(eigvals[0], 0.0))),
        eta_sup=float(np.sqrt(max(eigvals[-1], 0.0))),
    )


def _beta_from_pencil(obs_gram: np.ndarray, state_gram: np.ndarray):
    """Smallest generalized eigenpair of the observation form against the state Gram."""
    a = 0.5 * (obs_gram + obs_gram.T)
    b = 0.5 * (state_gram + state_gram.T)
    try:
        eigvals, eigvecs = sla.eigh(a, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate state Gram on the observable complement") from exc
    return float(np.sqrt(max(eigvals[0], 0.0))), eigvecs[:, 0]


def _principal_direction(state_gram: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(0.5 * (state_gram + state_gram.T))
    return eigvecs[:, -1]


def observability_beta(model_or_rb, theta, op, decomposition: SubspaceDecomposition | None = None,
                       tol: float = KERNEL_TOL) -> ObservabilityResult:
    """Worst-case observability coefficient at ``theta`` for the operator ``op``.

    Accepts either a full-order model or a reduced-basis surrogate.  An empty
    operator yields beta = 0 with the principal state direction as minimizer.
    """
    from .reduced_basis import RBSpace, beta_rb

    if isinstance(model_or_rb, RBSpace):
        return beta_rb(model_or_rb, theta, op, decomposition=decomposition)

    model: Model = model_or_rb
    if decomposition is None:
        decomposition = kernel_subspace(model, theta, tol)
    c = decomposition.complement_basis
    states = model.state_matrix(theta) @ c
    state_gram = model.gram_matrix(states)

    if op.k == 0:
        v = _principal_direction(state_gram)
        beta = 0.0
    else:
        g = op.observe_states(states)
        obs_gram = g.T @ op.solve_cov(g)
        beta, v = _beta_from_pencil(obs_gram, state_gram)

    scale = np.sqrt(max(v @ (state_gram @ v), 0.0))
    if scale == 0.0:
        raise ValueError("minimizing direction has zero state norm")
    v = v / scale
    return ObservabilityResult(
        beta=beta,
        minimizer_m=c @ v,
        minimizer_state=states @ v,
    )


def observability_beta_pair(model: Model, theta1, theta2, op,
                            tol: float = KERNEL_TOL) -> ObservabilityResult:
    """Observability coefficient over the union of two hyper-parameter ranges.

    States are superpositions from both hyper-parameters; cancellation
    directions (including the full diagonal when the two coincide) are removed
    the same way as single-theta kernel directions.
    """
    u1 = model.state_matrix(theta1)
    u2 = model.state_matrix(theta2)
    stacked = np.concatenate([u1, u2], axis=1)
    decomposition = split_by_svd(stacked[model.free_dofs], tol)
    c = decomposition.complement_basis
    states = stacked @ c
    state_gram = model.gram_matrix(states)

    if op.k == 0:
        v = _principal_direction(state_gram)
        beta = 0.0
    else:
        g = op.observe_states(states)
        obs_gram = g.T @ op.solve_cov(g)
        beta, v = _beta_from_pencil(obs_gram, state_gram)

    scale = np.sqrt(max(v @ (state_gram @ v), 0.0))
    if scale == 0.0:
        raise ValueError("minimizing direction has zero state norm")
    v = v / scale
    return ObservabilityResult(
        beta=beta,
        minimizer_m=c @ v,
        minimizer_state=states @ v,
    )


def rb_beta_lower_bound(beta_rb_value: float, eps_theta: float, gamma: float) -> float:
    """Certified lower bound on the true coefficient from its surrogate value."""
    if not 0.0 <= eps_theta < 1.0:
        raise ValueError("relative accuracy must lie in [0, 1)")
    return (1.0 - eps_theta) * beta_rb_value - gamma * eps_theta


def information_form_bound(ptg: np.ndarray, op, beta: float, eta_inf_perp: float,
                           norm_equiv: float, projector: np.ndarray, m) -> tuple:
    """Both sides of the quadratic-form lower bound used in the eigenvalue chain.

    lhs: squared noise norm of the observed state for parameter ``m``;
    rhs: ``beta^2 eta_inf^2 norm_equiv^-2 |proj m|^2``.
    """
    m = np.asarray(m, dtype=float)
    lhs = op.noise_norm(ptg @ m) ** 2
    rhs = beta**2 * eta_inf_perp**2 / norm_equiv**2 * float(np.sum((projector @ m) ** 2))
    return lhs, rhs


@dataclass
class EigenvalueBoundsReport:
    eigvals: np.ndarray
    bounds: np.ndarray
    margins: np.ndarray
    trace: float
    trace_bound: float
    trace_margin: float
    projection_mass: float
    complement_dim: int


def eigenvalue_bounds_report(post, beta: float, eta_inf_perp: float, norm_equiv: float,
                             sigma: float, decomposition: SubspaceDecomposition) -> EigenvalueBoundsReport:
    """Per-eigenvalue and trace bounds on the posterior covariance.

    Each posterior eigenvalue is bounded through the observability coefficient
    and the projection mass of its eigenvector on the observable complement;
    margins are ``bound - eigenvalue`` (non-negative when the bound holds).
    """
    pi = decomposition.projector
    pm = np.sum((pi @ post.eigvecs) ** 2, axis=0)
    bounds = norm_equiv**2 / (beta**2 * eta_inf_perp**2 * pm / sigma**2 + 1.0)
    margins = bounds - post.eigvals
    trace_bound = float(np.sum(bounds))
    return EigenvalueBoundsReport(
        eigvals=post.eigvals.copy(),
        bounds=bounds,
        margins=margins,
        trace=post.trace,
        trace_bound=trace_bound,
        trace_margin=trace_bound - post.trace,
        projection_mass=float(np.sum(pm)),
        complement_dim=decomposition.complement_dim,
    )
