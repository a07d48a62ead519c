"""Certified reduced-basis surrogate of the forward map.

Snapshots are collected greedily over a hyper-parameter training set until a
rigorous relative error bound drops below the target.  The bound combines the
residual dual norm (via precomputed Riesz blocks) with a coercivity floor
obtained from the minimal component coefficient, and is uniform in the
inferred parameter: it controls the surrogate error for every right-hand
side, not just the snapshot directions.  This uniformity is what allows
observability coefficients computed on the surrogate to certify full-order
ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .model import Model
from .observability import (
    ObservabilityResult,
    SubspaceDecomposition,
    _beta_from_pencil,
    _principal_direction,
    kernel_subspace,
    split_by_svd,
)

FORMAT_HEADER = "RBSPACE-v1"


class RBBuildError(RuntimeError):
    """Greedy construction exhausted its budget before reaching the target."""

    def __init__(self, message: str, achieved_eps: float):
        super().__init__(message)
        self.achieved_eps = achieved_eps


@dataclass
class ErrorCertificate:
    """Per-training-point relative error bounds of a finished surrogate."""

    thetas: np.ndarray
    eps_theta: np.ndarray
    eps_max: float
    eps_target: float
    history: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return bool(np.isfinite(self.eps_max) and self.eps_max < 1.0)


class RBSpace:
    """Reduced space with affine reduced operators and residual machinery."""

    def __init__(self, model: Model):
        self.model = model
        n_free = model.n_free
        self.V = np.zeros((n_free, 0))
        self.reduced_stiffness = [np.zeros((0, 0)) for _ in model.stiffness_components]
        self.reduced_loads = np.zeros((0, model.param_dim))
        # Riesz representations of the load columns and of A_q applied to the basis
        self.residual_loads = np.stack(
            [model.riesz_solve(model.load_free[:, i]) for i in range(model.param_dim)], axis=1
        )
        self.residual_stiffness = [np.zeros((n_free, 0)) for _ in model.stiffness_components]
        self.alpha_ref = _reference_coercivity(model)
        self.certificate: ErrorCertificate | None = None
        self.library_projection: np.ndarray | None = None
        self._solution_cache: dict = {}
        self._stiff_times_basis = [np.zeros((n_free, 0)) for _ in model.stiffness_components]

    @property
    def dim(self) -> int:
        return self.V.shape[1]

    def coercivity_floor(self, theta) -> float:
        """Lower bound on the operator's coercivity constant at ``theta``.

        Valid because every component matrix is positive semidefinite and the
        component coefficients are positive.
        """
        coeffs = np.asarray(self.model.coefficients(np.asarray(theta, dtype=float)))
        if np.any(coeffs <= 0):
            raise ValueError("coercivity floor requires positive component coefficients")
        return float(coeffs.min() * self.alpha_ref)

    def _theta_key(self, theta) -> bytes:
        return np.asarray(theta, dtype=float).tobytes()

    def solution_map(self, theta) -> np.ndarray:
        """Reduced solution coefficients for all canonical parameter directions: (n, M)."""
        key = self._theta_key(theta)
        cmap = self._solution_cache.get(key)
        if cmap is None:
            theta = np.asarray(theta, dtype=float)
            coeffs = np.asarray(self.model.coefficients(theta))
            if self.dim == 0:
                cmap = np.zeros((0, self.model.param_dim))
            else:
                a_red = sum(c * a for c, a in zip(coeffs, self.reduced_stiffness))
                cmap = np.linalg.solve(a_red, self.reduced_loads)
            self._solution_cache[key] = cmap
        return cmap

    def solve(self, theta, m) -> tuple:
        """Reduced coefficients and lifted full-length state for parameter ``m``."""
        m = np.asarray(m, dtype=float)
        c = self.solution_map(theta) @ m
        return c, self.model.expand(self.V @ c)

    def lift(self, c: np.ndarray) -> np.ndarray:
        return self.model.expand(self.V @ c)

    def _residual_riesz(self, theta, cmap: np.ndarray) -> np.ndarray:
        """Riesz representation of the residual map, one column per direction."""
        coeffs = np.asarray(self.model.coefficients(np.asarray(theta, dtype=float)))
        rho = self.residual_loads.copy()
        for c_q, z_q in zip(coeffs, self.residual_stiffness):
            if z_q.shape[1]:
                rho -= c_q * (z_q @ cmap)
        return rho

    def error_estimate(self, theta, m) -> float:
        """Certified relative error bound of the reduced solution at ``(theta, m)``.

        Returns ``inf`` when the absolute bound swamps the reduced solution
        norm and no relative statement can be certified.
        """
        m = np.asarray(m, dtype=float)
        cmap = self.solution_map(theta)
        c = cmap @ m
        z = self._residual_riesz(theta, cmap) @ m
        abs_bound = np.sqrt(max(z @ (self.model.gram_X @ z), 0.0)) / self.coercivity_floor(theta)
        ur_norm = np.linalg.norm(c)
        if abs_bound >= ur_norm:
            return np.inf
        return abs_bound / (ur_norm - abs_bound)

    def uniform_relative_bound(self, theta, complement: np.ndarray | None = None) -> float:
        """Relative error bound valid for every parameter direction at ``theta``.

        Maximizes (bounded residual)/(reduced norm) over the observable
        complement via a small generalized eigenvalue problem, then converts
        to an error-vs-truth statement.  ``inf`` when not certifiable yet.
        """
        if complement is None:
            complement = kernel_subspace(self.model).complement_basis
        cmap = self.solution_map(theta)
        rho = self._residual_riesz(theta, cmap) @ complement
        alpha = self.coercivity_floor(theta)
        a = rho.T @ (self.model.gram_X @ rho) / alpha**2
        red = cmap @ complement
        b = red.T @ red
        try:
            eigvals = sla.eigh(0.5 * (a + a.T), 0.5 * (b + b.T), eigvals_only=True)
        except np.linalg.LinAlgError:
            return np.inf
        delta = float(np.sqrt(max(eigvals[-1], 0.0)))
        if delta >= 1.0:
            return np.inf
        return delta / (1.0 - delta)

    def _append_snapshot(self, u_free: np.ndarray) -> bool:
        """X-orthonormalize a truth snapshot against the basis and append it.

        Returns False when the snapshot is numerically inside the span.
        """
        gram = self.model.gram_X
        w = u_free.copy()
        norm0 = np.sqrt(max(w @ (gram @ w), 0.0))
        if norm0 == 0.0:
            return False
        for _ in range(2):  # twice for numerical orthogonality
            if self.dim:
                w -= self.V @ (self.V.T @ (gram @ w))
        norm = np.sqrt(max(w @ (gram @ w), 0.0))
        if norm < 1e-10 * norm0:
            return False
        w /= norm
        self.V = np.concatenate([self.V, w[:, None]], axis=1)
        for q, a_q in enumerate(self.model.stiffness_components):
            av = a_q @ w
            self._stiff_times_basis[q] = np.concatenate(
                [self._stiff_times_basis[q], av[:, None]], axis=1
            )
            self.residual_stiffness[q] = np.concatenate(
                [self.residual_stiffness[q], self.model.riesz_solve(av)[:, None]], axis=1
            )
            self.reduced_stiffness[q] = self.V.T @ self._stiff_times_basis[q]
        self.reduced_loads = self.V.T @ self.model.load_free
        self._solution_cache.clear()
        return True

    def attach_library(self, library) -> None:
        """Precompute all library functionals applied to the basis states."""
        basis_full = self.model.expand(self.V)
        self.library_projection = np.asarray(library.functionals @ basis_full)
        self._library_size = library.size

    def save(self, path, meta: dict | None = None) -> None:
        """Serialize the surrogate (binary, versioned header)."""
        cert = self.certificate
        np.savez_compressed(
            path,
            format=np.array(FORMAT_HEADER),
            V=self.V,
            reduced_stiffness=np.stack(self.reduced_stiffness),
            reduced_loads=self.reduced_loads,
            residual_loads=self.residual_loads,
            residual_stiffness=np.stack(self.residual_stiffness),
            stiff_times_basis=np.stack(self._stiff_times_basis),
            alpha_ref=np.array(self.alpha_ref),
            cert_thetas=cert.thetas if cert else np.zeros((0, 0)),
            cert_eps=cert.eps_theta if cert else np.zeros(0),
            cert_target=np.array(cert.eps_target if cert else np.nan),
            cert_history=np.array(cert.history if cert else []),
            library_projection=(
                self.library_projection if self.library_projection is not None else np.zeros((0, 0))
            ),
            meta=np.array(json.dumps(meta or {})),
        )

    @classmethod
    def load(cls, path, model: Model, library=None) -> "RBSpace":
        with np.load(path, allow_pickle=False) as data:
            header = str(data["format"])
            if header != FORMAT_HEADER:
                raise ValueError(f"unrecognized surrogate artifact header: {header!r}")
            rb = cls.__new__(cls)
            rb.model = model
            rb.V = data["V"]
            if rb.V.shape[0] != model.n_free:
                raise ValueError("surrogate artifact does not match the model discretization")
            rb.reduced_stiffness = list(data["reduced_stiffness"])
            rb.reduced_loads = data["reduced_loads"]
            rb.residual_loads = data["residual_loads"]
            rb.residual_stiffness = list(data["residual_stiffness"])
            rb._stiff_times_basis = list(data["stiff_times_basis"])
            rb.alpha_ref = float(data["alpha_ref"])
            rb._solution_cache = {}
            eps = data["cert_eps"]
            if eps.size:
                rb.certificate = ErrorCertificate(
                    thetas=data["cert_thetas"],
                    eps_theta=eps,
                    eps_max=float(eps.max()),
                    eps_target=float(data["cert_target"]),
                    history=list(data["cert_history"]),
                )
            else:
                rb.certificate = None
            proj = data["library_projection"]
            rb.library_projection = proj if proj.size else None
            if rb.library_projection is not None:
                rb._library_size = rb.library_projection.shape[0]
        if library is not None and rb.library_projection is None:
            rb.attach_library(library)
        return rb

    @staticmethod
    def read_meta(path) -> dict:
        with np.load(path, allow_pickle=False) as data:
            return json.loads(str(data["meta"]))


def _reference_coercivity(model: Model) -> float:
    """Smallest generalized eigenvalue of the unit-coefficient operator vs. the Gram."""
    a_unit = sum(model.stiffness_components[1:], model.stiffness_components[0]).tocsc()
    v0 = np.ones(model.n_free)  # fixed start vector keeps the value reproducible
    vals = spla.eigsh(
        a_unit, k=1, M=model.gram_X.tocsc(), sigma=0.0, which="LM",
        return_eigenvectors=False, v0=v0,
    )
    alpha = float(vals[0])
    if alpha <= 0:
        raise ValueError("unit-coefficient operator is not coercive on the free dofs")
    return alpha


def build_rb(
    model: Model,
    xi_train: np.ndarray,
    eps_target: float,
    n_max: int = 80,
    library=None,
) -> tuple:
    """Greedy construction of a certified reduced basis over ``xi_train``.

    Each round enriches with the truth snapshot of the worst-estimated
    (hyper-parameter, direction) pair and stops once the uniform relative
    bound is at most ``eps_target`` on the whole training set.
    """
    if not 0.0 < eps_target < 1.0:
        raise ValueError("eps_target must lie in (0, 1)")
    xi_train = np.atleast_2d(np.asarray(xi_train, dtype=float))
    rb = RBSpace(model)
    complement = kernel_subspace(model).complement_basis
    m_dim = model.param_dim
    history: list = []

    while True:
        eps_all = np.array([rb.uniform_relative_bound(th, complement) for th in xi_train])
        eps_max = float(eps_all.max())
        history.append(eps_max)
        if eps_max <= eps_target:
            break
        if rb.dim >= n_max:
            raise RBBuildError(
                f"reduced basis reached {n_max} vectors with certified accuracy "
                f"{eps_max:.3e} > target {eps_target:.3e}",
                achieved_eps=eps_max,
            )
        theta_star = xi_train[int(np.argmax(eps_all))]
        # rank candidate directions at the worst point: relative estimate first,
        # absolute residual bound as tie-breaker when nothing is certifiable yet
        cmap = rb.solution_map(theta_star)
        rho = rb._residual_riesz(theta_star, cmap)
        alpha = rb.coercivity_floor(theta_star)
        scores = []
        for i in range(m_dim):
            e_i = np.zeros(m_dim)
            e_i[i] = 1.0
            rel = rb.error_estimate(theta_star, e_i)
            abs_bound = np.sqrt(max(rho[:, i] @ (model.gram_X @ rho[:, i]), 0.0)) / alpha
            scores.append((np.isfinite(rel), rel if np.isfinite(rel) else abs_bound, i))
        # uncertifiable directions first (largest residual), then by relative estimate
        infinite = sorted((s for s in scores if not s[0]), key=lambda s: -s[1])
        finite = sorted((s for s in scores if s[0]), key=lambda s: -s[1])
        appended = False
        for _, _, i in infinite + finite:
            e_i = np.zeros(m_dim)
            e_i[i] = 1.0
            snapshot = model.solve(theta_star, e_i)[model.free_dofs]
            if rb._append_snapshot(snapshot):
                appended = True
                break
        if not appended:
            raise RBBuildError(
                f"no enriching snapshot found at {theta_star} with certified accuracy "
                f"{eps_max:.3e} > target {eps_target:.3e}",
                achieved_eps=eps_max,
            )

    eps_final = np.array([rb.uniform_relative_bound(th, complement) for th in xi_train])
    certificate = ErrorCertificate(
        thetas=xi_train.copy(),
        eps_theta=eps_final,
        eps_max=float(eps_final.max()),
        eps_target=float(eps_target),
        history=history,
    )
    rb.certificate = certificate
    if library is not None:
        rb.attach_library(library)
    return rb, certificate


def _projection_rows(rb: RBSpace, op) -> np.ndarray:
    if rb.library_projection is None:
        raise ValueError("surrogate has no attached sensor library projection")
    if getattr(rb, "_library_size", None) != op.library.size:
        raise ValueError("operator library does not match the attached projection")
    return rb.library_projection[list(op.indices)]


def beta_rb(rb: RBSpace, theta, op, decomposition: SubspaceDecomposition | None = None) -> ObservabilityResult:
    """Observability coefficient evaluated on the surrogate.

    All work happens in the reduced dimension; no full-order solves occur.
    """
    if decomposition is None:
        decomposition = kernel_subspace(rb.model)
    c = decomposition.complement_basis
    s_red = rb.solution_map(theta) @ c
    state_gram = s_red.T @ s_red

    if op.k == 0:
        v = _principal_direction(state_gram)
        beta = 0.0
    else:
        g = _projection_rows(rb, op) @ s_red
        obs_gram = g.T @ op.solve_cov(g)
        beta, v = _beta_from_pencil(obs_gram, state_gram)

    scale = np.sqrt(max(v @ (state_gram @ v), 0.0))
    if scale == 0.0:
        raise ValueError("minimizing direction has zero surrogate state norm")
    v = v / scale
    return ObservabilityResult(
        beta=beta,
        minimizer_m=c @ v,
        minimizer_state=rb.lift(s_red @ v),
    )


def beta_rb_pair(rb: RBSpace, theta1, theta2, op, tol: float = 1e-10) -> ObservabilityResult:
    """Surrogate observability coefficient over two stacked hyper-parameters."""
    stacked = np.concatenate([rb.solution_map(theta1), rb.solution_map(theta2)], axis=1)
    decomposition = split_by_svd(stacked, tol)
    c = decomposition.complement_basis
    s_red = stacked @ c
    state_gram = s_red.T @ s_red

    if op.k == 0:
        v = _principal_direction(state_gram)
        beta = 0.0
    else:
        g = _projection_rows(rb, op) @ s_red
        obs_gram = g.T @ op.solve_cov(g)
        beta, v = _beta_from_pencil(obs_gram, state_gram)

    scale = np.sqrt(max(v @ (state_gram @ v), 0.0))
    if scale == 0.0:
        raise ValueError("minimizing direction has zero surrogate state norm")
    v = v / scale
    return ObservabilityResult(
        beta=beta,
        minimizer_m=c @ v,
        minimizer_state=rb.lift(s_red @ v),
    )
