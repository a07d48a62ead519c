"""Candidate sensor library and observation operators.

A sensor is a local average of the state against a normalized Gaussian
window.  On the tensor-product Q1 mesh each nodal basis function factorizes
into 1d hats, so the functional entries are products of 1d Gaussian-vs-hat
integrals which are evaluated in closed form via erf; there is no quadrature
error against finite element functions.

The library's noise covariance is either the Gram matrix of the sensors'
Riesz representations in the state inner product (mode ``"riesz"``) or the
identity (mode ``"identity"``).  Full covariance assembly is only feasible at
desk scale; operators and the greedy loop request rows on demand.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.special import erf

from .model import Model

_CUTOFF_STDS = 8.5  # Gaussian tail truncation; erf mass beyond is < 1e-16


def _norm_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / np.sqrt(2.0)))


def _hat_weights(nodes: np.ndarray, center: float, std: float) -> np.ndarray:
    """Integrals of a 1d unit-mass Gaussian against each nodal hat function.

    ``nodes`` are the sorted 1d grid coordinates; the hats are piecewise
    linear with supports on adjacent segments, clipped to the grid interval.
    """
    n = nodes.size
    a, b = nodes[:-1], nodes[1:]
    width = b - a
    # segment mass and first moment about the center
    d0 = _norm_cdf((b - center) / std) - _norm_cdf((a - center) / std)
    dens_a = np.exp(-0.5 * ((a - center) / std) ** 2) / (std * np.sqrt(2.0 * np.pi))
    dens_b = np.exp(-0.5 * ((b - center) / std) ** 2) / (std * np.sqrt(2.0 * np.pi))
    d1 = -(std**2) * (dens_b - dens_a)  # integral of (x - center) * gaussian
    right = ((center - a) * d0 + d1) / width  # weight of the right-end hat
    weights = np.zeros(n)
    weights[1:] += right
    weights[:-1] += d0 - right
    return weights


@dataclass
class SensorLibrary:
    """Finite library of Gaussian-window sensors on a regular grid."""

    centers: np.ndarray
    std: float
    model: Model
    functionals: sp.csr_matrix
    cov_diag: np.ndarray
    noise_mode: str = "riesz"
    grid_shape: tuple = (0, 0)
    _riesz_cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    def apply(self, k: int, u: np.ndarray) -> float:
        """Value of sensor ``k`` on the state ``u``."""
        return float((self.functionals[k] @ u)[0])

    def riesz_row(self, k: int) -> np.ndarray:
        """Riesz representation of sensor ``k`` (full-length, cached)."""
        row = self._riesz_cache.get(k)
        if row is None:
            f = np.asarray(self.functionals[k].todense()).ravel()
            row = self.model.expand(self.model.riesz_solve(f[self.model.free_dofs]))
            self._riesz_cache[k] = row
        return row

    def riesz_rows(self, indices) -> np.ndarray:
        return np.stack([self.riesz_row(k) for k in indices], axis=0)

    def cov_row(self, k: int) -> np.ndarray:
        """Row ``k`` of the library noise covariance."""
        if self.noise_mode == "identity":
            row = np.zeros(self.size)
            row[k] = 1.0
            return row
        return self.functionals @ self.riesz_row(k)

    def cov_entries(self, rows, cols) -> np.ndarray:
        """Covariance block for the given row and column index lists."""
        rows = list(rows)
        cols = list(cols)
        if self.noise_mode == "identity":
            return np.equal.outer(np.asarray(rows), np.asarray(cols)).astype(float)
        r = self.riesz_rows(rows)
        f = sp.vstack([self.functionals[c] for c in cols])
        return (f @ r.T).T

    def cov_submatrix(self, indices) -> np.ndarray:
        block = self.cov_entries(indices, indices)
        return 0.5 * (block + block.T)

    def noise_cov(self, max_size: int = 4096) -> np.ndarray:
        """Dense library covariance; guarded against paper-scale assembly."""
        if self.size > max_size:
            raise ValueError(
                f"dense covariance of a {self.size}-sensor library refused "
                f"(limit {max_size}); use cov_row/cov_entries"
            )
        return self.cov_submatrix(range(self.size))

    def bottom_row_indices(self) -> np.ndarray:
        """Library indices whose centers sit on the lowest grid row."""
        y = self.centers[:, 1]
        return np.flatnonzero(np.isclose(y, y.min()))

    def x_columns(self) -> np.ndarray:
        """Sorted distinct center x-coordinates."""
        return np.unique(self.centers[:, 0])

    def index_at(self, x: float, y: float) -> int:
        """Library index of the center closest to ``(x, y)``."""
        d2 = (self.centers[:, 0] - x) ** 2 + (self.centers[:, 1] - y) ** 2
        return int(np.argmin(d2))


def build_library(
    grid_n: int,
    bounds: tuple,
    std: float,
    model: Model,
    noise_mode: str = "riesz",
) -> SensorLibrary:
    """Build the sensor library on a ``grid_n x grid_n`` grid of centers.

    ``bounds = (lo, hi)`` places centers on [lo, hi]^2, endpoints included.
    Sensors are ordered bottom row first, x varying fastest.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    if std <= 0:
        raise ValueError("std must be positive")
    if noise_mode not in ("riesz", "identity"):
        raise ValueError("noise_mode must be 'riesz' or 'identity'")

    mesh_n = model.mesh_n
    h = 1.0 / (mesh_n - 1)
    if std < h:
        warnings.warn(
            f"sensor width {std:g} below the element size {h:g}; the mesh "
            "under-resolves the sensor windows",
            UserWarning,
            stacklevel=2,
        )

    lo, hi = bounds
    ticks = np.linspace(lo, hi, grid_n)
    cx, cy = np.meshgrid(ticks, ticks, indexing="xy")
    centers = np.stack([cx.ravel(), cy.ravel()], axis=1)

    nodes = np.linspace(0.0, 1.0, mesh_n)
    cutoff = _CUTOFF_STDS * std

    rows, cols, vals = [], [], []
    for k, (x0, y0) in enumerate(centers):
        ix0, ix1 = np.searchsorted(nodes, [x0 - cutoff, x0 + cutoff])
        iy0, iy1 = np.searchsorted(nodes, [y0 - cutoff, y0 + cutoff])
        ix0, iy0 = max(ix0 - 1, 0), max(iy0 - 1, 0)
        ix1, iy1 = min(ix1 + 1, mesh_n), min(iy1 + 1, mesh_n)
        # hat weights are local: evaluate on the windowed sub-grid only
        wx = _hat_weights_window(nodes, x0, std, ix0, ix1)
        wy = _hat_weights_window(nodes, y0, std, iy0, iy1)
        jx = np.arange(ix0, ix1)
        jy = np.arange(iy0, iy1)
        block = np.outer(wy, wx)
        node_ids = (jy[:, None] * mesh_n + jx[None, :]).ravel()
        rows.append(np.full(node_ids.size, k))
        cols.append(node_ids)
        vals.append(block.ravel())

    functionals = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(centers.shape[0], model.n_dof),
    ).tocsr()

    library = SensorLibrary(
        centers=centers,
        std=float(std),
        model=model,
        functionals=functionals,
        cov_diag=np.zeros(centers.shape[0]),
        noise_mode=noise_mode,
        grid_shape=(grid_n, grid_n),
    )
    if noise_mode == "identity":
        library.cov_diag = np.ones(centers.shape[0])
    else:
        diag = np.empty(centers.shape[0])
        free = model.free_dofs
        for k in range(centers.shape[0]):
            f = np.asarray(functionals[k].todense()).ravel()
            r_free = model.riesz_solve(f[free])
            diag[k] = f[free] @ r_free
        library.cov_diag = diag
    return library


def _hat_weights_window(nodes, center, std, i0, i1):
    """Hat weights restricted to the node window [i0, i1)."""
    lo = max(i0 - 1, 0)
    hi = min(i1 + 1, nodes.size)
    w = _hat_weights(nodes[lo:hi], center, std)
    return w[i0 - lo : i1 - lo]


class ObservationOperator:
    """Ordered selection of library sensors with its noise covariance block."""

    def __init__(self, library: SensorLibrary, indices):
        indices = [int(i) for i in indices]
        if len(set(indices)) != len(indices):
            raise ValueError("sensor indices must be distinct")
        self.library = library
        self.indices = tuple(indices)
        if indices:
            self.obs_matrix = sp.vstack([library.functionals[k] for k in indices]).tocsr()
            self.cov = library.cov_submatrix(indices)
            try:
                self.cov_chol = sla.cho_factor(self.cov, lower=True)
            except np.linalg.LinAlgError as exc:
                raise ValueError("selected noise covariance block is not SPD") from exc
        else:
            self.obs_matrix = sp.csr_matrix((0, library.model.n_dof))
            self.cov = np.zeros((0, 0))
            self.cov_chol = None

    @classmethod
    def empty(cls, library: SensorLibrary) -> "ObservationOperator":
        return cls(library, [])

    @property
    def k(self) -> int:
        return len(self.indices)

    def observe(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.obs_matrix @ u).ravel() if self.k else np.zeros(0)

    def observe_states(self, states: np.ndarray) -> np.ndarray:
        """Apply every sensor to every state column: (K, n_states)."""
        if not self.k:
            return np.zeros((0, states.shape[1]))
        return np.asarray(self.obs_matrix @ states)

    def solve_cov(self, d: np.ndarray) -> np.ndarray:
        """Apply the inverse covariance block."""
        if not self.k:
            return np.zeros_like(d)
        return sla.cho_solve(self.cov_chol, d)

    def noise_norm(self, d: np.ndarray) -> float:
        d = np.asarray(d, dtype=float)
        if d.shape[0] != self.k:
            raise ValueError("data length does not match the sensor count")
        if not self.k:
            return 0.0
        return float(np.sqrt(max(d @ self.solve_cov(d), 0.0)))

    def extended(self, j: int) -> "ObservationOperator":
        return ObservationOperator(self.library, list(self.indices) + [int(j)])

    def riesz_rows(self) -> np.ndarray:
        return self.library.riesz_rows(self.indices)

    def sample_noise(self, sigma: float, rng_seed) -> np.ndarray:
        """Draw from N(0, sigma^2 * cov) via the Cholesky factor."""
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
        if not self.k:
            return np.zeros(0)
        chol = np.linalg.cholesky(self.cov)
        return sigma * (chol @ rng.standard_normal(self.k))


def gamma_L(op: ObservationOperator, model: Model) -> float:
    """Operator norm of the observation map from states to noise-weighted data.

    Equals the square root of the largest generalized eigenvalue of the
    Riesz-representation Gram against the noise covariance block.
    """
    if not op.k:
        raise ValueError("gamma is undefined for the empty operator")
    r = op.riesz_rows()[:, model.free_dofs]
    gram = r @ (model.gram_X @ r.T)
    gram = 0.5 * (gram + gram.T)
    eigvals = sla.eigh(gram, op.cov, eigvals_only=True)
    return float(np.sqrt(max(eigvals[-1], 0.0)))
