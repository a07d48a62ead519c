"""Hyper-parameterized affine forward models.

A :class:`Model` bundles the discretized operator components of a linear
forward problem whose bilinear form depends affinely on a vector of
hyper-parameters: the system matrix at ``theta`` is
``sum_q coefficients(theta)[q] * stiffness_components[q]`` and the right-hand
side is a fixed linear map of the inferred parameter vector ``m``.  States are
full-length nodal coefficient vectors; essential boundary dofs are eliminated
internally and re-inserted as zeros, so every state returned by a solve
already satisfies the boundary conditions.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_FACTOR_CACHE_SIZE = 8  # LU factors are a few MB each at desk scale


@dataclass(frozen=True)
class HyperParameterDomain:
    """Box of admissible hyper-parameter values with positive bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1 or lower.size < 1:
            raise ValueError("bounds must be 1d arrays of equal length >= 1")
        if np.any(lower <= 0.0):
            raise ValueError("lower bounds must be strictly positive")
        if np.any(lower >= upper):
            raise ValueError("each lower bound must be below its upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, theta, rtol: float = 1e-12) -> bool:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != self.lower.shape:
            return False
        slack = rtol * (self.upper - self.lower)
        return bool(np.all(theta >= self.lower - slack) and np.all(theta <= self.upper + slack))


def sample_hyper_grid(domain: HyperParameterDomain, n_per_dim: int, log_scale: bool = True) -> np.ndarray:
    """Tensor grid over the hyper-parameter box, endpoints included.

    Returns an ``(n_per_dim**P, P)`` array in C order (last dimension varies
    fastest).  With ``log_scale`` the per-dimension spacing is equidistant in
    log10, which is the natural scale for conductivity-like ratios.
    """
    if n_per_dim < 2:
        raise ValueError("n_per_dim must be >= 2")
    axes = []
    for lo, hi in zip(domain.lower, domain.upper):
        if log_scale:
            axes.append(np.logspace(np.log10(lo), np.log10(hi), n_per_dim))
        else:
            axes.append(np.linspace(lo, hi, n_per_dim))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def legendre(i: int, t) -> np.ndarray | float:
    """Standard (unnormalized) Legendre polynomial of degree ``i`` at ``t``."""
    if i < 0:
        raise ValueError("degree must be non-negative")
    coeffs = np.zeros(i + 1)
    coeffs[i] = 1.0
    return np.polynomial.legendre.legval(t, coeffs)


@dataclass
class Model:
    """Discretized affine-parameterized forward problem.

    Attributes
    ----------
    coords : (n_dof, 2) array of node coordinates.
    gram_X : sparse SPD matrix of the state inner product on the free dofs.
    stiffness_components : list of sparse matrices on the free dofs; the
        operator at ``theta`` is their ``coefficients(theta)``-weighted sum.
    coefficients : map from hyper-parameter vector to the component weights.
    load_components : (n_dof, M) dense matrix; column i is the load of the
        i-th canonical parameter direction.
    """

    coords: np.ndarray
    gram_X: sp.csr_matrix
    stiffness_components: list
    coefficients: Callable[[np.ndarray], np.ndarray]
    load_components: np.ndarray
    hyper_domain: HyperParameterDomain
    dirichlet_dofs: np.ndarray
    free_dofs: np.ndarray
    mesh_n: int = 0
    _factor_cache: OrderedDict = field(default_factory=OrderedDict, repr=False)
    _gram_factor: object = field(default=None, repr=False)

    @property
    def n_dof(self) -> int:
        return self.coords.shape[0]

    @property
    def n_free(self) -> int:
        return self.free_dofs.size

    @property
    def param_dim(self) -> int:
        return self.load_components.shape[1]

    @property
    def load_free(self) -> np.ndarray:
        return self.load_components[self.free_dofs]

    def _theta_key(self, theta: np.ndarray) -> bytes:
        return theta.tobytes()

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if not self.hyper_domain.contains(theta):
            raise ValueError(f"hyper-parameter {theta} outside the admissible domain")
        return theta

    def operator(self, theta) -> sp.csr_matrix:
        """Assembled system matrix on the free dofs at ``theta``."""
        theta = self._check_theta(theta)
        coeffs = np.asarray(self.coefficients(theta), dtype=float)
        if coeffs.size != len(self.stiffness_components):
            raise ValueError("coefficient map does not match the component count")
        out = coeffs[0] * self.stiffness_components[0]
        for c, a in zip(coeffs[1:], self.stiffness_components[1:]):
            out = out + c * a
        return out.tocsr()

    def factor(self, theta, cache: bool = True):
        """Sparse LU of the operator at ``theta`` (small LRU cache).

        Concurrent sweeps should pass ``cache=False``: the factorization then
        touches no shared mutable state.
        """
        theta = self._check_theta(theta)
        key = self._theta_key(theta)
        if not cache:
            return self._factorize(theta)
        fac = self._factor_cache.get(key)
        if fac is None:
            fac = self._factorize(theta)
            self._factor_cache[key] = fac
            while len(self._factor_cache) > _FACTOR_CACHE_SIZE:
                self._factor_cache.popitem(last=False)
        else:
            self._factor_cache.move_to_end(key)
        return fac

    def _factorize(self, theta):
        try:
            return spla.splu(self.operator(theta).tocsc())
        except RuntimeError as exc:  # singular factorization
            raise RuntimeError(
                f"forward operator factorization failed at theta={theta}; "
                "coercivity assumption violated"
            ) from exc

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Embed a free-dof vector into a full-length state (zeros on Dirichlet dofs)."""
        if u_free.ndim == 1:
            out = np.zeros(self.n_dof)
        else:
            out = np.zeros((self.n_dof, u_free.shape[1]))
        out[self.free_dofs] = u_free
        return out

    def solve(self, theta, m) -> np.ndarray:
        """Solution state for hyper-parameter ``theta`` and parameter vector ``m``."""
        m = np.asarray(m, dtype=float)
        if m.shape != (self.param_dim,):
            raise ValueError(f"parameter vector must have length {self.param_dim}")
        rhs = self.load_free @ m
        return self.expand(self.factor(theta).solve(rhs))

    def state_matrix(self, theta, cache: bool = True) -> np.ndarray:
        """(n_dof, M) matrix whose column i solves the problem for e_i."""
        sol = self.factor(theta, cache=cache).solve(self.load_free)
        return self.expand(sol)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """State-space inner product (free-dof restriction of ``gram_X``)."""
        return float(u[self.free_dofs] @ (self.gram_X @ v[self.free_dofs]))

    def norm(self, u: np.ndarray) -> float:
        return np.sqrt(max(self.inner(u, u), 0.0))

    def gram_matrix(self, states: np.ndarray) -> np.ndarray:
        """Gram matrix of state columns in the state inner product."""
        s = states[self.free_dofs]
        return s.T @ (self.gram_X @ s)

    def riesz_solve(self, rhs_free: np.ndarray) -> np.ndarray:
        """Solve ``gram_X @ x = rhs`` on the free dofs (shared cached factorization)."""
        if self._gram_factor is None:
            self._gram_factor = spla.splu(self.gram_X.tocsc())
        return self._gram_factor.solve(rhs_free)
