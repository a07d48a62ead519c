"""Thermal-block benchmark: steady heat conduction on the unit square.

The conductivity is piecewise constant on three horizontal strips; the two
lower strips carry free conductivities while the top strip is pinned to one,
giving a two-dimensional hyper-parameter.  An uncertain heat flux enters
through the bottom edge, expanded in Legendre polynomials; the top edge is
held at zero temperature and the side walls are insulated.

Discretization: bilinear quadrilateral elements on a uniform grid.  Element
matrices are exact (closed form), edge load integrals use 3-point Gauss
quadrature, which is exact for cubic flux profiles against linear traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import HyperParameterDomain, Model, legendre

# Q1 element matrices on an axis-aligned square of side h, node order
# (0,0), (h,0), (h,h), (0,h).  The stiffness block is h-independent in 2d.
_K_ELEM = np.array(
    [
        [4.0, -1.0, -2.0, -1.0],
        [-1.0, 4.0, -1.0, -2.0],
        [-2.0, -1.0, 4.0, -1.0],
        [-1.0, -2.0, -1.0, 4.0],
    ]
) / 6.0

_M_ELEM = np.array(
    [
        [4.0, 2.0, 1.0, 2.0],
        [2.0, 4.0, 2.0, 1.0],
        [1.0, 2.0, 4.0, 2.0],
        [2.0, 1.0, 2.0, 4.0],
    ]
) / 36.0

# 3-point Gauss rule on [-1, 1]
_GAUSS3_X = np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
_GAUSS3_W = np.array([5.0, 8.0, 5.0]) / 9.0


@dataclass(frozen=True)
class ThermalBlockConfig:
    """Mesh and parameterization choices for the thermal block."""

    mesh_n: int = 65
    subdomain_boundaries: tuple = (1.0 / 3.0, 2.0 / 3.0)
    fixed_conductivity_subdomain: int = 2
    max_legendre_degree: int = 3
    theta_min: float = 0.1
    theta_max: float = 10.0

    def __post_init__(self):
        n_sub = len(self.subdomain_boundaries) + 1
        if n_sub != 3:
            raise ValueError("the thermal block uses exactly 3 subdomains")
        if not 0 <= self.fixed_conductivity_subdomain < n_sub:
            raise ValueError("pinned subdomain index out of range")
        if self.max_legendre_degree < 0:
            raise ValueError("flux degree must be non-negative")


def _grid_elements(mesh_n: int) -> np.ndarray:
    """Connectivity (n_el, 4) of the uniform quad grid, element-row-major."""
    n_el = mesh_n - 1
    ex, ey = np.meshgrid(np.arange(n_el), np.arange(n_el), indexing="xy")
    origin = (ey * mesh_n + ex).ravel()
    return np.stack([origin, origin + 1, origin + mesh_n + 1, origin + mesh_n], axis=1)


def _assemble_from_elements(conn: np.ndarray, elem_matrix: np.ndarray, n_dof: int) -> sp.csr_matrix:
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    vals = np.tile(elem_matrix.ravel(), conn.shape[0])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n_dof, n_dof)).tocsr()


def _edge_loads(mesh_n: int, h: float, max_degree: int, n_dof: int) -> np.ndarray:
    """Load vectors (n_dof, max_degree+1): flux profiles against the edge trace.

    The bottom edge runs over x in [0, 1]; profiles are Legendre polynomials
    in the rescaled coordinate t = 2x - 1.
    """
    loads = np.zeros((n_dof, max_degree + 1))
    for ix in range(mesh_n - 1):
        x_l, x_r = ix * h, (ix + 1) * h
        xg = 0.5 * (x_l + x_r) + 0.5 * h * _GAUSS3_X
        wg = 0.5 * h * _GAUSS3_W
        phi_l = (x_r - xg) / h
        phi_r = (xg - x_l) / h
        t = 2.0 * xg - 1.0
        for deg in range(max_degree + 1):
            p = legendre(deg, t)
            loads[ix, deg] += np.sum(wg * p * phi_l)
            loads[ix + 1, deg] += np.sum(wg * p * phi_r)
    return loads


def assemble_thermal_block(config: ThermalBlockConfig) -> Model:
    """Assemble the thermal-block model for the given configuration.

    Elements are attributed to strips by centroid, so the discrete strips are
    unions of element rows and the affine operator expansion is exact.
    """
    mesh_n = config.mesh_n
    if mesh_n < 3:
        raise ValueError("mesh too coarse to resolve the subdomain boundaries (mesh_n >= 3)")
    h = 1.0 / (mesh_n - 1)
    n_dof = mesh_n * mesh_n

    xs = np.linspace(0.0, 1.0, mesh_n)
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    coords = np.stack([gx.ravel(), gy.ravel()], axis=1)

    conn = _grid_elements(mesh_n)
    centroid_y = coords[conn, 1].mean(axis=1)
    strip = np.searchsorted(np.asarray(config.subdomain_boundaries), centroid_y)

    # top edge: homogeneous Dirichlet; bottom edge carries the flux,
    # left/right edges are natural (insulated)
    dirichlet = np.arange((mesh_n - 1) * mesh_n, n_dof)
    free = np.arange(0, (mesh_n - 1) * mesh_n)

    stiffness_full = []
    for q in range(3):
        sub_conn = conn[strip == q]
        if sub_conn.size:
            a_q = _assemble_from_elements(sub_conn, _K_ELEM, n_dof)
        else:
            a_q = sp.csr_matrix((n_dof, n_dof))
        stiffness_full.append(a_q)
    mass = _assemble_from_elements(conn, _M_ELEM * h * h, n_dof)

    gram_full = mass + sum(stiffness_full[1:], stiffness_full[0])
    gram_X = gram_full[free][:, free].tocsr()
    stiffness = [a[free][:, free].tocsr() for a in stiffness_full]

    loads = _edge_loads(mesh_n, h, config.max_legendre_degree, n_dof)

    pinned = config.fixed_conductivity_subdomain

    def coefficients(theta: np.ndarray) -> np.ndarray:
        out = np.empty(3)
        j = 0
        for q in range(3):
            if q == pinned:
                out[q] = 1.0
            else:
                out[q] = theta[j]
                j += 1
        return out

    domain = HyperParameterDomain(
        lower=np.full(2, config.theta_min), upper=np.full(2, config.theta_max)
    )

    return Model(
        coords=coords,
        gram_X=gram_X,
        stiffness_components=stiffness,
        coefficients=coefficients,
        load_components=loads,
        hyper_domain=domain,
        dirichlet_dofs=dirichlet,
        free_dofs=free,
        mesh_n=mesh_n,
    )


def assemble_all_free_variant(config: ThermalBlockConfig) -> Model:
    """Thermal block with all three conductivities free (P = 3).

    Useful for scaling checks that require every component coefficient to
    move with the hyper-parameter.
    """
    base = assemble_thermal_block(config)

    def coefficients(theta: np.ndarray) -> np.ndarray:
        return np.asarray(theta, dtype=float)

    domain = HyperParameterDomain(
        lower=np.full(3, config.theta_min), upper=np.full(3, config.theta_max)
    )
    return Model(
        coords=base.coords,
        gram_X=base.gram_X,
        stiffness_components=base.stiffness_components,
        coefficients=coefficients,
        load_components=base.load_components,
        hyper_domain=domain,
        dirichlet_dofs=base.dirichlet_dofs,
        free_dofs=base.free_dofs,
        mesh_n=base.mesh_n,
    )
