"""Greedy stability-based sensor selection and the comparison baselines.

The greedy loop alternates between (a) finding, on the surrogate, the
attainable state that the current selection observes worst at the current
worst-case hyper-parameter, (b) scanning the whole library for the sensor
that observes that state best in the extended noise norm, and (c) re-locating
the worst-case hyper-parameter over the training set.  Candidate scores use a
rank-one Schur-complement update of the covariance factorization, so one
iteration costs one K x K factorization plus O(K^2) work per candidate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
import scipy.linalg as sla

from .model import Model
from .observability import kernel_subspace, split_by_svd
from .reduced_basis import RBSpace
from .sensors import ObservationOperator, SensorLibrary


@dataclass(frozen=True)
class GreedyConfig:
    """Inputs of the greedy selection loop."""

    beta_target: float
    k_max: int
    xi_train: np.ndarray
    theta_start: np.ndarray
    criterion: str = "beta"  # "beta" (single) or "beta2" (hyper-parameter pairs)
    pair_stride: int = 2
    rng_seed: int | None = None
    tie_tol: float = 1e-12
    schur_tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "xi_train", np.atleast_2d(np.asarray(self.xi_train, dtype=float)))
        object.__setattr__(self, "theta_start", np.asarray(self.theta_start, dtype=float))
        if self.beta_target <= 0:
            raise ValueError("beta_target must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.criterion not in ("beta", "beta2"):
            raise ValueError("criterion must be 'beta' or 'beta2'")
        if not any(np.allclose(row, self.theta_start) for row in self.xi_train):
            raise ValueError("theta_start must be a training-set point")


@dataclass
class GreedyIteration:
    iteration: int
    sensor_index: int
    score: float
    worst_theta: np.ndarray
    beta: float
    wall_time: float
    theta_state: np.ndarray = field(repr=False, default=None)
    state_coeffs: np.ndarray = field(repr=False, default=None)


@dataclass
class GreedyTrace:
    iterations: list
    target_reached: bool
    criterion: str

    @property
    def betas(self) -> np.ndarray:
        return np.array([it.beta for it in self.iterations])


@dataclass(frozen=True)
class SensorSet:
    """Selected library indices with a provenance tag."""

    indices: tuple
    provenance: str
    set_id: str = ""

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if len(set(indices)) != len(indices):
            raise ValueError("sensor indices must be distinct")
        object.__setattr__(self, "indices", indices)


def score_candidate(op: ObservationOperator, y, z: float, cross, variance: float,
                    schur_tol: float = 1e-12) -> float:
    """Squared extended-operator noise norm of an observed state.

    ``y`` holds the current observations of the state, ``z`` the candidate
    sensor's value, ``cross`` the covariance column between the candidate and
    the selected sensors, and ``variance`` the candidate's own variance.
    A numerically redundant candidate (vanishing Schur complement) contributes
    no information and falls back to the current squared norm.
    """
    y = np.asarray(y, dtype=float)
    if op.k == 0:
        if variance <= schur_tol:
            return 0.0
        return z * z / variance
    w = op.solve_cov(y)
    base = float(y @ w)
    s = variance - float(np.asarray(cross) @ op.solve_cov(np.asarray(cross)))
    if s <= schur_tol:
        return base
    t = z - float(np.asarray(cross) @ w)
    return base + t * t / s


class _TrainingData:
    """Per-hyper-parameter surrogate quantities reused across greedy iterations."""

    def __init__(self, rb: RBSpace, config: GreedyConfig):
        if rb.library_projection is None:
            raise ValueError("surrogate has no attached sensor library projection")
        proj = rb.library_projection
        model = rb.model
        self.pairs_mode = config.criterion == "beta2"
        if self.pairs_mode:
            pair_points = _strided_grid(config.xi_train, config.pair_stride)
            self.points = list(combinations_with_replacement(range(len(pair_points)), 2))
            self.thetas = [
                np.concatenate([pair_points[i], pair_points[j]]) for i, j in self.points
            ]
            maps = [rb.solution_map(th) for th in pair_points]
            self.state_maps = []
            self.grams = []
            self.obs_maps = []
            for i, j in self.points:
                stacked = np.concatenate([maps[i], maps[j]], axis=1)
                c = split_by_svd(stacked).complement_basis
                s_red = stacked @ c
                self.state_maps.append(s_red)
                self.grams.append(s_red.T @ s_red)
                self.obs_maps.append(proj @ s_red)
            start = np.concatenate([config.theta_start, config.theta_start])
            self.start_index = int(np.argmin([np.linalg.norm(th - start) for th in self.thetas]))
        else:
            c = kernel_subspace(model).complement_basis
            self.thetas = [np.asarray(th) for th in config.xi_train]
            self.state_maps = []
            self.grams = []
            self.obs_maps = []
            for th in self.thetas:
                s_red = rb.solution_map(th) @ c
                self.state_maps.append(s_red)
                self.grams.append(s_red.T @ s_red)
                self.obs_maps.append(proj @ s_red)
            self.start_index = int(
                np.argmin([np.linalg.norm(th - config.theta_start) for th in self.thetas])
            )

    def beta_at(self, idx: int, selected: list, cov_chol) -> float:
        w_sel = self.obs_maps[idx][selected]
        obs_gram = w_sel.T @ sla.cho_solve(cov_chol, w_sel)
        try:
            eigvals = sla.eigh(
                0.5 * (obs_gram + obs_gram.T), self.grams[idx], eigvals_only=True
            )
        except np.linalg.LinAlgError as exc:
            raise ValueError("degenerate surrogate state Gram in the training scan") from exc
        return float(np.sqrt(max(eigvals[0], 0.0)))

    def worst_state(self, idx: int, selected: list, cov_chol, prior_precision=None):
        """Unit-norm surrogate state the current selection observes worst."""
        gram = self.grams[idx]
        if not selected:
            # empty operator: every state scores zero; take the principal
            # state direction per unit prior-weighted parameter norm
            if prior_precision is None:
                b = np.eye(gram.shape[0])
            else:
                b = prior_precision
            eigvals, eigvecs = sla.eigh(gram, b)
            v = eigvecs[:, -1]
        else:
            w_sel = self.obs_maps[idx][selected]
            obs_gram = w_sel.T @ sla.cho_solve(cov_chol, w_sel)
            _, eigvecs = sla.eigh(0.5 * (obs_gram + obs_gram.T), gram)
            v = eigvecs[:, 0]
        scale = np.sqrt(max(v @ (gram @ v), 0.0))
        if scale == 0.0:
            raise ValueError("surrogate state direction has zero norm")
        return self.state_maps[idx] @ (v / scale)


def _strided_grid(xi_train: np.ndarray, stride: int) -> np.ndarray:
    """Coarsen a flat tensor-grid listing by striding each axis when possible."""
    if stride <= 1:
        return xi_train
    n = xi_train.shape[0]
    side = int(round(np.sqrt(n)))
    if side * side == n and xi_train.shape[1] == 2:
        grid = xi_train.reshape(side, side, 2)
        sub = grid[::stride, ::stride].reshape(-1, 2)
        return sub
    return xi_train[::stride]


def run_greedy(model: Model, rb: RBSpace, library: SensorLibrary, config: GreedyConfig,
               prior=None) -> tuple:
    """Greedy worst-case sensor selection on the certified surrogate.

    Returns the selected :class:`SensorSet` and a :class:`GreedyTrace` with
    one record per iteration.  Stops when the surrogate worst-case coefficient
    reaches the target, the sensor budget is exhausted, or the library runs
    out; an exhausted budget leaves ``trace.target_reached`` false.
    """
    if rb.certificate is None or not rb.certificate.valid:
        raise ValueError("surrogate certificate is missing or invalid (eps_max must be < 1)")
    data = _TrainingData(rb, config)
    prior_precision = None
    if prior is not None:
        c = kernel_subspace(model).complement_basis
        if data.pairs_mode:
            prior_precision = None  # stacked space: fall back to Euclidean normalization
        else:
            prior_precision = c.T @ prior.cov_inv @ c

    n_lib = library.size
    cov_diag = library.cov_diag
    selected: list = []
    cov = np.zeros((0, 0))
    cov_chol = None
    cov_rows = np.zeros((0, n_lib))
    beta = 0.0
    current = data.start_index
    iterations = []
    t_start = time.perf_counter()

    while beta < config.beta_target and len(selected) < config.k_max and len(selected) < n_lib:
        theta_state = np.asarray(data.thetas[current]).copy()
        state = data.worst_state(current, selected, cov_chol, prior_precision)
        z_all = np.asarray(rb.library_projection @ state).ravel()

        if selected:
            y = z_all[selected]
            w = sla.cho_solve(cov_chol, y)
            base = float(y @ w)
            sol_rows = sla.cho_solve(cov_chol, cov_rows)
            t_vals = z_all - cov_rows.T @ w
            s_vals = cov_diag - np.einsum("kj,kj->j", cov_rows, sol_rows)
            # vanishing Schur complement: candidate adds no information
            gain = np.where(s_vals > config.schur_tol, t_vals**2 / np.maximum(s_vals, 1e-300), 0.0)
            scores_sq = base + gain
        else:
            scores_sq = np.where(cov_diag > config.schur_tol, z_all**2 / cov_diag, 0.0)
        scores = np.sqrt(np.maximum(scores_sq, 0.0))
        scores[selected] = -np.inf
        best = float(np.max(scores))
        chosen = int(np.min(np.flatnonzero(scores >= best - config.tie_tol)))

        new_row = library.cov_row(chosen)
        if selected:
            col = new_row[selected]
            cov = np.block([[cov, col[:, None]], [col[None, :], np.array([[cov_diag[chosen]]])]])
        else:
            cov = np.array([[cov_diag[chosen]]])
        selected.append(chosen)
        cov_rows = np.concatenate([cov_rows, new_row[None, :]], axis=0)
        cov_chol = sla.cho_factor(0.5 * (cov + cov.T), lower=True)

        betas = np.array([data.beta_at(i, selected, cov_chol) for i in range(len(data.thetas))])
        current = int(np.argmin(betas))
        beta = float(betas[current])

        iterations.append(
            GreedyIteration(
                iteration=len(selected),
                sensor_index=chosen,
                score=best,
                worst_theta=np.asarray(data.thetas[current]).copy(),
                beta=beta,
                wall_time=time.perf_counter() - t_start,
                theta_state=theta_state,
                state_coeffs=state.copy(),
            )
        )

    trace = GreedyTrace(
        iterations=iterations,
        target_reached=beta >= config.beta_target,
        criterion=config.criterion,
    )
    provenance = "greedy" if config.criterion == "beta" else "greedy_beta2"
    sensor_set = SensorSet(indices=tuple(selected), provenance=provenance, set_id=provenance)
    return sensor_set, trace


def random_baseline(library: SensorLibrary, k: int = 16, n_sets: int = 50, seed: int = 0) -> list:
    """Uniformly random sensor sets without replacement, reproducible by seed."""
    rng = np.random.default_rng(seed)
    sets = []
    for i in range(n_sets):
        idx = np.sort(rng.choice(library.size, size=k, replace=False))
        sets.append(SensorSet(indices=tuple(idx), provenance="random", set_id=f"random_{i:03d}"))
    return sets


def random_inflow_baseline(library: SensorLibrary, k: int = 16, n_inflow_min: int = 4,
                           n_sets: int = 50, seed: int = 0) -> list:
    """Random sets constrained to hold sensors near the inflow boundary.

    At least ``n_inflow_min`` indices come from the library row with the
    smallest vertical coordinate; the remainder is uniform over the rest.
    """
    if n_inflow_min > k:
        raise ValueError("n_inflow_min cannot exceed the set size")
    bottom = library.bottom_row_indices()
    if bottom.size < n_inflow_min:
        raise ValueError("library bottom row has too few sensors")
    rng = np.random.default_rng(seed)
    all_idx = np.arange(library.size)
    sets = []
    for i in range(n_sets):
        low = rng.choice(bottom, size=n_inflow_min, replace=False)
        rest_pool = np.setdiff1d(all_idx, low)
        rest = rng.choice(rest_pool, size=k - n_inflow_min, replace=False)
        idx = np.sort(np.concatenate([low, rest]))
        sets.append(
            SensorSet(indices=tuple(idx), provenance="random_inflow", set_id=f"random_inflow_{i:03d}")
        )
    return sets


def chebyshev_nodes(degree_max: int) -> np.ndarray:
    """Chebyshev interpolation nodes on [-1, 1] for the given maximal degree."""
    n = degree_max + 1
    j = np.arange(n)
    return np.cos((2 * j + 1) * np.pi / (2 * n))


def chebyshev_reference(library: SensorLibrary, degree_max: int = 3) -> SensorSet:
    """Reference set: Chebyshev horizontal positions paired with the inflow-nearest rows.

    The interpolation nodes are mapped to the library's horizontal extent and
    snapped to the nearest library columns; each column is combined with the
    rows closest to the inflow boundary to form a square pattern.
    """
    cols = library.x_columns()
    lo, hi = cols[0], cols[-1]
    targets = lo + (chebyshev_nodes(degree_max) + 1.0) / 2.0 * (hi - lo)
    chosen_cols = []
    for t in targets:
        chosen_cols.append(cols[int(np.argmin(np.abs(cols - t)))])
    chosen_cols = np.unique(chosen_cols)
    if chosen_cols.size != degree_max + 1:
        raise ValueError("library grid too coarse to separate the Chebyshev columns")
    rows = np.unique(library.centers[:, 1])[: degree_max + 1]
    indices = [library.index_at(x, y) for y in rows for x in chosen_cols]
    return SensorSet(indices=tuple(sorted(indices)), provenance="chebyshev", set_id="chebyshev")


@dataclass
class SetEvaluation:
    """Per-test-point observability and posterior-trace summary of one sensor set."""

    set_id: str
    provenance: str
    betas: np.ndarray
    traces: np.ndarray

    @property
    def mean_beta(self) -> float:
        return float(self.betas.mean())

    @property
    def mean_trace(self) -> float:
        return float(self.traces.mean())

    @property
    def min_beta(self) -> float:
        return float(self.betas.min())

    @property
    def max_trace(self) -> float:
        return float(self.traces.max())


def evaluate_sensor_sets(model: Model, sets: list, xi_test: np.ndarray, sigma: float,
                         prior, library: SensorLibrary, threads: int | None = None) -> list:
    """Full-order evaluation of many sensor sets over a test grid.

    For every test hyper-parameter the forward solves are shared across sets;
    each set then contributes a small observation Gram (for the observability
    coefficient) and a posterior covariance trace.
    """
    xi_test = np.atleast_2d(np.asarray(xi_test, dtype=float))
    n_test = xi_test.shape[0]
    decomp = kernel_subspace(model)
    c = decomp.complement_basis

    ops = []
    for s in sets:
        ops.append(ObservationOperator(library, list(s.indices)))

    betas = np.zeros((len(sets), n_test))
    traces = np.zeros((len(sets), n_test))

    def eval_point(t: int) -> None:
        theta = xi_test[t]
        states = model.state_matrix(theta, cache=False)
        s_c = states @ c
        state_gram = model.gram_matrix(s_c)
        for j, op in enumerate(ops):
            ptg = op.observe_states(states)
            g_c = ptg @ c
            obs_gram = g_c.T @ op.solve_cov(g_c)
            eigvals = sla.eigh(0.5 * (obs_gram + obs_gram.T), state_gram, eigvals_only=True)
            betas[j, t] = np.sqrt(max(eigvals[0], 0.0))
            hess = ptg.T @ op.solve_cov(ptg) / sigma**2 + prior.cov_inv
            traces[j, t] = np.trace(np.linalg.inv(0.5 * (hess + hess.T)))

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(eval_point, range(n_test)))
    else:
        for t in range(n_test):
            eval_point(t)

    return [
        SetEvaluation(set_id=s.set_id, provenance=s.provenance, betas=betas[j], traces=traces[j])
        for j, s in enumerate(sets)
    ]


def evaluate_sensor_set(model: Model, sensor_set: SensorSet, xi_test: np.ndarray, sigma: float,
                        prior, library: SensorLibrary) -> SetEvaluation:
    """Evaluate a single sensor set (see :func:`evaluate_sensor_sets`)."""
    return evaluate_sensor_sets(model, [sensor_set], xi_test, sigma, prior, library)[0]
