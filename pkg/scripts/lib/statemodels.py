#!/usr/bin/env python3
# pyright: strict
"""
Stationary Markov State Models
==============================

State processes that drive the pricing operators:

- ``DiscreteChain``: finite chain with a row-stochastic transition matrix
- ``GaussianAR1``: x' = a·x + σ·ε
- ``StackedNAR``: order-ℓ nonlinear AR stacked into a first-order process
  on ℓ-tuples (W_t, W_{t-1}, ..., W_{t-ℓ+1})
- ``OUSkeleton``: Ornstein–Uhlenbeck process sampled every τ time units

This module builds stationary grids, describes and discretizes transition
laws, and simulates seeded stationary paths.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Any, Callable, ClassVar, Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.polynomial.hermite import hermgauss
from numpy.typing import NDArray
from scipy import sparse, stats
from scipy.signal import lfilter
from scipy.sparse import csgraph

from .errors import DegenerateGrid, InterpolationOutOfRange, InvalidModel, NonStationaryModel
from .models import FloatArray, Grid, PathSample

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
TRUNCATION_SD = 8.0
EXPLOSION_BOUND = 1e8
RETAINED_MASS_TOL = 1e-8

PILOT_BURN_IN = 10**4
PILOT_LENGTH = 10**5
HISTOGRAM_BURN_IN = 10**4
HISTOGRAM_LENGTH = 10**6


class ModelKind(str, Enum):
    DISCRETE_CHAIN = "DiscreteChain"
    GAUSSIAN_AR1 = "GaussianAR1"
    STACKED_NAR = "StackedNAR"
    OU_SKELETON = "OUSkeleton"


class Stream(IntEnum):
    """Fixed child-stream counters derived from one root seed."""

    START = 0
    INNOVATIONS = 1
    SHOCKS = 2
    MONTE_CARLO = 3
    PILOT = 4
    WINDOWS = 5


def child_rng(seed: int, stream: Stream) -> np.random.Generator:
    """Independent generator for one purpose, reproducible from the root seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(stream),)))


# ─────────────────────────────────────────────────────────────────────────────
# Model types
# ─────────────────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class DiscreteChain:
    """Finite Markov chain; ``states`` are the values the chain takes (default 0..n-1)."""

    transition: FloatArray
    states: Optional[FloatArray] = None

    kind: ClassVar[ModelKind] = ModelKind.DISCRETE_CHAIN
    order: ClassVar[int] = 1

    def __post_init__(self) -> None:
        matrix = np.array(self.transition, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 2:
            raise InvalidModel(f"transition matrix must be square n×n with n ≥ 2, got {matrix.shape}")
        if np.any(matrix < 0):
            i, j = np.unravel_index(int(np.argmin(matrix)), matrix.shape)
            raise InvalidModel(
                f"transition matrix has a negative entry at ({i}, {j})",
                {"row": int(i), "col": int(j), "value": float(matrix[i, j])},
            )
        row_sums = matrix.sum(axis=1)
        worst = int(np.argmax(np.abs(row_sums - 1.0)))
        if abs(row_sums[worst] - 1.0) > ROW_SUM_TOL:
            raise InvalidModel(
                f"transition row {worst} sums to {row_sums[worst]:.15f}, expected 1",
                {"row": worst, "sum": float(row_sums[worst])},
            )
        states = np.arange(matrix.shape[0], dtype=np.float64) if self.states is None else np.array(self.states, dtype=np.float64)
        if states.shape != (matrix.shape[0],) or np.unique(states).size != states.size:
            raise InvalidModel("chain states must be distinct scalars, one per row")

        matrix.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "transition", matrix)
        object.__setattr__(self, "states", states)

    @property
    def n_states(self) -> int:
        return int(self.transition.shape[0])

    @property
    def dim(self) -> int:
        return 1

    def state_index(self, values: FloatArray) -> NDArray[np.int64]:
        """Map chain values back to row indices; raises KeyError for unknown values."""
        assert self.states is not None
        order = np.argsort(self.states)
        sorted_states = self.states[order]
        flat = np.asarray(values, dtype=np.float64).reshape(-1)
        pos = np.clip(np.searchsorted(sorted_states, flat), 0, self.n_states - 1)
        if not np.array_equal(sorted_states[pos], flat):
            raise KeyError("value is not a state of the chain")
        return order[pos].reshape(np.shape(values))


@dataclass(frozen=True)
class GaussianAR1:
    """x' = a·x + σ·ε with ε ~ N(0, 1)."""

    a: float
    sigma: float

    kind: ClassVar[ModelKind] = ModelKind.GAUSSIAN_AR1
    order: ClassVar[int] = 1

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise InvalidModel(f"sigma must be positive, got {self.sigma}")
        if not abs(self.a) < 1:
            raise NonStationaryModel(
                f"GaussianAR1 with |a| = {abs(self.a)} ≥ 1 has no stationary distribution",
                {"a": self.a},
            )

    @property
    def dim(self) -> int:
        return 1

    @property
    def stationary_sd(self) -> float:
        return self.sigma / math.sqrt(1.0 - self.a**2)

    def density(self, x: FloatArray, x_next: FloatArray) -> FloatArray:
        return stats.norm.pdf(x_next, loc=self.a * x, scale=self.sigma)


def _linear_mean(coefficients: Tuple[float, ...], intercept: float) -> Callable[[FloatArray], FloatArray]:
    coef = np.asarray(coefficients, dtype=np.float64)

    def mean_fn(x: FloatArray) -> FloatArray:
        return intercept + np.asarray(x, dtype=np.float64) @ coef

    return mean_fn


@dataclass(frozen=True, eq=False)
class StackedNAR:
    """Order-ℓ nonlinear autoregression W_t = h(W_{t-1}, ..., W_{t-ℓ}) + u_t.

    ``mean_fn`` maps arrays of shape (..., ℓ) to (...); its last axis is the
    stacked state (W_t, W_{t-1}, ...). ``innovation`` is a frozen scipy.stats
    continuous distribution for u_t and must have a positive density.
    """

    order: int
    mean_fn: Callable[[FloatArray], FloatArray]
    innovation: Any = field(default_factory=lambda: stats.norm(0.0, 1.0))
    coefficients: Optional[Tuple[float, ...]] = None
    intercept: float = 0.0
    label: str = "StackedNAR"

    kind: ClassVar[ModelKind] = ModelKind.STACKED_NAR

    def __post_init__(self) -> None:
        if self.order < 1:
            raise InvalidModel(f"order must be at least 1, got {self.order}")
        if not callable(self.mean_fn):
            raise InvalidModel("mean_fn must be callable")
        if not hasattr(self.innovation, "logpdf") or not hasattr(self.innovation, "rvs"):
            raise InvalidModel("innovation must be a frozen scipy.stats distribution")
        if self.coefficients is not None:
            if len(self.coefficients) != self.order:
                raise InvalidModel(
                    f"expected {self.order} coefficients, got {len(self.coefficients)}"
                )
            roots = np.abs(np.linalg.eigvals(_companion(self.coefficients)))
            if roots.max() >= 1:
                raise NonStationaryModel(
                    "linear StackedNAR has a companion root on or outside the unit circle",
                    {"max_root_modulus": float(roots.max())},
                )

    @classmethod
    def linear(
        cls,
        coefficients: Tuple[float, ...],
        sigma: float = 1.0,
        intercept: float = 0.0,
    ) -> "StackedNAR":
        """Linear AR(ℓ) with Gaussian innovations N(0, σ²)."""
        if not sigma > 0:
            raise InvalidModel(f"sigma must be positive, got {sigma}")
        coefficients = tuple(float(c) for c in coefficients)
        return cls(
            order=len(coefficients),
            mean_fn=_linear_mean(coefficients, intercept),
            innovation=stats.norm(0.0, sigma),
            coefficients=coefficients,
            intercept=float(intercept),
            label=f"LinearAR({len(coefficients)})",
        )

    @property
    def dim(self) -> int:
        return self.order

    def innovation_logpdf(self, u: FloatArray) -> FloatArray:
        values = np.asarray(self.innovation.logpdf(u), dtype=np.float64)
        if not np.all(np.isfinite(values)):
            bad = np.asarray(u)[~np.isfinite(values)]
            raise InvalidModel(
                "innovation density must be positive at every evaluated point",
                {"u": float(np.ravel(bad)[0])},
            )
        return values


def _companion(coefficients: Tuple[float, ...]) -> FloatArray:
    order = len(coefficients)
    comp = np.zeros((order, order))
    comp[0, :] = coefficients
    if order > 1:
        comp[1:, :-1] = np.eye(order - 1)
    return comp


@dataclass(frozen=True)
class OUSkeleton:
    """dX = -κX dt + σ dB observed every ``tau`` time units."""

    kappa: float
    sigma: float
    tau: float

    kind: ClassVar[ModelKind] = ModelKind.OU_SKELETON
    order: ClassVar[int] = 1

    def __post_init__(self) -> None:
        for name in ("kappa", "sigma", "tau"):
            if not getattr(self, name) > 0:
                raise InvalidModel(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def dim(self) -> int:
        return 1

    @property
    def a(self) -> float:
        return math.exp(-self.kappa * self.tau)

    @property
    def stationary_sd(self) -> float:
        return self.sigma / math.sqrt(2.0 * self.kappa)

    def as_ar1(self) -> GaussianAR1:
        """Exact discrete-time skeleton at interval τ."""
        variance = self.sigma**2 * -math.expm1(-2.0 * self.kappa * self.tau) / (2.0 * self.kappa)
        return GaussianAR1(a=self.a, sigma=math.sqrt(variance))


StateModel = Union[DiscreteChain, GaussianAR1, StackedNAR, OUSkeleton]


# ─────────────────────────────────────────────────────────────────────────────
# Transition laws
# ─────────────────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class TransitionStructure:
    """How the one-step law of X' given X is represented."""

    kind: ModelKind
    degenerate: bool
    stochastic_coordinates: int
    deterministic_coordinates: int
    density: Optional[Callable[[FloatArray, FloatArray], FloatArray]]
    description: str

    @property
    def density_horizon(self) -> int:
        """Smallest horizon at which the n-step conditional density exists."""
        return self.deterministic_coordinates + 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "degenerate": self.degenerate,
            "stochastic_coordinates": self.stochastic_coordinates,
            "deterministic_coordinates": self.deterministic_coordinates,
            "description": self.description,
        }


def transition_structure(model: StateModel) -> TransitionStructure:
    """Describe the transition law: a density, or a degenerate stacked shift."""
    if isinstance(model, DiscreteChain):
        chain = model

        def chain_density(x: FloatArray, x_next: FloatArray) -> FloatArray:
            return chain.transition[chain.state_index(x), chain.state_index(x_next)]

        return TransitionStructure(
            kind=model.kind,
            degenerate=False,
            stochastic_coordinates=1,
            deterministic_coordinates=0,
            density=chain_density,
            description="row lookup in the transition matrix",
        )

    if isinstance(model, (GaussianAR1, OUSkeleton)):
        ar1 = model.as_ar1() if isinstance(model, OUSkeleton) else model
        return TransitionStructure(
            kind=model.kind,
            degenerate=False,
            stochastic_coordinates=1,
            deterministic_coordinates=0,
            density=ar1.density,
            description=f"Gaussian density N({ar1.a:.6g}·x, {ar1.sigma:.6g}²)",
        )

    nar = model

    def first_coordinate_density(x: FloatArray, x_next: FloatArray) -> FloatArray:
        x_arr = np.asarray(x, dtype=np.float64)
        xn = np.asarray(x_next, dtype=np.float64)
        return np.exp(nar.innovation_logpdf(xn[..., 0] - nar.mean_fn(x_arr)))

    if nar.order == 1:
        return TransitionStructure(
            kind=nar.kind,
            degenerate=False,
            stochastic_coordinates=1,
            deterministic_coordinates=0,
            density=first_coordinate_density,
            description="density f_U(w' - h(x))",
        )

    return TransitionStructure(
        kind=nar.kind,
        degenerate=True,
        stochastic_coordinates=1,
        deterministic_coordinates=nar.order - 1,
        density=None,
        description=(
            "first coordinate has density f_U(w' - h(x)); remaining "
            f"{nar.order - 1} coordinates are a deterministic shift of x"
        ),
    )


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Discretized one-step transition on a grid (rows sum to one)."""

    matrix: FloatArray
    support: NDArray[np.bool_]
    clamped_rows: int = 0


def _locate(axis: FloatArray, values: FloatArray) -> Tuple[NDArray[np.int64], FloatArray, NDArray[np.bool_]]:
    """Bracketing index and linear fraction of ``values`` on ``axis``; flags hull exits."""
    outside = (values < axis[0]) | (values > axis[-1])
    clipped = np.clip(values, axis[0], axis[-1])
    lo = np.clip(np.searchsorted(axis, clipped, side="right") - 1, 0, axis.size - 2)
    frac = (clipped - axis[lo]) / (axis[lo + 1] - axis[lo])
    return lo.astype(np.int64), frac, outside


def _trapezoid_weights(axis: FloatArray) -> FloatArray:
    widths = np.zeros_like(axis)
    steps = np.diff(axis)
    widths[:-1] += steps / 2
    widths[1:] += steps / 2
    return widths


def _stacked_transition(model: StackedNAR, grid: Grid, strict_hull: bool) -> TransitionMatrix:
    if grid.axes is None or len(grid.axes) != model.order:
        raise DegenerateGrid(
            f"stacked model of order {model.order} needs a tensor grid with {model.order} axes"
        )
    axes = grid.axes
    shape = tuple(ax.size for ax in axes)
    n = grid.n
    nodes = axes[0]

    # innovation quadrature on the first-axis nodes
    mean = np.asarray(model.mean_fn(grid.points), dtype=np.float64).reshape(n)
    log_kernel = model.innovation_logpdf(nodes[None, :] - mean[:, None]) + np.log(_trapezoid_weights(nodes))[None, :]
    innov = np.exp(log_kernel)
    innov /= innov.sum(axis=1)[:, None]
    outside_mass = model.innovation.cdf(nodes[0] - mean) + model.innovation.sf(nodes[-1] - mean)
    clamped = np.asarray(outside_mass) > RETAINED_MASS_TOL

    # deterministic shift x[:-1] located on axes[1:]
    corner_index: List[NDArray[np.int64]] = [np.zeros((n, 1), dtype=np.int64)]
    corner_weight = np.ones((n, 1))
    for k in range(1, model.order):
        lo, frac, outside = _locate(axes[k], grid.points[:, k - 1])
        clamped |= outside
        idx = np.stack([lo, lo + 1], axis=1)
        wts = np.stack([1.0 - frac, frac], axis=1)
        corner_index = [np.repeat(c, 2, axis=1) for c in corner_index] + [np.tile(idx, (1, corner_weight.shape[1]))]
        corner_weight = np.repeat(corner_weight, 2, axis=1) * np.tile(wts, (1, corner_weight.shape[1]))

    n_clamped = int(clamped.sum())
    if n_clamped and strict_hull:
        row = int(np.flatnonzero(clamped)[0])
        raise InterpolationOutOfRange(
            f"{n_clamped} rows leave the grid hull (first at row {row})",
            {"rows": n_clamped, "first_row": row, "state": grid.points[row].tolist()},
        )

    n_nodes = nodes.size
    n_corners = corner_weight.shape[1]
    rows = np.repeat(np.arange(n), n_nodes * n_corners)
    first = np.broadcast_to(np.arange(n_nodes)[None, :, None], (n, n_nodes, n_corners))
    others = [np.broadcast_to(c[:, None, :], (n, n_nodes, n_corners)) for c in corner_index[1:]]
    cols = np.ravel_multi_index(tuple([first] + others), shape).reshape(-1)
    vals = (innov[:, :, None] * corner_weight[:, None, :]).reshape(-1)
    structural = np.broadcast_to(corner_weight[:, None, :] > 0, (n, n_nodes, n_corners)).reshape(-1)

    matrix = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).toarray()
    support = sparse.coo_matrix(
        (structural.astype(np.float64), (rows, cols)), shape=(n, n)
    ).toarray() > 0
    return TransitionMatrix(matrix=matrix, support=support, clamped_rows=n_clamped)


def transition_matrix(model: StateModel, grid: Grid, strict_hull: bool = False) -> TransitionMatrix:
    """Discretize the one-step transition of ``model`` on ``grid``.

    Gaussian models use the density-ratio kernel p(x_j|x_i)/q(x_j)·w_j
    normalized row by row. Stacked models integrate the innovation on the
    first axis and shift the remaining coordinates exactly.
    """
    if isinstance(model, DiscreteChain):
        if grid.n != model.n_states:
            raise DegenerateGrid(f"chain has {model.n_states} states but grid has {grid.n} points")
        return TransitionMatrix(matrix=np.array(model.transition), support=model.transition > 0)

    if isinstance(model, (GaussianAR1, OUSkeleton)):
        ar1 = model.as_ar1() if isinstance(model, OUSkeleton) else model
        sd = model.stationary_sd
        x = grid.points[:, 0]
        with np.errstate(divide="ignore"):
            log_kernel = (
                stats.norm.logpdf(x[None, :], loc=ar1.a * x[:, None], scale=ar1.sigma)
                - stats.norm.logpdf(x[None, :], loc=0.0, scale=sd)
                + np.log(grid.weights)[None, :]
            )
        log_kernel -= log_kernel.max(axis=1, keepdims=True)
        kernel = np.exp(log_kernel)
        kernel /= kernel.sum(axis=1, keepdims=True)
        return TransitionMatrix(matrix=kernel, support=np.broadcast_to(grid.weights > 0, kernel.shape).copy())

    return _stacked_transition(model, grid, strict_hull)


# ─────────────────────────────────────────────────────────────────────────────
# Stationary grids
# ─────────────────────────────────────────────────────────────────────────────


def chain_stationary_vector(transition: FloatArray) -> FloatArray:
    """Unique stationary vector of a finite chain (left Perron vector)."""
    graph = sparse.csr_matrix(transition > 0)
    n_comp, labels = csgraph.connected_components(graph, directed=True, connection="strong")
    closed = [
        c for c in range(n_comp)
        if not np.any(transition[np.ix_(labels == c, labels != c)] > 0)
    ]
    if len(closed) != 1:
        raise NonStationaryModel(
            f"chain has {len(closed)} closed classes; the stationary vector is not unique",
            {"closed_classes": [np.flatnonzero(labels == c).tolist() for c in closed]},
        )

    n = transition.shape[0]
    system = np.vstack([transition.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _sparse_stationary_vector(matrix: FloatArray, tol: float = 1e-12, max_iter: int = 100_000) -> FloatArray:
    """Stationary vector of a large irreducible chain by sparse power iteration."""
    transposed = sparse.csr_matrix(matrix).T.tocsr()
    pi = np.full(matrix.shape[0], 1.0 / matrix.shape[0])
    for iteration in range(1, max_iter + 1):
        nxt = transposed @ pi
        nxt /= nxt.sum()
        # entrywise relative change so the tail weights converge too
        positive = nxt > 0
        change = np.max(np.abs(nxt - pi)[positive] / nxt[positive])
        pi = nxt
        if change <= tol:
            logger.debug(f"stationary vector converged after {iteration} iterations")
            return pi
    raise NonStationaryModel(
        f"stationary vector did not converge in {max_iter} iterations",
        {"max_iter": max_iter},
    )


def _pilot_moments(model: StackedNAR, seed: int) -> Tuple[float, float]:
    series = _stacked_series(model, child_rng(seed, Stream.PILOT), PILOT_LENGTH, PILOT_BURN_IN)
    return float(series.mean()), float(series.std())


def stationary_grid(
    model: StateModel,
    n_points: int = 64,
    *,
    method: Optional[str] = None,
    seed: int = 0,
    truncation: float = TRUNCATION_SD,
) -> Grid:
    """Grid and quadrature weights for the stationary distribution of ``model``.

    Args:
        model: State model (must be stationary).
        n_points: Gauss–Hermite nodes for Gaussian models, points per axis for
            stacked models. Ignored for chains, whose grid is their state space.
        method: Stacked models only: ``"chain"`` (default) uses the stationary
            vector of the discretized transition, ``"simulate"`` the long-run
            histogram.
        seed: Root seed for pilot and histogram simulations.
        truncation: Half-width of stacked axes in stationary standard deviations.

    Returns:
        Grid whose weights sum to one.
    """
    if isinstance(model, DiscreteChain):
        weights = chain_stationary_vector(model.transition)
        assert model.states is not None
        return Grid(points=model.states[:, None], weights=weights, label="chain")

    if n_points < 2:
        raise DegenerateGrid(f"n_points must be at least 2, got {n_points}", {"n_points": n_points})

    if isinstance(model, (GaussianAR1, OUSkeleton)):
        nodes, gh_weights = hermgauss(n_points)
        points = math.sqrt(2.0) * model.stationary_sd * nodes
        weights = gh_weights / gh_weights.sum()
        return Grid(points=points[:, None], weights=weights, axes=(points,), label=f"gauss-hermite-{n_points}")

    mu, sd = _pilot_moments(model, seed)
    axis = np.linspace(mu - truncation * sd, mu + truncation * sd, n_points)
    axes = tuple(axis for _ in range(model.order))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    uniform = Grid(points=points, weights=np.full(points.shape[0], 1.0 / points.shape[0]), axes=axes)

    method = method or "chain"
    if method == "chain":
        weights = _sparse_stationary_vector(transition_matrix(model, uniform).matrix)
    elif method == "simulate":
        weights = simulated_weights(model, uniform, seed)
    else:
        raise ValueError(f"unknown stationary weight method {method!r}")
    weights = weights / weights.sum()
    return Grid(points=points, weights=weights, axes=axes, label=f"tensor-{n_points}^{model.order}-{method}")


def simulated_weights(
    model: StateModel,
    grid: Grid,
    seed: int,
    length: int = HISTOGRAM_LENGTH,
    burn_in: int = HISTOGRAM_BURN_IN,
) -> FloatArray:
    """Long-run simulation histogram projected to a tensor grid (cloud-in-cell)."""
    if grid.axes is None:
        raise DegenerateGrid("simulated weights need a tensor grid with axes")
    path = simulate_path(model, seed, length, burn_in=burn_in)
    shape = tuple(ax.size for ax in grid.axes)
    counts = np.zeros(shape)

    locs = [_locate(ax, path.states[:, k]) for k, ax in enumerate(grid.axes)]
    for corner in np.ndindex(*(2,) * len(locs)):
        index = tuple(lo + bit for (lo, _, _), bit in zip(locs, corner))
        weight = np.prod([frac if bit else 1.0 - frac for (_, frac, _), bit in zip(locs, corner)], axis=0)
        np.add.at(counts, index, weight)

    weights = counts.ravel()
    return weights / weights.sum()


def save_grid(grid: Grid, path: Any) -> None:
    """Write grid points and weights as CSV (x0..x{d-1}, weight)."""
    grid.to_frame().to_csv(path, index=False, float_format="%.17g")


# ─────────────────────────────────────────────────────────────────────────────
# Simulation
# ─────────────────────────────────────────────────────────────────────────────


def _check_explosion(series: FloatArray, label: str) -> None:
    if not np.all(np.isfinite(series)) or np.max(np.abs(series)) > EXPLOSION_BOUND:
        bad = int(np.argmax(~np.isfinite(series) | (np.abs(series) > EXPLOSION_BOUND)))
        raise NonStationaryModel(
            f"{label} path exploded at step {bad}; the mean function does not yield a stationary process",
            {"step": bad},
        )


def _stacked_series(
    model: StackedNAR,
    rng: np.random.Generator,
    length: int,
    burn_in: int,
    shocks_out: Optional[List[FloatArray]] = None,
) -> FloatArray:
    """Scalar series W of ``length + order`` values after burn-in."""
    total = burn_in + length + model.order
    innov = np.asarray(model.innovation.rvs(size=total, random_state=rng), dtype=np.float64)

    if model.coefficients is not None:
        denom = np.concatenate([[1.0], -np.asarray(model.coefficients)])
        series = lfilter([1.0], denom, innov + model.intercept)
    else:
        series = np.zeros(total)
        window = np.zeros(model.order)
        for t in range(total):
            value = float(model.mean_fn(window)) + innov[t]
            if not math.isfinite(value) or abs(value) > EXPLOSION_BOUND:
                raise NonStationaryModel(
                    f"{model.label} path exploded at step {t}; the mean function does not yield a stationary process",
                    {"step": t},
                )
            series[t] = value
            window = np.concatenate([[value], window[:-1]])

    _check_explosion(series, model.label)
    if shocks_out is not None:
        shocks_out.append(innov[burn_in + model.order:])
    return series[burn_in:]


def simulate_path(
    model: StateModel,
    seed: int,
    length: int,
    *,
    start: Optional[int] = None,
    burn_in: int = PILOT_BURN_IN,
) -> PathSample:
    """Seeded stationary path of ``length`` transitions.

    ``shocks`` records the draws that drove each transition: standard-normal
    innovations for Gaussian models, innovations u_t for stacked models, and
    uniforms for chains. ``start`` fixes the initial chain state index.
    """
    if length < 1:
        raise ValueError(f"length must be at least 1, got {length}")

    if isinstance(model, DiscreteChain):
        start_rng = child_rng(seed, Stream.START)
        uniforms = child_rng(seed, Stream.INNOVATIONS).random(length)
        if start is None:
            pi = chain_stationary_vector(model.transition)
            start = int(np.searchsorted(np.cumsum(pi), start_rng.random(), side="right"))
            start = min(start, model.n_states - 1)
        cumulative = np.cumsum(model.transition, axis=1)
        index = np.empty(length + 1, dtype=np.int64)
        index[0] = start
        for t in range(length):
            row = cumulative[index[t]]
            index[t + 1] = min(int(np.searchsorted(row, uniforms[t], side="right")), model.n_states - 1)
        assert model.states is not None
        return PathSample(states=model.states[index][:, None], shocks=uniforms, seed=seed)

    if isinstance(model, (GaussianAR1, OUSkeleton)):
        ar1 = model.as_ar1() if isinstance(model, OUSkeleton) else model
        x0 = child_rng(seed, Stream.START).normal(0.0, ar1.stationary_sd)
        eps = child_rng(seed, Stream.INNOVATIONS).standard_normal(length)
        body, _ = lfilter([1.0], [1.0, -ar1.a], ar1.sigma * eps, zi=[ar1.a * x0])
        states = np.concatenate([[x0], body])
        _check_explosion(states, "GaussianAR1")
        return PathSample(states=states[:, None], shocks=eps, seed=seed)

    shocks: List[FloatArray] = []
    series = _stacked_series(model, child_rng(seed, Stream.INNOVATIONS), length, burn_in, shocks)
    # row t is (W_t, W_{t-1}, ..., W_{t-ℓ+1})
    states = sliding_window_view(series, model.order)[:, ::-1]
    return PathSample(states=np.ascontiguousarray(states[: length + 1]), shocks=shocks[0][:length], seed=seed)
