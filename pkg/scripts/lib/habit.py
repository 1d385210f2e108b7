#!/usr/bin/env python3
# pyright: strict
"""
External Habit Formation
========================

With marginal utility MU_t = C_t^{-γ}·h(X_t), the Euler equation for asset i
becomes the eigen-problem

    β⁻¹ h(x) = E[ exp(-γ g') R_i(x, g') h(X') | X = x ],

so β is the inverse principal eigenvalue and h the positive eigenfunction
of the habit operator. γ and R_i are taken as given.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .conditions import check_no_arbitrage_sufficient
from .errors import DegenerateGrid, InvalidModel, UniquenessFailed
from .models import ConditionReport, FloatArray, Grid, HabitSolution
from .operator_core import DiscreteOperator, SDFSpec, build_pricing_operator
from .spectral import DEFAULT_DENSE_LIMIT, DEFAULT_MAX_ITER, DEFAULT_TOL, dominant_eigenpair, full_spectrum_oracle
from .statemodels import StackedNAR

logger = logging.getLogger(__name__)

ReturnFunction = Callable[[FloatArray, FloatArray], FloatArray]


@dataclass(frozen=True)
class HabitModel:
    """Habit specification: risk aversion, growth process and conditional returns R_i(x, g')."""

    gamma: float
    growth_model: StackedNAR
    return_fn: ReturnFunction
    ell: Optional[int] = None
    label: str = "habit"

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise InvalidModel(f"gamma must be nonnegative, got {self.gamma}")
        if not isinstance(self.growth_model, StackedNAR):
            raise InvalidModel("growth_model must be a StackedNAR over consumption growth")
        if self.ell is None:
            object.__setattr__(self, "ell", self.growth_model.order)
        elif self.ell != self.growth_model.order:
            raise InvalidModel(
                f"habit lag {self.ell} does not match growth model order {self.growth_model.order}"
            )


def habit_sdf(hm: HabitModel) -> SDFSpec:
    """m(x, x', y) = exp(-γ·g')·R_i(x, g') with g' the first coordinate of x'."""
    gamma = hm.gamma
    returns = hm.return_fn

    def m(x: FloatArray, x_next: FloatArray, y: Optional[FloatArray]) -> FloatArray:
        g_next = np.asarray(x_next)[..., 0]
        r = np.asarray(returns(np.asarray(x), g_next), dtype=np.float64)
        if np.any(r <= 0):
            raise InvalidModel(
                "return function must be strictly positive at every evaluated point",
                {"min_return": float(np.min(r))},
            )
        return np.exp(-gamma * g_next) * r

    return SDFSpec(m=m, label=f"Habit({hm.label})", params={"gamma": gamma})


def build_habit_operator(hm: HabitModel, grid: Grid) -> DiscreteOperator:
    """Euler-equation operator Tψ(x) = E[exp(-γg')R_i(x, g')ψ(X') | X = x]."""
    return build_pricing_operator(hm.growth_model, habit_sdf(hm), grid)


def recover_habit(
    op: DiscreteOperator,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
) -> HabitSolution:
    """β = 1/ρ and h = φ, with uniqueness certified by the dense oracle.

    Raises:
        UniquenessFailed: the operator does not have exactly one nonnegative eigenvector.
    """
    report = full_spectrum_oracle(op, dense_limit)
    if report.positive_eigenvector_count != 1:
        raise UniquenessFailed(report.positive_eigenvector_count, report)

    pair = dominant_eigenpair(op, tol, max_iter)
    solution = HabitSolution(
        beta=1.0 / pair.rho,
        h=pair.phi,
        residual=pair.residual,
        uniqueness_certificate=report.excerpt(),
    )
    logger.info(f"✓ Recovered beta={solution.beta:.10f} (residual {solution.residual:.2e})")
    return solution


def _shifted_state(x: FloatArray, g_next: FloatArray) -> FloatArray:
    """x' = (g', x₁, ..., x_{ℓ-1})."""
    x = np.asarray(x, dtype=np.float64)
    g_next = np.asarray(g_next, dtype=np.float64)
    shape = np.broadcast_shapes(x.shape[:-1], g_next.shape)
    head = np.broadcast_to(g_next, shape)[..., None]
    tail = np.broadcast_to(x[..., :-1], shape + (x.shape[-1] - 1,))
    return np.concatenate([head, tail], axis=-1)


def _grid_function(h0: FloatArray, grid: Grid) -> Callable[[FloatArray], FloatArray]:
    if grid.axes is None:
        raise DegenerateGrid("a tabulated h0 needs a tensor grid with axes")
    shape = tuple(ax.size for ax in grid.axes)
    values = np.asarray(h0, dtype=np.float64)
    if values.shape != (grid.n,):
        raise InvalidModel(f"h0 has shape {values.shape}, grid has {grid.n} points")
    interp = RegularGridInterpolator(
        grid.axes, np.log(values).reshape(shape), method="linear", bounds_error=False, fill_value=None
    )

    def h(states: FloatArray) -> FloatArray:
        flat = states.reshape(-1, states.shape[-1])
        return np.exp(interp(flat)).reshape(states.shape[:-1])

    return h


def synthesize_consistent_returns(
    h0: Union[FloatArray, Callable[[FloatArray], FloatArray]],
    beta0: float,
    gamma: float,
    growth_model: StackedNAR,
    grid: Optional[Grid] = None,
) -> HabitModel:
    """Returns R_i(x, g') = (1/β₀)·exp(γg')·h₀(x)/h₀(x') that make (1/β₀, h₀) an eigenpair.

    ``h0`` is either a callable on stacked states of shape (..., ℓ) or a grid
    function on ``grid`` (interpolated log-linearly between nodes).
    """
    if beta0 <= 0:
        raise InvalidModel(f"beta0 must be positive, got {beta0}")
    if callable(h0):
        h_fn = h0
        if grid is not None:
            values = np.asarray(h_fn(grid.points), dtype=np.float64)
            if not np.all(values > 0):
                i = int(np.argmin(np.where(np.isnan(values), -np.inf, values)))
                raise InvalidModel(
                    f"h0 must be strictly positive on the grid; h0 at point {i} is {values[i]}",
                    {"point": i, "value": float(values[i])},
                )
    else:
        if grid is None:
            raise InvalidModel("a tabulated h0 needs the grid it was tabulated on")
        if np.any(np.asarray(h0) <= 0):
            raise InvalidModel("h0 must be strictly positive")
        h_fn = _grid_function(np.asarray(h0), grid)

    def return_fn(x: FloatArray, g_next: FloatArray) -> FloatArray:
        x_next = _shifted_state(x, g_next)
        return np.exp(gamma * g_next) * h_fn(np.asarray(x, dtype=np.float64)) / (beta0 * h_fn(x_next))

    return HabitModel(gamma=gamma, growth_model=growth_model, return_fn=return_fn, label="synthesized")


def check_habit_no_arbitrage(hm: HabitModel, samples: int, seed: int) -> ConditionReport:
    """Sampled positivity of exp(-γg')R_i over ℓ consecutive steps."""
    assert hm.ell is not None
    return check_no_arbitrage_sufficient(habit_sdf(hm), hm.growth_model, hm.ell, samples, seed)
