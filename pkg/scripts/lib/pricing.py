#!/usr/bin/env python3
# pyright: strict
"""
Pricing Outputs
===============

Bond prices and yield curves, the long-horizon pricing limit
ρ⁻ⁿTₙψ → ⟨ψ, φ*⟩φ, the twisted (permanent-component) kernel and the
permanent/transitory SDF decomposition along simulated paths.
"""

import logging
from typing import Callable, Dict, Optional

import numpy as np
import scipy.linalg
from scipy.interpolate import RegularGridInterpolator

from .errors import NonStochasticKernel, PathOffGrid, TooLarge, ZeroBondPrice
from .models import (
    Decomposition,
    Eigenpair,
    FloatArray,
    Grid,
    LongRunErrors,
    PathDecomposition,
    PathSample,
    YieldCurve,
)
from .operator_core import DiscreteOperator, SDFSpec
from .statemodels import DiscreteChain, StateModel, Stream, child_rng

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-8
DENSE_LIMIT = 2000


def bond_prices(op: DiscreteOperator, n_max: int) -> FloatArray:
    """Tₙ1 for n = 1..n_max, shape (n_max, n).

    Raises:
        ZeroBondPrice: a price is zero at some grid point.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    prices = np.empty((n_max, op.n))
    current = np.ones(op.n)
    for n in range(n_max):
        current = op.matrix @ current
        if np.any(current <= 0):
            i = int(np.argmin(current))
            raise ZeroBondPrice(
                f"bond price of maturity {n + 1} is zero at grid point {i}; positivity fails",
                {"horizon": n + 1, "point": i},
            )
        prices[n] = current
    return prices


def yield_curve(op: DiscreteOperator, n_max: int) -> YieldCurve:
    """Per-period net yields from Tₙ1(x) = (1 + yₙ(x))⁻ⁿ."""
    prices = bond_prices(op, n_max)
    horizons = np.arange(1, n_max + 1)
    yields = prices ** (-1.0 / horizons[:, None]) - 1.0
    return YieldCurve(horizons=horizons, prices=prices, yields=yields)


def fitted_log_rate(errors: FloatArray, burn_in: int = 5, floor_rtol: float = 1e-11) -> float:
    """Least-squares slope of log eₙ over n ≥ burn_in, above the precision floor."""
    errors = np.asarray(errors, dtype=np.float64)
    horizons = np.arange(1, errors.size + 1)
    peak = float(errors.max()) if errors.size else 0.0
    mask = (horizons >= burn_in) & (errors > floor_rtol * peak) & (errors > 0)
    if mask.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(horizons[mask], np.log(errors[mask]), 1)
    return float(slope)


def long_run_limit_check(op: DiscreteOperator, pair: Eigenpair, psi: FloatArray, n_max: int = 200) -> LongRunErrors:
    """Errors eₙ = ‖ρ⁻ⁿTₙψ − ⟨ψ, φ*⟩φ‖ for n = 1..n_max (weighted norm)."""
    w = op.grid.weights
    psi = np.asarray(psi, dtype=np.float64)
    constant = float(np.sum(w * psi * pair.phi_star))
    limit = constant * pair.phi

    errors = np.empty(n_max)
    current = psi.copy()
    for n in range(n_max):
        current = (op.matrix @ current) / pair.rho
        diff = current - limit
        errors[n] = np.sqrt(np.sum(w * diff * diff))

    return LongRunErrors(
        horizons=np.arange(1, n_max + 1),
        errors=errors,
        constant=constant,
        log_rate=fitted_log_rate(errors),
    )


def weighted_median(values: FloatArray, weights: FloatArray) -> float:
    order = np.argsort(values, kind="stable")
    cumulative = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cumulative, 0.5 * cumulative[-1])])


def payoff_battery(grid: Grid) -> Dict[str, FloatArray]:
    """Test payoffs {1, x, x², 1{x ≤ median}, 1{x > median}} on the first coordinate."""
    x = grid.points[:, 0]
    median = weighted_median(x, grid.weights)
    return {
        "one": np.ones(grid.n),
        "x": x.copy(),
        "x2": x**2,
        "below_median": (x <= median).astype(np.float64),
        "above_median": (x > median).astype(np.float64),
    }


def twisted_kernel(op: DiscreteOperator, pair: Eigenpair) -> FloatArray:
    """P̃ᵢⱼ = Mᵢⱼ φⱼ / (ρ φᵢ)."""
    kernel = op.matrix * pair.phi[None, :] / (pair.rho * pair.phi[:, None])
    deviation = np.abs(kernel.sum(axis=1) - 1.0)
    if deviation.max() > ROW_SUM_TOL:
        i = int(np.argmax(deviation))
        raise NonStochasticKernel(
            f"twisted kernel row {i} sums to {kernel[i].sum():.12f}; the eigen-residual is too large",
            {"row": i, "deviation": float(deviation[i])},
        )
    return kernel


def decompose(op: DiscreteOperator, pair: Eigenpair, dense_limit: int = DENSE_LIMIT) -> Decomposition:
    """Twisted kernel, its stationary law (dense left Perron vector) and long-run constants."""
    kernel = twisted_kernel(op, pair)
    if op.n > dense_limit:
        raise TooLarge(
            f"operator has {op.n} points, above the dense limit {dense_limit}",
            {"n": op.n, "dense_limit": dense_limit},
        )
    eigenvalues, left = scipy.linalg.eig(kernel, left=True, right=False)
    k = int(np.argmin(np.abs(eigenvalues - 1.0)))
    pi_tilde = np.abs(left[:, k].real)
    pi_tilde /= pi_tilde.sum()

    w = op.grid.weights
    constants = {
        name: float(np.sum(w * psi * pair.phi_star))
        for name, psi in payoff_battery(op.grid).items()
    }
    return Decomposition(eigenpair=pair, twisted_kernel=kernel, pi_tilde=pi_tilde, long_run_constant=constants)


def _phi_interpolator(model: StateModel, grid: Grid, phi: FloatArray) -> Callable[[FloatArray], FloatArray]:
    """Evaluate φ at path states: exact lookup for chains, log-multilinear otherwise."""
    if isinstance(model, DiscreteChain):
        lookup = dict(zip(grid.points[:, 0].tolist(), phi.tolist()))

        def chain_phi(states: FloatArray) -> FloatArray:
            try:
                return np.array([lookup[float(s)] for s in states[:, 0]])
            except KeyError as exc:
                raise PathOffGrid(f"state {exc.args[0]} is not a chain state") from exc

        return chain_phi

    if grid.axes is None:
        raise PathOffGrid("interpolating φ off-grid needs a tensor grid with axes")
    shape = tuple(ax.size for ax in grid.axes)
    interp = RegularGridInterpolator(grid.axes, np.log(phi).reshape(shape), method="linear", bounds_error=True)

    def grid_phi(states: FloatArray) -> FloatArray:
        try:
            return np.exp(interp(states))
        except ValueError as exc:
            lo, hi = grid.hull()
            outside = np.any((states < lo) | (states > hi), axis=1)
            t = int(np.argmax(outside))
            raise PathOffGrid(
                f"path state at step {t} lies outside the grid hull",
                {"step": t, "state": states[t].tolist()},
            ) from exc

    return grid_phi


def decompose_along_path(
    sdf: SDFSpec,
    model: StateModel,
    pair: Eigenpair,
    path: PathSample,
    grid: Grid,
) -> PathDecomposition:
    """Per-step transitory ρφ(Xₜ)/φ(Xₜ₊₁) and permanent mφ(Xₜ₊₁)/(ρφ(Xₜ)) factors."""
    phi_at = _phi_interpolator(model, grid, pair.phi)
    phi_path = phi_at(path.states)
    x, x_next = path.states[:-1], path.states[1:]

    y: Optional[FloatArray] = None
    if sdf.shock_law is not None:
        z = child_rng(path.seed, Stream.SHOCKS).standard_normal(x.shape[0])
        y = sdf.shock_law(x, x_next, z)
    m = sdf.evaluate(x, x_next, y)

    transitory = pair.rho * phi_path[:-1] / phi_path[1:]
    permanent = m * phi_path[1:] / (pair.rho * phi_path[:-1])
    result = PathDecomposition(sdf=m, transitory=transitory, permanent=permanent)
    logger.debug(
        f"permanent factor mean {result.permanent_mean:.6f} ± {result.permanent_stderr:.2e} over {path.length} steps"
    )
    return result
