#!/usr/bin/env python3
# pyright: strict
"""
Discretized Pricing Operators
=============================

Builds the matrix approximation of the one-period pricing operator

    (Tψ)(x) = E[ m(X_t, X_{t+1}, Y_{t+1}) ψ(X_{t+1}) | X_t = x ]

on a stationary grid, and provides the primitives used downstream:
apply, compose_n (Tₙ = Tⁿ), the L²(Q) adjoint and Hilbert–Schmidt
quadrature. Operators are immutable and can be saved as CSV plus a JSON
sidecar.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .errors import DimensionMismatch, NegativeSDF, ZeroWeight
from .models import FloatArray, Grid
from .statemodels import (
    GaussianAR1,
    StateModel,
    Stream,
    child_rng,
    transition_matrix,
    transition_structure,
)

logger = logging.getLogger(__name__)

DEFAULT_MC_DRAWS = 4096
MC_CHUNK_ELEMENTS = 4_000_000

SDFFunction = Callable[[FloatArray, FloatArray, Optional[FloatArray]], FloatArray]
ShockLaw = Callable[[FloatArray, FloatArray, FloatArray], FloatArray]


class DegenerateFlag(Enum):
    """Returned by hs_integral when the n-step conditional density does not exist."""

    DEGENERATE = "DegenerateFlag"


DEGENERATE = DegenerateFlag.DEGENERATE


@dataclass(frozen=True)
class SDFSpec:
    """One-period stochastic discount factor m(x, x', y).

    ``m`` receives broadcastable arrays x, x' of shape (..., d) and y of
    shape (...) (or None when there is no shock law). ``shock_law`` maps
    standard-normal draws z to Y' given (x, x').
    """

    m: SDFFunction
    shock_law: Optional[ShockLaw] = None
    label: str = "custom"
    params: Dict[str, float] = field(default_factory=lambda: {})

    def evaluate(self, x: FloatArray, x_next: FloatArray, y: Optional[FloatArray] = None) -> FloatArray:
        return np.asarray(self.m(x, x_next, y), dtype=np.float64)


def unit_sdf() -> SDFSpec:
    """m ≡ 1: the operator is the transition operator."""

    def m(x: FloatArray, x_next: FloatArray, y: Optional[FloatArray]) -> FloatArray:
        return np.ones(np.broadcast_shapes(np.shape(x)[:-1], np.shape(x_next)[:-1]))

    return SDFSpec(m=m, label="Unit")


def constant_sdf(beta: float) -> SDFSpec:
    """m ≡ β."""

    def m(x: FloatArray, x_next: FloatArray, y: Optional[FloatArray]) -> FloatArray:
        return np.full(np.broadcast_shapes(np.shape(x)[:-1], np.shape(x_next)[:-1]), beta)

    return SDFSpec(m=m, label="Constant", params={"beta": beta})


def ccapm_sdf(
    beta: float,
    gamma: float,
    growth: Optional[Callable[[FloatArray, FloatArray, Optional[FloatArray]], FloatArray]] = None,
    shock_law: Optional[ShockLaw] = None,
) -> SDFSpec:
    """Representative-agent C-CAPM: m = β·exp(-γ·g(x, x', y)).

    The default growth map is g = x'₁ (+ y when a shock law is given).
    """
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")

    def default_growth(x: FloatArray, x_next: FloatArray, y: Optional[FloatArray]) -> FloatArray:
        g = np.asarray(x_next)[..., 0]
        return g if y is None else g + y

    g = growth or default_growth

    def m(x: FloatArray, x_next: FloatArray, y: Optional[FloatArray]) -> FloatArray:
        return beta * np.exp(-gamma * g(x, x_next, y))

    label = "CCAPM" if growth is None else "CCAPM-custom"
    return SDFSpec(m=m, shock_law=shock_law, label=label, params={"beta": beta, "gamma": gamma})


def exponential_affine_sdf(log_beta: float, theta: float) -> SDFSpec:
    """m = exp(log β + θ·(x'₁ - x₁)); products over steps telescope."""

    def m(x: FloatArray, x_next: FloatArray, y: Optional[FloatArray]) -> FloatArray:
        return np.exp(log_beta + theta * (np.asarray(x_next)[..., 0] - np.asarray(x)[..., 0]))

    return SDFSpec(m=m, label="ExponentialAffine", params={"log_beta": log_beta, "theta": theta})


def ccapm_ar1_oracle(beta: float, gamma: float, a: float, sigma: float) -> Tuple[float, float]:
    """Closed-form principal eigenpair of C-CAPM with g = x' on a Gaussian AR(1).

    Returns:
        (rho, b) with φ(x) = exp(b·x).
    """
    b = -gamma * a / (1.0 - a)
    rho = beta * math.exp(gamma**2 * sigma**2 / (2.0 * (1.0 - a) ** 2))
    return rho, b


def ccapm_ar1_bond_prices(beta: float, gamma: float, a: float, sigma: float, x: FloatArray, n: int) -> FloatArray:
    """Closed-form Tₙ1(x) = βⁿ·exp(Aₙ + Bₙ·x) for the same model."""
    coef_a, coef_b = 0.0, 0.0
    for _ in range(n):
        coef_a, coef_b = coef_a + (coef_b - gamma) ** 2 * sigma**2 / 2.0, a * (coef_b - gamma)
    return beta**n * np.exp(coef_a + coef_b * np.asarray(x, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Matrix M with (Tf)ᵢ = Σⱼ Mᵢⱼ fⱼ; quadrature weights already folded in."""

    grid: Grid
    matrix: FloatArray
    label: str = ""
    support: Optional[NDArray[np.bool_]] = None
    meta: Dict[str, Any] = field(default_factory=lambda: {})

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.shape != (self.grid.n, self.grid.n):
            raise DimensionMismatch(
                f"matrix shape {matrix.shape} does not match grid size {self.grid.n}",
                {"shape": list(matrix.shape), "n": self.grid.n},
            )
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        if self.support is not None:
            support = np.array(self.support, dtype=bool)
            support.setflags(write=False)
            object.__setattr__(self, "support", support)

    @property
    def n(self) -> int:
        return self.grid.n

    def scaled(self, factor: float) -> "DiscreteOperator":
        return replace(self, matrix=factor * self.matrix, label=f"{factor:g}*{self.label}")

    def pattern(self, rtol: float = 1e-13) -> NDArray[np.bool_]:
        """Structurally nonzero entries; declared support wins over the threshold."""
        if self.support is not None:
            return self.support
        peak = float(np.max(np.abs(self.matrix))) if self.matrix.size else 0.0
        return self.matrix > rtol * peak


def _evaluate_sdf(sdf: SDFSpec, grid: Grid, mc_draws: Optional[int], seed: int) -> Tuple[FloatArray, float]:
    """SDF on all (xᵢ, xⱼ) pairs, integrating Y' by antithetic Monte Carlo when needed."""
    n = grid.n
    x = grid.points[:, None, :]
    x_next = grid.points[None, :, :]

    if sdf.shock_law is None:
        values = np.broadcast_to(sdf.evaluate(x, x_next, None), (n, n))
        return np.array(values), 0.0

    draws = mc_draws or DEFAULT_MC_DRAWS
    half = max(draws // 2, 1)
    z = child_rng(seed, Stream.MONTE_CARLO).standard_normal(half)
    z = np.concatenate([z, -z])[None, None, :]

    values = np.empty((n, n))
    stderr = np.empty((n, n))
    chunk = max(1, MC_CHUNK_ELEMENTS // (n * z.size))
    for start in range(0, n, chunk):
        rows = slice(start, min(start + chunk, n))
        xs = grid.points[rows][:, None, None, :]
        xn = grid.points[None, :, None, :]
        y = sdf.shock_law(xs, xn, z)
        sample = np.broadcast_to(sdf.evaluate(xs, xn, y), (xs.shape[0], n, z.shape[-1]))
        _check_nonnegative(sample.min(axis=-1), row_offset=start)
        # antithetic pairs are averaged before the standard error
        pairs = 0.5 * (sample[..., :half] + sample[..., half:])
        values[rows] = pairs.mean(axis=-1)
        stderr[rows] = pairs.std(axis=-1, ddof=1) / math.sqrt(half) if half > 1 else 0.0
    return values, float(stderr.max())


def _check_nonnegative(values: FloatArray, row_offset: int = 0) -> None:
    if np.any(~np.isfinite(values)) or np.any(values < 0):
        bad = np.argwhere(~np.isfinite(values) | (values < 0))[0]
        i, j = int(bad[0]) + row_offset, int(bad[1])
        raise NegativeSDF(
            f"SDF is negative or not finite at grid pair ({i}, {j}); positivity of m is required",
            {"row": i, "col": j, "value": float(values[bad[0], bad[1]])},
        )


def build_pricing_operator(
    model: StateModel,
    sdf: SDFSpec,
    grid: Grid,
    mc_draws: Optional[int] = None,
    *,
    seed: int = 0,
    strict_hull: bool = False,
) -> DiscreteOperator:
    """Discretize the pricing operator of ``sdf`` under ``model`` on ``grid``.

    Args:
        model: State model the grid was built for.
        sdf: Stochastic discount factor specification.
        grid: Stationary grid.
        mc_draws: Draws for the inner expectation over Y' (default 4096,
            used only when the SDF has a shock law).
        seed: Root seed for the Monte Carlo stream.
        strict_hull: Raise InterpolationOutOfRange instead of clamping stacked
            states that leave the grid hull.

    Returns:
        DiscreteOperator with declared structural support and construction meta.
    """
    transition = transition_matrix(model, grid, strict_hull=strict_hull)
    if transition.clamped_rows:
        logger.warning(
            f"⚠️  {transition.clamped_rows} of {grid.n} rows clamped at the grid hull",
            extra={"clamped_rows": transition.clamped_rows},
        )

    values, mc_stderr = _evaluate_sdf(sdf, grid, mc_draws, seed)
    _check_nonnegative(values)

    matrix = values * transition.matrix
    support = transition.support & (values > 0)
    meta: Dict[str, Any] = {
        "model": model.kind.value,
        "sdf": sdf.label,
        "sdf_params": dict(sdf.params),
        "grid": grid.label,
        "mc_draws": (mc_draws or DEFAULT_MC_DRAWS) if sdf.shock_law is not None else 0,
        "mc_stderr": mc_stderr,
        "clamped_rows": transition.clamped_rows,
        "degenerate_transition": transition_structure(model).degenerate,
    }
    logger.debug(f"built {sdf.label} operator on {grid.n} points", extra=meta)
    return DiscreteOperator(
        grid=grid,
        matrix=matrix,
        label=f"{sdf.label}/{model.kind.value}",
        support=support,
        meta=meta,
    )


def apply(op: DiscreteOperator, f: FloatArray) -> FloatArray:
    """(Tf)ᵢ = Σⱼ Mᵢⱼ fⱼ."""
    values = np.asarray(f, dtype=np.float64)
    if values.shape[:1] != (op.n,):
        raise DimensionMismatch(
            f"grid function has length {values.shape[0] if values.ndim else 0}, operator has {op.n} points",
            {"expected": op.n, "shape": list(values.shape)},
        )
    return op.matrix @ values


def _boolean_power(pattern: NDArray[np.bool_], n: int) -> NDArray[np.bool_]:
    base = pattern.astype(np.float64)
    acc = np.eye(pattern.shape[0])
    while n:
        if n & 1:
            acc = (acc @ base > 0).astype(np.float64)
        n >>= 1
        if n:
            base = (base @ base > 0).astype(np.float64)
    return acc > 0


def compose_n(op: DiscreteOperator, n: int) -> DiscreteOperator:
    """Tⁿ by repeated squaring."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    support = None if op.support is None else _boolean_power(op.support, n)
    matrix = op.matrix.copy() if n == 1 else np.linalg.matrix_power(op.matrix, n)
    return replace(
        op,
        matrix=matrix,
        label=f"{op.label}^{n}",
        support=support,
    )


def adjoint(op: DiscreteOperator) -> DiscreteOperator:
    """L²(Q) adjoint A = W⁻¹MᵀW, so Σ wᵢgᵢ(Mf)ᵢ = Σ wᵢ(Ag)ᵢfᵢ."""
    w = op.grid.weights
    if np.any(w <= 0):
        i = int(np.argmin(w))
        raise ZeroWeight(
            f"adjoint needs strictly positive weights; weight {i} is {w[i]}",
            {"index": i, "weight": float(w[i])},
        )
    matrix = (op.matrix.T * w[None, :]) / w[:, None]
    support = None if op.support is None else op.support.T
    return replace(op, matrix=matrix, label=f"adjoint({op.label})", support=support)


def clamp_roundoff(op: DiscreteOperator, atol: float = 1e-14) -> DiscreteOperator:
    """Zero out entries in [-atol, 0) left by floating-point roundoff."""
    if not np.any(op.matrix < 0):
        return op
    matrix = np.where((op.matrix < 0) & (op.matrix >= -atol), 0.0, op.matrix)
    return replace(op, matrix=matrix)


def hs_norm_from_matrix(op: DiscreteOperator, steps: int = 1) -> float:
    """Quadrature of ∫∫ kₙ(x, y)² dQ(x) dQ(y) with kₙ(xᵢ, xⱼ) = (Mⁿ)ᵢⱼ / wⱼ."""
    power = compose_n(op, steps).matrix
    w = op.grid.weights
    positive = w > 0
    if np.any(power[:, ~positive] != 0):
        raise ZeroWeight("n-step kernel puts mass on a zero-weight grid point")
    squared = power[:, positive] ** 2 / w[positive][None, :]
    return float(w @ squared.sum(axis=1))


def hs_integral(
    model: StateModel,
    sdf: SDFSpec,
    grid: Grid,
    steps: int,
    *,
    mc_draws: Optional[int] = None,
    seed: int = 0,
) -> Union[float, DegenerateFlag]:
    """Hilbert–Schmidt integral of the ``steps``-step pricing kernel, or DEGENERATE.

    The n-step kernel has a density with respect to Q only once every
    deterministic stacked coordinate has been refreshed by an innovation.
    """
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    structure = transition_structure(model)
    if steps < structure.density_horizon:
        return DEGENERATE
    op = build_pricing_operator(model, sdf, grid, mc_draws, seed=seed)
    return hs_norm_from_matrix(op, steps)


def save_operator(op: DiscreteOperator, directory: Path, stem: str = "operator") -> Tuple[Path, Path]:
    """Write ``<stem>.csv`` (matrix) and ``<stem>.json`` (grid, label, meta)."""
    directory.mkdir(parents=True, exist_ok=True)
    matrix_path = directory / f"{stem}.csv"
    sidecar_path = directory / f"{stem}.json"
    pd.DataFrame(op.matrix, columns=[f"c{j}" for j in range(op.n)]).to_csv(
        matrix_path, index=False, float_format="%.17g"
    )
    sidecar: Dict[str, Any] = {"label": op.label, "grid": op.grid.to_dict(), "meta": op.meta}
    if op.support is not None:
        # store whichever index list is shorter
        if op.support.mean() <= 0.5:
            sidecar["support_nonzero"] = np.argwhere(op.support).tolist()
        else:
            sidecar["support_zero"] = np.argwhere(~op.support).tolist()
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8")
    return matrix_path, sidecar_path


def load_operator(directory: Path, stem: str = "operator") -> DiscreteOperator:
    """Inverse of save_operator."""
    matrix = pd.read_csv(directory / f"{stem}.csv").to_numpy(dtype=np.float64)
    sidecar = json.loads((directory / f"{stem}.json").read_text(encoding="utf-8"))
    support = None
    if "support_nonzero" in sidecar:
        support = np.zeros(matrix.shape, dtype=bool)
        for i, j in sidecar["support_nonzero"]:
            support[i, j] = True
    elif "support_zero" in sidecar:
        support = np.ones(matrix.shape, dtype=bool)
        for i, j in sidecar["support_zero"]:
            support[i, j] = False
    return DiscreteOperator(
        grid=Grid.from_dict(sidecar["grid"]),
        matrix=matrix,
        label=sidecar["label"],
        support=support,
        meta=sidecar["meta"],
    )


def ccapm_reference(model: StateModel, sdf: SDFSpec) -> Optional[Tuple[float, float]]:
    """Closed-form (rho, b) when ``sdf`` is a shock-free C-CAPM on a Gaussian AR(1)."""
    if not isinstance(model, GaussianAR1) or sdf.label != "CCAPM" or sdf.shock_law is not None:
        return None
    return ccapm_ar1_oracle(sdf.params["beta"], sdf.params["gamma"], model.a, model.sigma)
