#!/usr/bin/env python3
# pyright: strict
"""
Identification Condition Checkers
=================================

Each checker returns a ConditionReport with a Pass/Fail/Inconclusive verdict
and the witness that supports it. "a.e.-[Q]" statements are checked on every
grid point or every sample, and each report says so in its tolerance block.
"""

import logging
import math
from functools import reduce
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import sparse
from scipy.sparse import csgraph

from .models import ConditionId, ConditionReport, Grid, Verdict
from .operator_core import (
    DegenerateFlag,
    DiscreteOperator,
    SDFSpec,
    hs_integral,
    hs_norm_from_matrix,
)
from .pricing import bond_prices
from .statemodels import (
    DiscreteChain,
    StateModel,
    Stream,
    child_rng,
    simulate_path,
    stationary_grid,
    transition_matrix,
    transition_structure,
)

logger = logging.getLogger(__name__)

POSITIVITY_ATOL = 1e-14
PATTERN_RTOL = 1e-13
DEFAULT_N_MAX = 50
HS_CEILING = 1e12


def check_positivity(op: DiscreteOperator, atol: float = POSITIVITY_ATOL) -> ConditionReport:
    """Pass iff every matrix entry is ≥ -atol."""
    flat = int(np.argmin(op.matrix))
    i, j = divmod(flat, op.n)
    value = float(op.matrix[i, j])
    witness = {"location": [i, j], "min_entry": value}
    verdict = Verdict.PASS if value >= -atol else Verdict.FAIL
    return ConditionReport(
        condition_id=ConditionId.POSITIVITY,
        verdict=verdict,
        witness=witness,
        tolerance={"atol": atol},
        note="entries in [-atol, 0) are roundoff and get clamped to 0",
    )


def _boolean_step(current: NDArray[np.bool_], pattern: NDArray[np.bool_]) -> NDArray[np.bool_]:
    return (current.astype(np.float64) @ pattern.astype(np.float64)) > 0


def _cyclic_classes(pattern: NDArray[np.bool_]) -> Tuple[int, NDArray[np.int64]]:
    """Period of an irreducible pattern and the cyclic class of each state."""
    graph = sparse.csr_matrix(pattern)
    order, predecessors = csgraph.breadth_first_order(graph, 0, directed=True, return_predecessors=True)
    level = np.full(pattern.shape[0], -1, dtype=np.int64)
    level[0] = 0
    for node in order[1:]:
        level[node] = level[predecessors[node]] + 1
    rows, cols = np.nonzero(pattern)
    diffs = np.abs(level[rows] + 1 - level[cols])
    period = int(reduce(math.gcd, diffs.tolist(), 0))
    period = max(period, 1)
    return period, level % period


def _reducibility_witness(pattern: NDArray[np.bool_]) -> Optional[Dict[str, Any]]:
    """A pair (source, target) with target unreachable from source, or None."""
    graph = sparse.csr_matrix(pattern)
    n = pattern.shape[0]
    reach = csgraph.breadth_first_order(graph, 0, directed=True, return_predecessors=False)
    if reach.size < n:
        target = int(np.setdiff1d(np.arange(n), reach)[0])
        return {"source": 0, "unreachable": target}
    back = csgraph.breadth_first_order(graph.T.tocsr(), 0, directed=True, return_predecessors=False)
    if back.size < n:
        source = int(np.setdiff1d(np.arange(n), back)[0])
        return {"source": source, "unreachable": 0}
    return None


def check_eventual_strong_positivity(op: DiscreteOperator, n_max: int = DEFAULT_N_MAX) -> ConditionReport:
    """Primitivity of the zero/nonzero pattern.

    Pass with the smallest n ≤ n_max whose Boolean power is all-ones; Fail
    with a reducibility or cyclic-class witness; otherwise Inconclusive.
    """
    pattern = op.pattern(PATTERN_RTOL)
    tolerance = {"pattern_rtol": PATTERN_RTOL, "n_max": n_max, "declared_support": op.support is not None}

    unreachable = _reducibility_witness(pattern)
    if unreachable is not None:
        return ConditionReport(
            condition_id=ConditionId.EVENTUAL_STRONG_POSITIVITY,
            verdict=Verdict.FAIL,
            witness={"reducible": True, **unreachable},
            tolerance=tolerance,
            note="pattern is reducible",
        )

    period, classes = _cyclic_classes(pattern)
    if period > 1:
        return ConditionReport(
            condition_id=ConditionId.EVENTUAL_STRONG_POSITIVITY,
            verdict=Verdict.FAIL,
            witness={
                "period": period,
                "cyclic_classes": [np.flatnonzero(classes == c).tolist() for c in range(period)],
            },
            tolerance=tolerance,
            note=f"pattern is periodic with period {period}",
        )

    power = pattern.copy()
    for n in range(1, n_max + 1):
        if power.all():
            return ConditionReport(
                condition_id=ConditionId.EVENTUAL_STRONG_POSITIVITY,
                verdict=Verdict.PASS,
                witness={"n": n},
                tolerance=tolerance,
            )
        power = _boolean_step(power, pattern)

    return ConditionReport(
        condition_id=ConditionId.EVENTUAL_STRONG_POSITIVITY,
        verdict=Verdict.INCONCLUSIVE,
        witness={"zero_entries_at_n_max": int((~power).sum())},
        tolerance=tolerance,
        note="pattern is primitive but n_max is below its exponent",
    )


def check_irreducibility_markov(model: StateModel, grid: Grid, n_max: int = DEFAULT_N_MAX) -> ConditionReport:
    """Reachability of every grid cell S: some n(S) ≤ n_max hits S from every state."""
    pattern = transition_matrix(model, grid).support
    tolerance = {"n_max": n_max, "cells": "singleton grid indices"}

    unreachable = _reducibility_witness(pattern)
    if unreachable is not None:
        return ConditionReport(
            condition_id=ConditionId.IRREDUCIBILITY,
            verdict=Verdict.FAIL,
            witness={"cell": unreachable["unreachable"], "unreachable_from": unreachable["source"]},
            tolerance=tolerance,
            note=f"cell {unreachable['unreachable']} is unreachable from state {unreachable['source']}",
        )

    period, classes = _cyclic_classes(pattern)
    if period > 1:
        return ConditionReport(
            condition_id=ConditionId.IRREDUCIBILITY,
            verdict=Verdict.FAIL,
            witness={"period": period, "cell": int(np.flatnonzero(classes == 1)[0])},
            tolerance=tolerance,
            note="periodic chain: no single horizon reaches a cell from every state",
        )

    n_by_cell = np.zeros(grid.n, dtype=np.int64)
    power = pattern.copy()
    for n in range(1, n_max + 1):
        newly = (n_by_cell == 0) & power.all(axis=0)
        n_by_cell[newly] = n
        if np.all(n_by_cell > 0):
            return ConditionReport(
                condition_id=ConditionId.IRREDUCIBILITY,
                verdict=Verdict.PASS,
                witness={"max_n": int(n_by_cell.max()), "n_by_cell": n_by_cell.tolist()},
                tolerance=tolerance,
            )
        power = _boolean_step(power, pattern)

    return ConditionReport(
        condition_id=ConditionId.IRREDUCIBILITY,
        verdict=Verdict.INCONCLUSIVE,
        witness={"uncertified_cells": int(np.sum(n_by_cell == 0))},
        tolerance=tolerance,
        note="n_max too small to certify every cell",
    )


def check_no_arbitrage_sufficient(
    sdf: SDFSpec,
    model: StateModel,
    n: int,
    samples: int,
    seed: int,
) -> ConditionReport:
    """Sampled check that products of n consecutive SDFs are strictly positive.

    Sufficient for no-arbitrage, not necessary.
    """
    if samples < 1:
        raise ValueError(f"samples must be at least 1, got {samples}")
    path = simulate_path(model, seed, samples + n - 1)
    x, x_next = path.states[:-1], path.states[1:]
    y = None
    if sdf.shock_law is not None:
        z = child_rng(seed, Stream.WINDOWS).standard_normal(x.shape[0])
        y = sdf.shock_law(x, x_next, z)
    factors = sdf.evaluate(x, x_next, y)

    windows = np.lib.stride_tricks.sliding_window_view(factors, n)[:samples]
    positive = np.all(windows > 0, axis=1) & np.all(np.isfinite(windows), axis=1)
    tolerance = {"samples": samples, "window": n, "seed": seed}

    if not positive.all():
        start = int(np.flatnonzero(~positive)[0])
        return ConditionReport(
            condition_id=ConditionId.NO_ARBITRAGE_SUFFICIENT,
            verdict=Verdict.FAIL,
            witness={
                "window_start": start,
                "states": path.states[start : start + n + 1].tolist(),
                "factors": windows[start].tolist(),
            },
            tolerance=tolerance,
        )

    log_products = np.log(windows).sum(axis=1)
    return ConditionReport(
        condition_id=ConditionId.NO_ARBITRAGE_SUFFICIENT,
        verdict=Verdict.PASS,
        witness={"windows": samples, "min_log_product": float(log_products.min())},
        tolerance=tolerance,
        note="sufficient condition only",
    )


def _refinement_resolutions(grid: Grid) -> List[int]:
    full = grid.resolution
    return sorted({max(2, full // 4), max(2, full // 2), full})


def _diverges(values: Sequence[float]) -> bool:
    if len(values) < 3:
        return False
    return all(b >= 2.0 * a for a, b in zip(values, values[1:]))


def check_power_compactness(
    model: StateModel,
    sdf: SDFSpec,
    grid: Grid,
    ell: int,
    ceiling: float = HS_CEILING,
    *,
    seed: int = 0,
) -> ConditionReport:
    """Finite Hilbert–Schmidt quadrature of some Tₕ, h ≤ ℓ, stable under refinement.

    Horizons are tried in order; the first stable one passes. Fail only when
    every horizon with a density failed.
    """
    tolerance = {"ceiling": ceiling, "blow_up_factor": 2.0}
    degenerate: List[int] = []
    failed: List[Dict[str, Any]] = []

    for horizon in range(1, ell + 1):
        value = hs_integral(model, sdf, grid, horizon, seed=seed)
        if isinstance(value, DegenerateFlag):
            degenerate.append(horizon)
            continue

        refinement: List[float] = []
        if not isinstance(model, DiscreteChain):
            for resolution in _refinement_resolutions(grid)[:-1]:
                coarse = stationary_grid(model, resolution, seed=seed)
                coarse_value = hs_integral(model, sdf, coarse, horizon, seed=seed)
                assert not isinstance(coarse_value, DegenerateFlag)
                refinement.append(coarse_value)
        refinement.append(value)

        if not math.isfinite(value) or value > ceiling or _diverges(refinement):
            logger.warning(f"⚠️  HS quadrature unstable at horizon {horizon}: {refinement}")
            failed.append({"horizon": horizon, "value": value, "refinement": refinement})
            continue

        witness: Dict[str, Any] = {
            "horizon": horizon,
            "value": value,
            "refinement": refinement,
            "degenerate_horizons": degenerate,
            "failed_horizons": failed,
        }
        return ConditionReport(
            condition_id=ConditionId.POWER_COMPACTNESS,
            verdict=Verdict.PASS,
            witness=witness,
            tolerance=tolerance,
        )

    if failed:
        return ConditionReport(
            condition_id=ConditionId.POWER_COMPACTNESS,
            verdict=Verdict.FAIL,
            witness={"degenerate_horizons": degenerate, "failed_horizons": failed},
            tolerance=tolerance,
            note="value above ceiling or blowing up under grid refinement at every horizon",
        )
    return ConditionReport(
        condition_id=ConditionId.POWER_COMPACTNESS,
        verdict=Verdict.INCONCLUSIVE,
        witness={"degenerate_horizons": degenerate},
        tolerance=tolerance,
        note=f"no conditional density up to horizon {ell}",
    )


def check_yield_nondegeneracy(op: DiscreteOperator, n_max: int = 200) -> ConditionReport:
    """Uniform yield bound yₙ(x) ≤ C and the induced Tⁿ1 ≥ (1+C)^{-n}."""
    prices = bond_prices(op, n_max)
    horizons = np.arange(1, n_max + 1)
    yields = prices ** (-1.0 / horizons[:, None]) - 1.0
    bound = float(yields.max())
    tolerance = {"n_max": n_max}

    if not math.isfinite(bound):
        return ConditionReport(
            condition_id=ConditionId.YIELD_NON_DEGENERACY,
            verdict=Verdict.FAIL,
            witness={"max_yield": bound},
            tolerance=tolerance,
        )

    delta = (1.0 + bound) ** (-horizons.astype(np.float64))
    # relative slack for the rounding in the yield inversion
    dominates = bool(np.all(prices >= delta[:, None] * (1.0 - 1e-12)))
    return ConditionReport(
        condition_id=ConditionId.YIELD_NON_DEGENERACY,
        verdict=Verdict.PASS if dominates else Verdict.FAIL,
        witness={"C": bound, "rho_lower_bound": 1.0 / (1.0 + bound), "lower_bound_holds": dominates},
        tolerance=tolerance,
    )


def detect_degenerate_transition(model: StateModel) -> ConditionReport:
    """Flag stacked states whose one-step law has deterministic coordinates.

    Non-compactness of the one-step operator is an infinite-dimensional
    statement, so a flagged model is reported Inconclusive with the witness.
    """
    structure = transition_structure(model)
    if not structure.degenerate:
        return ConditionReport(
            condition_id=ConditionId.DEGENERATE_TRANSITION,
            verdict=Verdict.PASS,
            witness={"flagged": False, "deterministic_coordinates": 0, "transition": structure.description},
            tolerance={},
        )
    return ConditionReport(
        condition_id=ConditionId.DEGENERATE_TRANSITION,
        verdict=Verdict.INCONCLUSIVE,
        witness={
            "flagged": True,
            "deterministic_coordinates": structure.deterministic_coordinates,
            "one_step_hs": DegenerateFlag.DEGENERATE.value,
            "density_horizon": structure.density_horizon,
            "transition": structure.description,
        },
        tolerance={},
        note="one-step operator cannot be Hilbert–Schmidt; use the power-compactness route",
    )


def check_kernel_positivity_ab(op: DiscreteOperator, ceiling: float = HS_CEILING) -> ConditionReport:
    """Comparison conditions: (a) strictly positive one-step kernel, (b) finite one-step HS norm."""
    pattern = op.pattern(PATTERN_RTOL)
    tolerance = {"pattern_rtol": PATTERN_RTOL, "ceiling": ceiling}
    if not pattern.all():
        i, j = (int(v) for v in np.argwhere(~pattern)[0])
        return ConditionReport(
            condition_id=ConditionId.KERNEL_POSITIVITY_AB,
            verdict=Verdict.FAIL,
            witness={"condition": "a", "zero_entry": [i, j], "zero_entries": int((~pattern).sum())},
            tolerance=tolerance,
        )
    hs = hs_norm_from_matrix(op, 1)
    if not math.isfinite(hs) or hs > ceiling:
        return ConditionReport(
            condition_id=ConditionId.KERNEL_POSITIVITY_AB,
            verdict=Verdict.FAIL,
            witness={"condition": "b", "hs": hs},
            tolerance=tolerance,
        )
    return ConditionReport(
        condition_id=ConditionId.KERNEL_POSITIVITY_AB,
        verdict=Verdict.PASS,
        witness={"strictly_positive": True, "hs": hs},
        tolerance=tolerance,
    )


def render_table(reports: Sequence[ConditionReport]) -> str:
    """Aggregate human-readable verdict table."""
    marks = {Verdict.PASS: "✓", Verdict.FAIL: "❌", Verdict.INCONCLUSIVE: "⚠️"}
    width = max([len(r.condition_id.value) for r in reports] + [len("Condition")])
    lines = [f"{'Condition':<{width}}  Verdict        Witness", "-" * (width + 40)]
    for report in reports:
        summary = ", ".join(
            f"{k}={v}" for k, v in report.witness.items() if not isinstance(v, (list, dict))
        )
        verdict = f"{marks[report.verdict]} {report.verdict.value}"
        lines.append(f"{report.condition_id.value:<{width}}  {verdict:<13}  {summary}")
    return "\n".join(lines)
