#!/usr/bin/env python3
"""
Tests for Identification Condition Checkers
===========================================

Each checker is exercised on a case that passes and a case that fails
with the expected witness.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent))

from lib.conditions import (
    check_eventual_strong_positivity,
    check_irreducibility_markov,
    check_kernel_positivity_ab,
    check_no_arbitrage_sufficient,
    check_positivity,
    check_power_compactness,
    check_yield_nondegeneracy,
    detect_degenerate_transition,
    render_table,
)
from lib.errors import ZeroBondPrice
from lib.models import FINITE_PROXY_NOTE, ConditionId, Grid, Verdict
from lib.operator_core import DiscreteOperator, SDFSpec, build_pricing_operator, ccapm_sdf, constant_sdf, unit_sdf
from lib.spectral import dominant_eigenpair, full_spectrum_oracle, verify_theorem_conclusions
from lib.statemodels import DiscreteChain, GaussianAR1, StackedNAR, stationary_grid


def _operator(matrix: np.ndarray) -> DiscreteOperator:
    n = matrix.shape[0]
    grid = Grid(points=np.arange(n, dtype=np.float64), weights=np.full(n, 1.0 / n))
    return DiscreteOperator(grid=grid, matrix=matrix, label="pattern")


def test_positivity():
    """Roundoff negatives pass, real negatives fail with their location"""
    print("Testing positivity...")

    ok = check_positivity(_operator(np.array([[1.0, -1e-16], [0.5, 0.5]])))
    assert ok.verdict is Verdict.PASS
    assert ok.tolerance["finite_proxy"] == FINITE_PROXY_NOTE

    bad = check_positivity(_operator(np.array([[1.0, 0.0], [-1e-3, 0.5]])))
    assert bad.verdict is Verdict.FAIL
    assert bad.witness["location"] == [1, 0]
    assert bad.witness["min_entry"] == -1e-3

    print("  ✓ Positivity tests passed")


def test_eventual_strong_positivity():
    """Primitive, periodic, reducible and slow-mixing patterns"""
    print("Testing eventual strong positivity...")

    primitive = check_eventual_strong_positivity(_operator(np.array([[0.0, 1.0], [1.0, 1.0]])))
    assert primitive.verdict is Verdict.PASS
    assert primitive.witness["n"] == 2

    cycle = check_eventual_strong_positivity(_operator(np.roll(np.eye(3), 1, axis=1)))
    assert cycle.verdict is Verdict.FAIL
    assert cycle.witness["period"] == 3
    assert sorted(sum(cycle.witness["cyclic_classes"], [])) == [0, 1, 2]

    reducible = check_eventual_strong_positivity(_operator(np.array([[1.0, 1.0], [0.0, 1.0]])))
    assert reducible.verdict is Verdict.FAIL
    assert reducible.witness["reducible"]

    # Wielandt pattern: primitive with exponent (n-1)² + 1 = 10
    wielandt = np.zeros((4, 4))
    for i in range(3):
        wielandt[i, i + 1] = 1.0
    wielandt[3, 0] = wielandt[3, 1] = 1.0
    slow = check_eventual_strong_positivity(_operator(wielandt), n_max=3)
    assert slow.verdict is Verdict.INCONCLUSIVE
    assert check_eventual_strong_positivity(_operator(wielandt), n_max=10).witness["n"] == 10

    print("  ✓ Eventual strong positivity tests passed")


def _random_sparse_operator(seed: int, n: int = 8, density: float = 0.4) -> DiscreteOperator:
    rng = np.random.default_rng(seed)
    matrix = rng.random((n, n)) * (rng.random((n, n)) < density)
    weights = rng.random(n) + 0.1
    grid = Grid(points=np.arange(n, dtype=np.float64), weights=weights / weights.sum())
    return DiscreteOperator(grid=grid, matrix=matrix, label=f"sparse-{seed}")


def test_eventual_strong_positivity_is_monotone():
    """Once the n-th Boolean power is all-ones every later power is too"""
    print("Testing eventual strong positivity monotonicity...")

    passed = 0
    for seed in range(60):
        op = _random_sparse_operator(seed)
        report = check_eventual_strong_positivity(op)
        if report.verdict is not Verdict.PASS:
            continue
        passed += 1
        n = report.witness["n"]
        pattern = (op.matrix > 0).astype(np.float64)
        if n > 1:
            assert not np.all(np.linalg.matrix_power(pattern, n - 1) > 0), f"seed {seed}"
        for later in range(n, n + 4):
            assert np.all(np.linalg.matrix_power(pattern, later) > 0), f"seed {seed} power {later}"
    assert passed >= 10

    print("  ✓ Monotonicity tests passed")


def test_eventual_strong_positivity_implies_theorem():
    """Every pattern that passes the check also passes the dense-spectrum conclusions"""
    print("Testing eventual strong positivity against the theorem...")

    passed = 0
    for seed in range(60):
        op = _random_sparse_operator(seed)
        if check_eventual_strong_positivity(op).verdict is not Verdict.PASS:
            continue
        passed += 1
        theorem = verify_theorem_conclusions(op, dominant_eigenpair(op), strict=False)
        assert theorem.passed, f"seed {seed}: {theorem.assertions}"
    assert passed >= 10

    print("  ✓ Theorem implication tests passed")


def test_yield_bound_limits_rho():
    """A uniform yield bound C forces ρ ≥ 1/(1+C)"""
    print("Testing the yield bound on ρ...")

    model = GaussianAR1(a=0.5, sigma=0.1)
    ccapm = build_pricing_operator(model, ccapm_sdf(0.98, 2.0), stationary_grid(model, 32))
    chain = DiscreteChain(transition=np.array([[0.7, 0.2, 0.1], [0.3, 0.4, 0.3], [0.1, 0.2, 0.7]]), states=np.array([-0.02, 0.0, 0.02]))
    discounted = build_pricing_operator(chain, ccapm_sdf(0.95, 3.0), stationary_grid(chain))

    for op in (ccapm, discounted):
        report = check_yield_nondegeneracy(op, 100)
        assert report.verdict is Verdict.PASS
        rho = dominant_eigenpair(op).rho
        assert rho >= (1.0 - 1e-12) / (1.0 + report.witness["C"]), op.label

    print("  ✓ Yield bound tests passed")


def test_identity_operator():
    """The identity has every vector as an eigenvector: no unique positive eigenfunction"""
    print("Testing the identity operator...")

    op = _operator(np.eye(4))
    esp = check_eventual_strong_positivity(op)
    assert esp.verdict is Verdict.FAIL
    assert esp.witness["reducible"]

    report = full_spectrum_oracle(op)
    assert report.positive_eigenvector_count > 1
    assert not report.is_simple

    pair = dominant_eigenpair(op)
    assert_allclose(pair.rho, 1.0, rtol=1e-14)
    theorem = verify_theorem_conclusions(op, pair, strict=False)
    assert not theorem.assertions["b"]
    assert not theorem.assertions["c"]

    print("  ✓ Identity operator tests passed")


def test_irreducibility_markov_chains():
    """Aperiodic chains pass; periodic and transient chains fail with a cell witness"""
    print("Testing Markov irreducibility...")

    aperiodic = DiscreteChain(transition=np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]))
    report = check_irreducibility_markov(aperiodic, stationary_grid(aperiodic))
    assert report.verdict is Verdict.PASS
    assert report.witness["max_n"] == 2

    cycle = DiscreteChain(transition=np.roll(np.eye(3), 1, axis=1))
    report = check_irreducibility_markov(cycle, stationary_grid(cycle))
    assert report.verdict is Verdict.FAIL
    assert report.witness["period"] == 3

    transient = DiscreteChain(transition=np.array([[0.5, 0.5], [0.0, 1.0]]))
    report = check_irreducibility_markov(transient, stationary_grid(transient))
    assert report.verdict is Verdict.FAIL
    assert report.witness == {"cell": 0, "unreachable_from": 1}

    print("  ✓ Markov irreducibility tests passed")


def test_stacked_ar2_identification_route():
    """Stacked AR(2) operators: cells reached by n = 2, pattern primitive at n = 2, conclusions hold"""
    print("Testing the stacked AR(2) identification route...")

    sdf = ccapm_sdf(0.98, 2.0)
    for seed in range(20):
        rng = np.random.default_rng(300 + seed)
        coefficients = (float(rng.uniform(0.1, 0.5)), float(rng.uniform(-0.2, 0.2)))
        model = StackedNAR.linear(coefficients, sigma=float(rng.uniform(0.05, 0.2)))
        grid = stationary_grid(model, 10, seed=seed)
        op = build_pricing_operator(model, sdf, grid)

        irreducible = check_irreducibility_markov(model, grid)
        assert irreducible.verdict is Verdict.PASS, f"seed {seed}"
        assert irreducible.witness["max_n"] <= 2

        esp = check_eventual_strong_positivity(op)
        assert esp.verdict is Verdict.PASS, f"seed {seed}"
        assert esp.witness["n"] == 2

        theorem = verify_theorem_conclusions(op, dominant_eigenpair(op))
        assert theorem.passed, f"seed {seed}: {theorem.assertions}"

    print("  ✓ Stacked AR(2) identification tests passed")


def test_degenerate_transition_and_kernel_positivity():
    """Stacked states fail the strictly-positive-kernel route but are only flagged as degenerate"""
    print("Testing degenerate transitions...")

    stacked = StackedNAR.linear((0.5, 0.2), sigma=0.1)
    flagged = detect_degenerate_transition(stacked)
    assert flagged.verdict is Verdict.INCONCLUSIVE
    assert flagged.witness["flagged"]
    assert flagged.witness["density_horizon"] == 2

    ar1 = GaussianAR1(a=0.5, sigma=0.1)
    assert detect_degenerate_transition(ar1).verdict is Verdict.PASS

    grid = stationary_grid(stacked, 8, seed=1)
    report = check_kernel_positivity_ab(build_pricing_operator(stacked, constant_sdf(0.98), grid))
    assert report.verdict is Verdict.FAIL
    assert report.witness["condition"] == "a"

    ar1_grid = stationary_grid(ar1, 32)
    report = check_kernel_positivity_ab(build_pricing_operator(ar1, constant_sdf(0.98), ar1_grid))
    assert report.verdict is Verdict.PASS
    assert_allclose(report.witness["hs"], 0.98**2 / (1.0 - 0.25), rtol=1e-4)

    print("  ✓ Degenerate transition tests passed")


def test_power_compactness():
    """Finite two-step HS on stacked states; divergence for a heavy-tailed SDF"""
    print("Testing power compactness...")

    stacked = StackedNAR.linear((0.5, 0.2), sigma=0.1)
    grid = stationary_grid(stacked, 16, seed=2)
    report = check_power_compactness(stacked, constant_sdf(0.98), grid, ell=2, seed=2)
    assert report.verdict is Verdict.PASS
    assert report.witness["horizon"] == 2
    assert report.witness["degenerate_horizons"] == [1]

    one_step = check_power_compactness(stacked, constant_sdf(0.98), grid, ell=1, seed=2)
    assert one_step.verdict is Verdict.INCONCLUSIVE

    ar1 = GaussianAR1(a=0.5, sigma=0.1)
    heavy = SDFSpec(m=lambda x, xn, y: np.exp(np.asarray(xn)[..., 0] ** 2 / (4 * 0.1**2)), label="heavy")
    report = check_power_compactness(ar1, heavy, stationary_grid(ar1, 64), ell=1)
    assert report.verdict is Verdict.FAIL

    print("  ✓ Power compactness tests passed")


def test_power_compactness_passes_at_later_horizon():
    """A horizon above the ceiling is recorded and the next stable horizon passes"""
    print("Testing power compactness across horizons...")

    # HS values of a Gaussian AR(1) with unit SDF: 1/(1-a²) at one step, 1/(1-a⁴) at two
    ar1 = GaussianAR1(a=0.9, sigma=0.1)
    grid = stationary_grid(ar1, 64)
    one_step, two_step = 1.0 / (1.0 - 0.9**2), 1.0 / (1.0 - 0.9**4)
    ceiling = 0.5 * (one_step + two_step)

    report = check_power_compactness(ar1, unit_sdf(), grid, ell=2, ceiling=ceiling)
    assert report.verdict is Verdict.PASS
    assert report.witness["horizon"] == 2
    assert_allclose(report.witness["value"], two_step, rtol=1e-2)
    assert [f["horizon"] for f in report.witness["failed_horizons"]] == [1]
    assert report.witness["failed_horizons"][0]["value"] > ceiling

    only_first = check_power_compactness(ar1, unit_sdf(), grid, ell=1, ceiling=ceiling)
    assert only_first.verdict is Verdict.FAIL
    assert [f["horizon"] for f in only_first.witness["failed_horizons"]] == [1]

    print("  ✓ Later-horizon power compactness tests passed")


def test_no_arbitrage_sufficient():
    """Strictly positive SDFs pass; an SDF that hits zero fails with the window"""
    print("Testing the no-arbitrage sufficient condition...")

    ar1 = GaussianAR1(a=0.5, sigma=0.1)
    report = check_no_arbitrage_sufficient(ccapm_sdf(0.98, 2.0), ar1, 3, 500, seed=1)
    assert report.verdict is Verdict.PASS
    assert report.witness["windows"] == 500

    chain = DiscreteChain(transition=np.full((3, 3), 1.0 / 3), states=np.array([-1.0, 0.0, 1.0]))
    floor = SDFSpec(m=lambda x, xn, y: np.maximum(np.asarray(xn)[..., 0], 0.0), label="floor")
    report = check_no_arbitrage_sufficient(floor, chain, 2, 200, seed=1)
    assert report.verdict is Verdict.FAIL
    assert min(report.witness["factors"]) == 0.0

    print("  ✓ No-arbitrage sufficient condition tests passed")


def test_yield_nondegeneracy():
    """Constant discounting gives C = 1/β - 1; a dead row raises ZeroBondPrice"""
    print("Testing yield non-degeneracy...")

    chain = DiscreteChain(transition=np.array([[0.9, 0.1], [0.3, 0.7]]))
    op = build_pricing_operator(chain, constant_sdf(0.98), stationary_grid(chain))
    report = check_yield_nondegeneracy(op, 50)
    assert report.verdict is Verdict.PASS
    assert_allclose(report.witness["C"], 1.0 / 0.98 - 1.0, rtol=1e-10)

    dead = _operator(np.array([[0.5, 0.5], [0.0, 0.0]]))
    with pytest.raises(ZeroBondPrice) as exc:
        check_yield_nondegeneracy(dead, 10)
    assert exc.value.witness == {"horizon": 1, "point": 1}

    print("  ✓ Yield non-degeneracy tests passed")


def test_render_table():
    """The aggregate table has one row per report"""
    print("Testing render_table...")

    reports = [
        check_positivity(_operator(np.ones((2, 2)))),
        detect_degenerate_transition(StackedNAR.linear((0.5, 0.2), sigma=0.1)),
    ]
    table = render_table(reports)
    assert ConditionId.POSITIVITY.value in table
    assert ConditionId.DEGENERATE_TRANSITION.value in table
    assert len(table.splitlines()) == 2 + len(reports)
    assert all("finite_proxy" in r.to_dict()["tolerance"] for r in reports)

    print("  ✓ render_table tests passed")


def run_all_tests():
    """Run all tests and report results"""
    print("=" * 60)
    print("Running Condition Checker Tests")
    print("=" * 60)
    print()

    tests = [value for name, value in sorted(globals().items()) if name.startswith("test_")]

    passed = 0
    failed = 0

    for test in tests:
        try:
            test()
            passed += 1
        except AssertionError as e:
            print(f"  ✗ Test failed: {e}")
            failed += 1
        except Exception as e:
            print(f"  ✗ Test error: {e}")
            failed += 1

    print()
    print("=" * 60)
    print(f"Test Results: {passed} passed, {failed} failed")
    print("=" * 60)

    return 0 if failed == 0 else 1


if __name__ == "__main__":
    sys.exit(run_all_tests())
