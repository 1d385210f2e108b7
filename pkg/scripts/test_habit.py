#!/usr/bin/env python3
"""
Tests for Habit Recovery
========================

Synthesized returns that make (1/β₀, h₀) an exact eigenpair are recovered
by recover_habit; invalid habit specifications are rejected.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent))

from lib.errors import InvalidModel, UniquenessFailed
from lib.habit import (
    HabitModel,
    build_habit_operator,
    check_habit_no_arbitrage,
    recover_habit,
    synthesize_consistent_returns,
)
from lib.models import Grid, Verdict
from lib.operator_core import DiscreteOperator
from lib.statemodels import GaussianAR1, StackedNAR, stationary_grid

GRID_POINTS = {1: 24, 2: 10}


def _exponential_habit(coefficients: np.ndarray):
    return lambda states: np.exp(np.asarray(states) @ coefficients)


def test_round_trip_recovers_beta_and_habit():
    """Ten seeded (h₀, β₀, γ) for ℓ ∈ {1, 2} come back from the Euler operator"""
    print("Testing habit round trip...")

    for ell in (1, 2):
        for seed in range(10):
            rng = np.random.default_rng(700 + 10 * ell + seed)
            gamma = float(rng.uniform(0.5, 4.0))
            beta0 = float(rng.uniform(0.9, 0.99))
            slopes = rng.uniform(-2.0, 2.0, size=ell)
            growth = StackedNAR.linear(tuple(rng.uniform(0.1, 0.4, size=ell) / ell), sigma=0.05)

            h0 = _exponential_habit(slopes)
            hm = synthesize_consistent_returns(h0, beta0, gamma, growth)
            grid = stationary_grid(growth, GRID_POINTS[ell], seed=seed)
            solution = recover_habit(build_habit_operator(hm, grid))

            assert abs(solution.beta / beta0 - 1.0) < 1e-6, f"ell={ell} seed={seed}"
            ratio = solution.h / h0(grid.points)
            assert ratio.max() / ratio.min() - 1.0 < 1e-4, f"ell={ell} seed={seed}"
            assert solution.uniqueness_certificate["positive_eigenvector_count"] == 1

    print("  ✓ Habit round-trip tests passed")


def test_round_trip_on_fine_grid():
    """32 points per axis (1024 stacked states for ℓ = 2) still recover β₀ and h₀"""
    print("Testing habit round trip on a fine grid...")

    for ell, coefficients, slopes in ((1, (0.3,), np.array([1.5])), (2, (0.25, 0.1), np.array([1.0, -0.7]))):
        growth = StackedNAR.linear(coefficients, sigma=0.05)
        grid = stationary_grid(growth, 32, seed=11)
        assert grid.n == 32**ell

        h0 = _exponential_habit(slopes)
        hm = synthesize_consistent_returns(h0, 0.96, 2.5, growth, grid)
        solution = recover_habit(build_habit_operator(hm, grid))

        assert abs(solution.beta / 0.96 - 1.0) < 1e-6, f"ell={ell}"
        ratio = solution.h / h0(grid.points)
        assert ratio.max() / ratio.min() - 1.0 < 1e-4, f"ell={ell}"
        assert solution.uniqueness_certificate["positive_eigenvector_count"] == 1

    print("  ✓ Fine-grid habit round-trip tests passed")


def test_tabulated_habit_function():
    """A grid-tabulated log-linear h₀ is interpolated exactly"""
    print("Testing tabulated h0...")

    growth = StackedNAR.linear((0.3,), sigma=0.05)
    grid = stationary_grid(growth, 24)
    h0 = np.exp(0.8 * grid.points[:, 0])

    hm = synthesize_consistent_returns(h0, 0.97, 2.0, growth, grid)
    solution = recover_habit(build_habit_operator(hm, grid))

    assert_allclose(solution.beta, 0.97, rtol=1e-6)
    ratio = solution.h / h0
    assert ratio.max() / ratio.min() - 1.0 < 1e-4
    assert solution.to_dict()["uniqueness"]["positive_eigenvector_count"] == 1
    assert list(solution.to_frame(grid).columns) == ["x0", "h"]

    print("  ✓ Tabulated h0 tests passed")


def test_invalid_habit_models():
    """Bad γ, growth model, lag, β₀ and h₀ raise InvalidModel"""
    print("Testing invalid habit models...")

    growth = StackedNAR.linear((0.4,), sigma=0.05)
    unit_return = lambda x, g: np.ones_like(np.asarray(g))

    with pytest.raises(InvalidModel):
        HabitModel(gamma=-1.0, growth_model=growth, return_fn=unit_return)
    with pytest.raises(InvalidModel):
        HabitModel(gamma=2.0, growth_model=GaussianAR1(a=0.4, sigma=0.05), return_fn=unit_return)  # type: ignore[arg-type]
    with pytest.raises(InvalidModel):
        HabitModel(gamma=2.0, growth_model=growth, return_fn=unit_return, ell=2)
    assert HabitModel(gamma=2.0, growth_model=growth, return_fn=unit_return).ell == 1

    with pytest.raises(InvalidModel):
        synthesize_consistent_returns(lambda s: np.ones(np.shape(s)[:-1]), 0.0, 2.0, growth)

    grid = stationary_grid(growth, 8)
    with pytest.raises(InvalidModel):
        synthesize_consistent_returns(np.ones(grid.n), 0.97, 2.0, growth)
    with pytest.raises(InvalidModel):
        synthesize_consistent_returns(-np.ones(grid.n), 0.97, 2.0, growth, grid)
    with pytest.raises(InvalidModel):
        synthesize_consistent_returns(np.ones(grid.n + 1), 0.97, 2.0, growth, grid)

    signed = lambda s: np.asarray(s)[..., 0]
    with pytest.raises(InvalidModel) as exc:
        synthesize_consistent_returns(signed, 0.97, 2.0, growth, grid)
    assert exc.value.witness["value"] <= 0
    assert grid.points[exc.value.witness["point"], 0] <= 0
    assert synthesize_consistent_returns(_exponential_habit(np.array([0.5])), 0.97, 2.0, growth, grid).label == "synthesized"

    negative_return = lambda x, g: -np.ones_like(np.asarray(g))
    hm = HabitModel(gamma=2.0, growth_model=growth, return_fn=negative_return)
    with pytest.raises(InvalidModel):
        build_habit_operator(hm, grid)

    print("  ✓ Invalid habit model tests passed")


def test_reducible_operator_fails_uniqueness():
    """Two closed classes give two nonnegative eigenvectors"""
    print("Testing uniqueness failure...")

    matrix = np.zeros((4, 4))
    matrix[:2, :2] = [[0.5, 0.4], [0.3, 0.6]]
    matrix[2:, 2:] = [[0.2, 0.3], [0.1, 0.3]]
    grid = Grid(points=np.arange(4, dtype=np.float64), weights=np.full(4, 0.25))

    with pytest.raises(UniquenessFailed) as exc:
        recover_habit(DiscreteOperator(grid=grid, matrix=matrix, label="blocks"))
    assert exc.value.count >= 2
    assert exc.value.witness["positive_eigenvector_count"] == exc.value.count

    print("  ✓ Uniqueness failure tests passed")


def test_habit_no_arbitrage():
    """Synthesized returns give a strictly positive habit SDF over ℓ steps"""
    print("Testing habit no-arbitrage check...")

    growth = StackedNAR.linear((0.3, 0.1), sigma=0.05)
    hm = synthesize_consistent_returns(_exponential_habit(np.array([0.5, -0.5])), 0.97, 2.0, growth)
    report = check_habit_no_arbitrage(hm, 300, seed=4)

    assert report.verdict is Verdict.PASS
    assert report.witness["windows"] == 300

    print("  ✓ Habit no-arbitrage tests passed")


def run_all_tests():
    """Run all tests and report results"""
    print("=" * 60)
    print("Running Habit Tests")
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
