#!/usr/bin/env python3
"""
Tests for the Eigen-Solver and Spectrum Oracle
==============================================

Power iteration against closed forms and the dense eigendecomposition,
the nonnegative-eigenvector census and the five theorem conclusions.
"""

import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent))

from lib.errors import ConclusionViolated, NoConvergence, NonPositiveIterate, TooLarge
from lib.models import Eigenpair, Grid
from lib.operator_core import (
    DiscreteOperator,
    apply,
    build_pricing_operator,
    ccapm_ar1_oracle,
    ccapm_sdf,
    exponential_affine_sdf,
)
from lib.pricing import fitted_log_rate
from lib.spectral import dominant_eigenpair, full_spectrum_oracle, verify_theorem_conclusions
from lib.statemodels import GaussianAR1, OUSkeleton, stationary_grid


def _operator(matrix: np.ndarray, weights: Optional[np.ndarray] = None) -> DiscreteOperator:
    n = matrix.shape[0]
    w = np.full(n, 1.0 / n) if weights is None else weights / weights.sum()
    grid = Grid(points=np.arange(n, dtype=np.float64), weights=w, label="index")
    return DiscreteOperator(grid=grid, matrix=matrix, label="test")


def _central_mask(grid: Grid, mass: float = 0.9) -> np.ndarray:
    x = grid.points[:, 0]
    order = np.argsort(x)
    cumulative = np.cumsum(grid.weights[order])
    tail = (1.0 - mass) / 2
    mask = np.zeros(grid.n, dtype=bool)
    mask[order[(cumulative >= tail) & (cumulative <= 1.0 - tail)]] = True
    return mask


def test_ccapm_matches_affine_oracle():
    """64-point Gauss–Hermite C-CAPM eigenpair matches the closed form"""
    print("Testing C-CAPM against the affine oracle...")

    beta, gamma, a, sigma = 0.98, 2.0, 0.5, 0.1
    model = GaussianAR1(a=a, sigma=sigma)
    grid = stationary_grid(model, 64)
    op = build_pricing_operator(model, ccapm_sdf(beta, gamma), grid)
    pair = dominant_eigenpair(op)

    rho, b = ccapm_ar1_oracle(beta, gamma, a, sigma)
    assert_allclose(rho, 0.98 * np.exp(0.08), rtol=1e-15)
    assert abs(pair.rho / rho - 1.0) < 1e-3

    central = _central_mask(grid)
    ratio = pair.phi[central] / np.exp(b * grid.points[central, 0])
    assert ratio.max() / ratio.min() - 1.0 < 1e-2

    # normalization Σwφ² = 1 and Σwφφ* = 1
    assert_allclose(grid.inner(pair.phi, pair.phi), 1.0, rtol=1e-12)
    assert_allclose(grid.inner(pair.phi, pair.phi_star), 1.0, rtol=1e-12)
    assert_allclose(pair.gap, 0.5, atol=1e-3)

    print("  ✓ Affine oracle tests passed")


def test_random_positive_matrices_agree_with_dense_oracle():
    """Power iteration and the dense oracle agree on 100 seeded positive matrices"""
    print("Testing the finite Perron–Frobenius suite...")

    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = (5, 20, 50)[seed % 3]
        op = _operator(rng.random((n, n)) + 1e-3, rng.random(n) + 0.1)

        pair = dominant_eigenpair(op)
        report = full_spectrum_oracle(op)
        assert abs(pair.rho / report.spectral_radius - 1.0) < 1e-8, f"seed {seed}"
        assert report.positive_eigenvector_count == 1, f"seed {seed}"
        assert report.adjoint_positive_eigenvector_count == 1, f"seed {seed}"

        theorem = verify_theorem_conclusions(op, pair)
        assert theorem.passed, f"seed {seed}: {theorem.assertions}"

    print("  ✓ Perron–Frobenius suite passed")


def test_reducible_matrices_violate_conclusions():
    """Block-diagonal matrices have two nonnegative eigenvectors"""
    print("Testing reducible matrices...")

    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        k = int(rng.integers(2, 10))
        block_a = rng.random((k, k)) + 0.01
        block_b = 0.5 * (rng.random((k, k)) + 0.01)
        matrix = np.zeros((2 * k, 2 * k))
        matrix[:k, :k] = block_a
        matrix[k:, k:] = block_b
        op = _operator(matrix)

        report = full_spectrum_oracle(op)
        assert report.positive_eigenvector_count >= 2, f"seed {seed}"

        pair = Eigenpair(
            rho=report.spectral_radius,
            phi=np.ones(2 * k),
            phi_star=np.ones(2 * k),
            gap=0.0,
            residual=0.0,
        )
        with pytest.raises(ConclusionViolated) as exc:
            verify_theorem_conclusions(op, pair)
        assert not exc.value.report.assertions["b"]

    print("  ✓ Reducible matrix tests passed")


def test_periodic_matrix_has_several_eigenvalues_on_the_circle():
    """A scaled 3-cycle puts three eigenvalues on the spectral circle"""
    print("Testing periodic matrix...")

    cycle = 0.95 * np.roll(np.eye(3), 1, axis=1)
    op = _operator(cycle)
    pair = dominant_eigenpair(op)
    assert_allclose(pair.rho, 0.95, rtol=1e-14)

    theorem = verify_theorem_conclusions(op, pair, strict=False)
    assert not theorem.passed
    assert not theorem.assertions["e"]
    assert len(theorem.witness["on_circle"]) == 3

    print("  ✓ Periodic matrix tests passed")


def test_gap_estimate_matches_dense_gap():
    """Weakly coupled positive blocks have a real second eigenvalue that the gap estimate finds"""
    print("Testing gap estimate...")

    for seed in range(10):
        rng = np.random.default_rng(2000 + seed)
        k = 8
        eps = 0.1
        blocks = [rng.random((k, k)) + 0.01 for _ in range(4)]
        blocks = [b / b.sum(axis=1, keepdims=True) for b in blocks]
        matrix = np.block([[(1 - eps) * blocks[0], eps * blocks[1]], [eps * blocks[2], (1 - eps) * blocks[3]]])
        op = _operator(matrix)

        pair = dominant_eigenpair(op)
        report = full_spectrum_oracle(op)
        assert_allclose(pair.rho, 1.0, rtol=1e-10)
        assert_allclose(pair.gap, report.gap, rtol=1e-4)
        assert len(pair.residual_history) == pair.iterations

    print("  ✓ Gap estimate tests passed")


def test_solver_failures():
    """Vanishing iterates, iteration caps and the dense limit raise"""
    print("Testing solver failure modes...")

    nilpotent = _operator(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(NonPositiveIterate):
        dominant_eigenpair(nilpotent)

    rng = np.random.default_rng(9)
    op = _operator(rng.random((20, 20)))
    with pytest.raises(NoConvergence) as exc:
        dominant_eigenpair(op, tol=1e-15, max_iter=3)
    assert exc.value.witness["max_iter"] == 3

    with pytest.raises(TooLarge):
        full_spectrum_oracle(op, dense_limit=10)

    print("  ✓ Solver failure tests passed")


def _nearly_decoupled(seed: int, k: int = 6, eps: float = 0.1) -> DiscreteOperator:
    """Positive 2k×2k matrix with a real subdominant eigenvalue near (1 - 2ε)ρ."""
    rng = np.random.default_rng(seed)
    blocks = [rng.random((k, k)) + 0.01 for _ in range(4)]
    blocks = [b / b.sum(axis=1, keepdims=True) for b in blocks]
    scale = float(rng.uniform(0.5, 2.0))
    matrix = scale * np.block([[(1 - eps) * blocks[0], eps * blocks[1]], [eps * blocks[2], (1 - eps) * blocks[3]]])
    return _operator(matrix, rng.random(2 * k) + 0.1)


def _ccapm_operator() -> DiscreteOperator:
    model = GaussianAR1(a=0.5, sigma=0.1)
    return build_pricing_operator(model, ccapm_sdf(0.98, 2.0), stationary_grid(model, 64))


def test_scaling_the_operator_scales_rho_only():
    """c·T has eigenvalue cρ with the same normalized φ and φ*"""
    print("Testing scale invariance...")

    for op in (_nearly_decoupled(31), _ccapm_operator()):
        pair = dominant_eigenpair(op)
        for c in (0.25, 3.0):
            scaled = dominant_eigenpair(replace(op, matrix=c * op.matrix))
            assert_allclose(scaled.rho, c * pair.rho, rtol=1e-10)
            assert_allclose(scaled.phi, pair.phi, rtol=1e-7)
            assert_allclose(scaled.phi_star, pair.phi_star, rtol=1e-7)

    print("  ✓ Scale invariance tests passed")


def test_adjoint_eigenfunction_duality():
    """⟨φ*, Tf⟩ = ρ⟨φ*, f⟩ for arbitrary positive payoffs f"""
    print("Testing φ* duality...")

    rng = np.random.default_rng(41)
    for op in (_nearly_decoupled(32), _ccapm_operator()):
        pair = dominant_eigenpair(op)
        grid = op.grid
        for _ in range(5):
            f = rng.random(grid.n) + 0.1
            lhs = grid.inner(pair.phi_star, apply(op, f))
            rhs = pair.rho * grid.inner(pair.phi_star, f)
            assert_allclose(lhs, rhs, rtol=1e-9)

    print("  ✓ Duality tests passed")


def test_residual_decay_follows_the_gap():
    """The power-iteration residual shrinks at the rate |λ₂|/ρ of the dense spectrum"""
    print("Testing residual decay rate...")

    for op in (_nearly_decoupled(33), _nearly_decoupled(34), _ccapm_operator()):
        pair = dominant_eigenpair(op)
        report = full_spectrum_oracle(op)
        slope = fitted_log_rate(np.array(pair.residual_history))
        assert np.isfinite(slope)
        assert slope <= np.log(report.gap) + 0.05, f"{op.label}: {slope} vs {np.log(report.gap)}"
        assert abs(slope - np.log(report.gap)) < 0.1, f"{op.label}: {slope} vs {np.log(report.gap)}"

    print("  ✓ Residual decay tests passed")


def test_ou_skeleton_consistency():
    """ρ at interval 2τ equals ρ(τ)² and the eigenfunctions coincide"""
    print("Testing OU skeleton consistency...")

    kappa, sigma, delta, theta = 0.5, 0.2, 0.02, 0.5
    pairs = []
    for tau in (1.0, 2.0):
        model = OUSkeleton(kappa=kappa, sigma=sigma, tau=tau)
        grid = stationary_grid(model, 48)
        sdf = exponential_affine_sdf(-delta * tau, theta)
        pairs.append((grid, dominant_eigenpair(build_pricing_operator(model, sdf, grid))))

    (grid, one), (_, two) = pairs
    assert_allclose(one.rho, np.exp(-delta), rtol=1e-10)
    assert_allclose(two.rho, one.rho**2, rtol=1e-6)

    ratio = two.phi / one.phi
    assert ratio.max() / ratio.min() - 1.0 < 1e-4
    exact = np.exp(-theta * grid.points[:, 0])
    ratio = one.phi / exact
    assert ratio.max() / ratio.min() - 1.0 < 1e-6

    print("  ✓ OU skeleton consistency tests passed")


def run_all_tests():
    """Run all tests and report results"""
    print("=" * 60)
    print("Running Spectral Tests")
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
