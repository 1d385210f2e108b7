#!/usr/bin/env python3
# pyright: strict
"""
Spectral Analysis
=================

Dominant eigenpair (ρ, φ, φ*) by power iteration, a dense eigendecomposition
oracle, and the check of the identification conclusions on a discretized
operator:

(a) ρ equals the spectral radius
(b) exactly one nonnegative eigenvector for T and for T*
(c) ρ is simple
(d) ρ is isolated
(e) ρ is the only eigenvalue on the spectral circle
"""

import logging
from typing import Any, Dict, List, Tuple

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .errors import ConclusionViolated, NoConvergence, NonPositiveIterate, TooLarge
from .models import Eigenpair, FloatArray, SpectrumReport, TheoremReport
from .operator_core import DiscreteOperator, adjoint

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000
DEFAULT_DENSE_LIMIT = 2000

POINTWISE_FACTOR = 10.0
POINTWISE_FLOOR = 1e-8
GAP_ITERATIONS = 200

RADIUS_RTOL = 1e-8
CIRCLE_RTOL = 1e-8
SIGN_RTOL = 1e-10
NULL_RTOL = 1e-12
QMASS_FLOOR = 1e-10


def _weighted_norm(v: FloatArray, w: FloatArray) -> float:
    return float(np.sqrt(np.sum(w * v * v)))


def _power_iteration(
    matrix: FloatArray,
    w: FloatArray,
    tol: float,
    max_iter: int,
) -> Tuple[float, FloatArray, float, List[float]]:
    """Power iteration from the constant function; returns (rho, v, residual, history)."""
    v = np.ones(matrix.shape[0])
    v /= _weighted_norm(v, w)
    history: List[float] = []

    for _ in range(max_iter):
        u = matrix @ v
        rho = float(np.sum(w * v * u))
        residual_vec = u - rho * v
        residual = _weighted_norm(residual_vec, w)
        history.append(residual)

        if rho > 0 and residual <= tol * max(1.0, rho):
            resolved = v >= POINTWISE_FLOOR * v.max()
            pointwise = np.abs(residual_vec[resolved]) / (rho * v[resolved])
            if pointwise.max() <= POINTWISE_FACTOR * tol:
                return rho, v, residual, history

        norm = _weighted_norm(u, w)
        if norm == 0:
            raise NonPositiveIterate(
                "iterate vanished; the operator annihilates the constant function",
                {"iteration": len(history)},
            )
        v = u / norm

    raise NoConvergence(max_iter, history[-1] if history else float("nan"))


def _estimate_gap(matrix: FloatArray, w: FloatArray, rho: float, phi: FloatArray, phi_star: FloatArray) -> float:
    """|λ₂|/ρ from deflated power iteration v ← Mv − ρφ⟨φ*, v⟩."""
    v = np.random.default_rng(0).standard_normal(matrix.shape[0])
    v -= phi * np.sum(w * phi_star * v)
    norm = _weighted_norm(v, w)
    if norm == 0:
        return 0.0
    v /= norm

    log_growth: List[float] = []
    for _ in range(GAP_ITERATIONS):
        u = matrix @ v - rho * phi * np.sum(w * phi_star * v)
        u -= phi * np.sum(w * phi_star * u)
        norm = _weighted_norm(u, w)
        if norm <= 1e-300:
            return 0.0
        log_growth.append(float(np.log(norm)))
        v = u / norm

    tail = log_growth[len(log_growth) // 2:]
    return float(np.exp(np.mean(tail)) / rho)


def dominant_eigenpair(
    op: DiscreteOperator,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> Eigenpair:
    """Principal eigenpair of ``op`` and its adjoint.

    Args:
        op: Positive discretized operator.
        tol: Residual tolerance, relative to max(1, ρ).
        max_iter: Iteration cap for each power iteration.

    Returns:
        Eigenpair normalized by Σwφ² = 1 and Σwφφ* = 1.

    Raises:
        NoConvergence: spectral gap near zero or reducible operator.
        NonPositiveIterate: converged φ or φ* is not strictly positive.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    w = op.grid.weights
    rho, phi, residual, history = _power_iteration(op.matrix, w, tol, max_iter)
    _require_positive(phi, "phi")

    star = adjoint(op)
    rho_star, phi_star, _, _ = _power_iteration(star.matrix, w, tol, max_iter)
    _require_positive(phi_star, "phi_star")
    if abs(rho_star - rho) > 1e3 * tol * max(1.0, rho):
        logger.warning(f"⚠️  adjoint eigenvalue {rho_star:.15g} differs from {rho:.15g}")

    phi = phi / _weighted_norm(phi, w)
    phi_star = phi_star / float(np.sum(w * phi * phi_star))
    gap = _estimate_gap(op.matrix, w, rho, phi, phi_star)

    logger.debug(f"rho={rho:.15g} gap={gap:.4f} iterations={len(history)}")
    return Eigenpair(
        rho=rho,
        phi=phi,
        phi_star=phi_star,
        gap=gap,
        residual=_weighted_norm(op.matrix @ phi - rho * phi, w),
        iterations=len(history),
        residual_history=tuple(history),
    )


def _require_positive(v: FloatArray, name: str) -> None:
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        i = int(np.argmin(v))
        raise NonPositiveIterate(
            f"converged {name} is not strictly positive (entry {i} = {v[i]:.3e}); "
            "eventual strong positivity likely fails",
            {"index": i, "value": float(v[i])},
        )


def _nonnegative_census(
    eigenvalues: NDArray[np.complex128],
    vectors: NDArray[np.complex128],
    w: FloatArray,
    radius: float,
) -> Tuple[int, List[int]]:
    """Count real eigenvectors with no sign change that are not Q-null."""
    found: List[int] = []
    for k, lam in enumerate(eigenvalues):
        if abs(lam.imag) > NULL_RTOL * max(radius, 1e-300) or abs(lam) <= NULL_RTOL * radius:
            continue
        v = vectors[:, k]
        v = v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
        v = v.real / np.max(np.abs(v.real))
        if v.min() < -SIGN_RTOL:
            continue
        resolved = np.abs(v) > SIGN_RTOL
        if float(w[resolved].sum()) < QMASS_FLOOR:
            continue
        found.append(k)
    return len(found), found


def full_spectrum_oracle(op: DiscreteOperator, dense_limit: int = DEFAULT_DENSE_LIMIT) -> SpectrumReport:
    """Dense eigendecomposition with the sign and circle census."""
    if op.n > dense_limit:
        raise TooLarge(
            f"operator has {op.n} points, above the dense limit {dense_limit}",
            {"n": op.n, "dense_limit": dense_limit},
        )
    eigenvalues, left, right = scipy.linalg.eig(op.matrix, left=True, right=True)
    w = op.grid.weights
    moduli = np.abs(eigenvalues)
    radius = float(moduli.max())

    count, _ = _nonnegative_census(eigenvalues, right, w, radius)
    if np.all(w > 0):
        # W⁻¹·left loses the tail entries when weights are tiny; the adjoint matrix is well scaled
        star_values, star_right = scipy.linalg.eig(adjoint(op).matrix, right=True)
        adjoint_count, _ = _nonnegative_census(star_values, star_right, w, radius)
    else:
        safe_w = np.where(w > 0, w, 1.0)
        adjoint_count, _ = _nonnegative_census(eigenvalues, left / safe_w[:, None], w, radius)

    top = int(np.argmin(np.abs(eigenvalues - radius)))
    lam = eigenvalues[top]
    multiplicity = int(np.sum(np.abs(eigenvalues - lam) <= RADIUS_RTOL * radius))
    u, v = left[:, top], right[:, top]
    overlap = abs(np.vdot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    is_simple = multiplicity == 1 and overlap > RADIUS_RTOL

    others = np.delete(eigenvalues, top)
    is_isolated = bool(others.size == 0 or np.min(np.abs(others - lam)) > RADIUS_RTOL * radius)
    on_circle = int(np.sum(moduli >= radius * (1.0 - CIRCLE_RTOL)))
    gap = float(np.max(np.abs(others)) / radius) if others.size and radius > 0 else 0.0

    return SpectrumReport(
        eigenvalues=eigenvalues,
        positive_eigenvector_count=count,
        adjoint_positive_eigenvector_count=adjoint_count,
        is_simple=bool(is_simple),
        is_isolated=is_isolated,
        on_circle_count=on_circle,
        spectral_radius=radius,
        gap=gap,
        tolerances={
            "radius_rtol": RADIUS_RTOL,
            "circle_rtol": CIRCLE_RTOL,
            "sign_rtol": SIGN_RTOL,
            "qmass_floor": QMASS_FLOOR,
        },
    )


def verify_theorem_conclusions(
    op: DiscreteOperator,
    pair: Eigenpair,
    strict: bool = True,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
) -> TheoremReport:
    """Check conclusions (a)–(e) against the dense oracle.

    Raises:
        ConclusionViolated: when ``strict`` and any assertion fails.
    """
    report = full_spectrum_oracle(op, dense_limit)
    radius = report.spectral_radius
    circle = [
        [float(z.real), float(z.imag)]
        for z in report.eigenvalues
        if abs(z) >= radius * (1.0 - CIRCLE_RTOL)
    ]
    assertions = {
        "a": abs(pair.rho - radius) <= RADIUS_RTOL * radius,
        "b": report.positive_eigenvector_count == 1 and report.adjoint_positive_eigenvector_count == 1,
        "c": report.is_simple,
        "d": report.is_isolated,
        "e": report.on_circle_count == 1,
    }
    witness: Dict[str, Any] = {
        "rho": pair.rho,
        "spectral_radius": radius,
        "positive_eigenvector_count": report.positive_eigenvector_count,
        "adjoint_positive_eigenvector_count": report.adjoint_positive_eigenvector_count,
        "on_circle": circle,
        "dense_gap": report.gap,
    }
    theorem = TheoremReport(assertions=assertions, witness=witness)
    if not theorem.passed:
        failed = [k for k, ok in assertions.items() if not ok]
        logger.warning(f"⚠️  conclusions {', '.join(failed)} fail on {op.label}")
        if strict:
            raise ConclusionViolated(theorem)
    return theorem
