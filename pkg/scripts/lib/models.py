#!/usr/bin/env python3
# pyright: strict
"""
Core Data Models
================

Immutable result containers shared across the toolkit: grids, simulated
paths, eigenpairs, spectrum and condition reports, and the pricing outputs.
Every model offers ``to_dict()`` for JSON and, where tabular, ``to_frame()``
for CSV export.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .errors import DegenerateGrid

FloatArray = NDArray[np.float64]

WEIGHT_SUM_TOL = 1e-12


def _frozen(array: Any, dtype: Any = np.float64) -> Any:
    """Copy into a read-only numpy array."""
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _coordinate_columns(dim: int) -> List[str]:
    return [f"x{k}" for k in range(dim)]


@dataclass(frozen=True, eq=False)
class Grid:
    """State grid with quadrature weights for the stationary distribution Q."""

    points: FloatArray
    weights: FloatArray
    axes: Optional[Tuple[FloatArray, ...]] = None
    label: str = ""

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        weights = np.asarray(self.weights, dtype=np.float64)

        n = points.shape[0]
        if n < 2:
            raise DegenerateGrid(f"grid needs at least 2 points, got {n}", {"n_points": n})
        if weights.shape != (n,):
            raise DegenerateGrid(
                f"weights shape {weights.shape} does not match {n} points",
                {"n_points": n},
            )
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DegenerateGrid("grid weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise DegenerateGrid(
                f"grid weights sum to {weights.sum():.15f}, expected 1",
                {"weight_sum": float(weights.sum())},
            )
        if np.unique(points, axis=0).shape[0] != n:
            raise DegenerateGrid("grid points must be pairwise distinct")

        object.__setattr__(self, "points", _frozen(points))
        object.__setattr__(self, "weights", _frozen(weights))
        if self.axes is not None:
            object.__setattr__(self, "axes", tuple(_frozen(ax) for ax in self.axes))

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def resolution(self) -> int:
        """Points per dimension (tensor grids) or total points."""
        if self.axes is not None:
            return int(len(self.axes[0]))
        return self.n

    def inner(self, f: FloatArray, g: FloatArray) -> float:
        """Weighted inner product on L²(Q)."""
        return float(np.sum(self.weights * f * g))

    def norm(self, f: FloatArray) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def hull(self) -> Tuple[FloatArray, FloatArray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.points, columns=_coordinate_columns(self.dim))
        frame["weight"] = self.weights
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
            "axes": None if self.axes is None else [ax.tolist() for ax in self.axes],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Grid":
        axes = data.get("axes")
        return cls(
            points=np.asarray(data["points"], dtype=np.float64),
            weights=np.asarray(data["weights"], dtype=np.float64),
            axes=None if axes is None else tuple(np.asarray(ax) for ax in axes),
            label=data.get("label", ""),
        )


@dataclass(frozen=True, eq=False)
class PathSample:
    """Simulated stationary path {(X_t, Y_t)}."""

    states: FloatArray
    shocks: FloatArray
    seed: int

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        shocks = np.asarray(self.shocks, dtype=np.float64)
        if states.shape[0] != shocks.shape[0] + 1:
            raise ValueError(
                f"path has {states.shape[0]} states but {shocks.shape[0]} shocks; "
                "expected one more state than shocks"
            )
        object.__setattr__(self, "states", _frozen(states))
        object.__setattr__(self, "shocks", _frozen(shocks))

    @property
    def length(self) -> int:
        return int(self.shocks.shape[0])


@dataclass(frozen=True, eq=False)
class Eigenpair:
    """Dominant eigenpair (ρ, φ, φ*) of a discretized pricing operator."""

    rho: float
    phi: FloatArray
    phi_star: FloatArray
    gap: float
    residual: float
    iterations: int = 0
    residual_history: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi", _frozen(self.phi))
        object.__setattr__(self, "phi_star", _frozen(self.phi_star))
        object.__setattr__(self, "residual_history", tuple(float(r) for r in self.residual_history))

    def to_frame(self, grid: Grid) -> pd.DataFrame:
        frame = grid.to_frame()
        frame["phi"] = self.phi
        frame["phi_star"] = self.phi_star
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rho": self.rho,
            "gap": self.gap,
            "residual": self.residual,
            "iterations": self.iterations,
        }


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Dense eigendecomposition census used as the brute-force oracle."""

    eigenvalues: NDArray[np.complex128]
    positive_eigenvector_count: int
    adjoint_positive_eigenvector_count: int
    is_simple: bool
    is_isolated: bool
    on_circle_count: int
    spectral_radius: float
    gap: float
    tolerances: Dict[str, float] = field(default_factory=lambda: {})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "positive_eigenvector_count": self.positive_eigenvector_count,
            "adjoint_positive_eigenvector_count": self.adjoint_positive_eigenvector_count,
            "is_simple": self.is_simple,
            "is_isolated": self.is_isolated,
            "on_circle_count": self.on_circle_count,
            "spectral_radius": self.spectral_radius,
            "gap": self.gap,
            "tolerances": dict(self.tolerances),
        }

    def excerpt(self) -> Dict[str, Any]:
        """Uniqueness certificate fields only."""
        return {
            "positive_eigenvector_count": self.positive_eigenvector_count,
            "adjoint_positive_eigenvector_count": self.adjoint_positive_eigenvector_count,
            "is_simple": self.is_simple,
            "is_isolated": self.is_isolated,
            "on_circle_count": self.on_circle_count,
        }


THEOREM_ASSERTIONS: Dict[str, str] = {
    "a": "rho equals the spectral radius",
    "b": "unique nonnegative eigenvector for T and for T*",
    "c": "dominant eigenvalue is simple",
    "d": "dominant eigenvalue is isolated",
    "e": "unique eigenvalue on the spectral circle",
}


@dataclass(frozen=True)
class TheoremReport:
    """Outcome of the five identification conclusions on one operator."""

    assertions: Dict[str, bool]
    witness: Dict[str, Any]

    @property
    def passed(self) -> bool:
        return all(self.assertions.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "assertions": {
                key: {"ok": ok, "meaning": THEOREM_ASSERTIONS[key]}
                for key, ok in self.assertions.items()
            },
            "witness": self.witness,
        }


class ConditionId(str, Enum):
    POSITIVITY = "Positivity"
    EVENTUAL_STRONG_POSITIVITY = "EventualStrongPositivity"
    IRREDUCIBILITY = "Irreducibility"
    NO_ARBITRAGE_SUFFICIENT = "NoArbitrageSufficient"
    POWER_COMPACTNESS = "PowerCompactness"
    YIELD_NON_DEGENERACY = "YieldNonDegeneracy"
    DEGENERATE_TRANSITION = "DegenerateTransition"
    KERNEL_POSITIVITY_AB = "KernelPositivityAB"


class Verdict(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INCONCLUSIVE = "Inconclusive"


FINITE_PROXY_NOTE = "a.e.-[Q] checked on all grid points / all samples"


@dataclass(frozen=True)
class ConditionReport:
    """Verdict on one identification assumption, with witness or certificate."""

    condition_id: ConditionId
    verdict: Verdict
    witness: Dict[str, Any]
    tolerance: Dict[str, Any]
    note: str = ""

    def __post_init__(self) -> None:
        if self.verdict in (Verdict.PASS, Verdict.FAIL) and not self.witness:
            raise ValueError(
                f"{self.condition_id.value}: a {self.verdict.value} verdict needs a witness"
            )
        if "finite_proxy" not in self.tolerance:
            tolerance = dict(self.tolerance)
            tolerance["finite_proxy"] = FINITE_PROXY_NOTE
            object.__setattr__(self, "tolerance", tolerance)

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "condition_id": self.condition_id.value,
            "verdict": self.verdict.value,
            "witness": self.witness,
            "tolerance": self.tolerance,
            "note": self.note,
        }


@dataclass(frozen=True, eq=False)
class YieldCurve:
    """Bond prices Tₙ1(x) and per-period net yields yₙ(x)."""

    horizons: NDArray[np.int64]
    prices: FloatArray
    yields: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "horizons", _frozen(self.horizons, np.int64))
        object.__setattr__(self, "prices", _frozen(self.prices))
        object.__setattr__(self, "yields", _frozen(self.yields))

    def to_frame(self, grid: Grid) -> pd.DataFrame:
        n_h, n = self.prices.shape
        frame = pd.DataFrame(
            np.repeat(grid.points[None, :, :], n_h, axis=0).reshape(n_h * n, grid.dim),
            columns=_coordinate_columns(grid.dim),
        )
        frame.insert(0, "point", np.tile(np.arange(n), n_h))
        frame.insert(0, "horizon", np.repeat(self.horizons, n))
        frame["price"] = self.prices.reshape(-1)
        frame["yield"] = self.yields.reshape(-1)
        return frame


@dataclass(frozen=True, eq=False)
class LongRunErrors:
    """Error sequence eₙ = ‖ρ⁻ⁿTₙψ − ⟨ψ,φ*⟩φ‖ of the long-horizon limit."""

    horizons: NDArray[np.int64]
    errors: FloatArray
    constant: float
    log_rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "horizons", _frozen(self.horizons, np.int64))
        object.__setattr__(self, "errors", _frozen(self.errors))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"n": self.horizons, "error": self.errors})


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Twisted kernel, its stationary law and the long-run constants."""

    eigenpair: Eigenpair
    twisted_kernel: FloatArray
    pi_tilde: FloatArray
    long_run_constant: Dict[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "twisted_kernel", _frozen(self.twisted_kernel))
        object.__setattr__(self, "pi_tilde", _frozen(self.pi_tilde))

    def to_frame(self, grid: Grid) -> pd.DataFrame:
        frame = self.eigenpair.to_frame(grid)
        frame["pi_tilde"] = self.pi_tilde
        return frame


@dataclass(frozen=True, eq=False)
class PathDecomposition:
    """Per-step permanent and transitory SDF factors along a simulated path."""

    sdf: FloatArray
    transitory: FloatArray
    permanent: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "sdf", _frozen(self.sdf))
        object.__setattr__(self, "transitory", _frozen(self.transitory))
        object.__setattr__(self, "permanent", _frozen(self.permanent))

    @property
    def permanent_mean(self) -> float:
        return float(self.permanent.mean())

    @property
    def permanent_stderr(self) -> float:
        return float(self.permanent.std(ddof=1) / np.sqrt(self.permanent.size))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": np.arange(self.sdf.size),
                "sdf": self.sdf,
                "transitory": self.transitory,
                "permanent": self.permanent,
            }
        )


@dataclass(frozen=True, eq=False)
class HabitSolution:
    """Recovered time preference and habit transform."""

    beta: float
    h: FloatArray
    residual: float
    uniqueness_certificate: Dict[str, Any]

    def __post_init__(self) -> None:
        object.__setattr__(self, "h", _frozen(self.h))

    def to_frame(self, grid: Grid) -> pd.DataFrame:
        frame = pd.DataFrame(grid.points, columns=_coordinate_columns(grid.dim))
        frame["h"] = self.h
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta": self.beta,
            "residual": self.residual,
            "uniqueness": self.uniqueness_certificate,
        }
