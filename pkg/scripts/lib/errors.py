#!/usr/bin/env python3
# pyright: strict
"""
Error Types
===========

One exception per failure mode of the toolkit. Every error carries the
witness data needed to diagnose it, so callers (and the CLI) can report
*what* failed and not only *that* something failed.
"""

from typing import Any, Dict, Optional


class EigenpriceError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message: str, witness: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.witness: Dict[str, Any] = dict(witness or {})


class ConfigError(EigenpriceError, ValueError):
    """Run configuration is unreadable or invalid."""


class InvalidModel(EigenpriceError, ValueError):
    """State model or habit model parameters violate their invariants."""


class NonStationaryModel(EigenpriceError, ValueError):
    """Model has no (unique) stationary distribution, or a simulated path exploded."""


class DegenerateGrid(EigenpriceError, ValueError):
    """Grid request cannot produce a usable quadrature (e.g. fewer than 2 points)."""


class NegativeSDF(EigenpriceError, ValueError):
    """A sampled stochastic discount factor value is negative."""


class InterpolationOutOfRange(EigenpriceError):
    """A shifted stacked state left the grid hull and strict hull checking was requested."""


class DimensionMismatch(EigenpriceError, ValueError):
    """A grid function does not match the operator dimension."""


class ZeroWeight(EigenpriceError, ValueError):
    """Adjoint requested on a grid with a zero quadrature weight."""


class NoConvergence(EigenpriceError):
    """Power iteration did not converge (gap close to zero or reducible operator)."""

    def __init__(self, max_iter: int, residual: float) -> None:
        super().__init__(
            f"power iteration did not converge in {max_iter} iterations "
            f"(last residual {residual:.3e}); check the spectral gap and irreducibility",
            {"max_iter": max_iter, "residual": residual},
        )
        self.max_iter = max_iter
        self.residual = residual


class NonPositiveIterate(EigenpriceError):
    """Converged iterate is not strictly positive (eventual strong positivity fails)."""


class TooLarge(EigenpriceError, ValueError):
    """Dense eigendecomposition requested above the configured dense limit."""


class ConclusionViolated(EigenpriceError):
    """One or more identification conclusions fail on the discretized operator."""

    def __init__(self, report: Any) -> None:
        failed = [name for name, ok in report.assertions.items() if not ok]
        super().__init__(
            f"theorem conclusions violated: {', '.join(failed)}",
            {"failed": failed},
        )
        self.report = report


class ZeroBondPrice(EigenpriceError):
    """A zero-coupon bond price is zero at some grid point (positivity failure)."""


class NonStochasticKernel(EigenpriceError):
    """Twisted kernel rows do not sum to one (eigen-residual too large)."""


class PathOffGrid(EigenpriceError):
    """A simulated state lies outside the grid hull used to interpolate φ."""


class UniquenessFailed(EigenpriceError):
    """The operator has more than one nonnegative eigenvector (or none)."""

    def __init__(self, count: int, report: Any) -> None:
        super().__init__(
            f"expected exactly one nonnegative eigenvector, found {count}; "
            "check the habit model assumptions (positivity, irreducibility)",
            {"positive_eigenvector_count": count},
        )
        self.count = count
        self.report = report
