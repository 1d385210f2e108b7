#!/usr/bin/env python3
# pyright: strict
"""
Affine Oracle
=============

Closed-form principal eigenpair of the C-CAPM pricing operator on a
Gaussian AR(1) state, x' = a·x + σ·ε, with m = β·exp(−γ·x'):

    φ(x) = exp(b·x),  b = −γ·a/(1 − a)
    ρ    = β·exp(γ²σ²/(2(1 − a)²))

Does not import the library; the value it prints is the reference a
discretized run is compared against.

Usage:
    python3 scripts/affine_oracle.py
    python3 scripts/affine_oracle.py --beta 0.98 --gamma 2 --a 0.5 --sigma 0.1
"""

import argparse
import json
import math
from typing import Dict, List, Optional


def affine_eigenpair(beta: float, gamma: float, a: float, sigma: float) -> Dict[str, float]:
    if not abs(a) < 1:
        raise ValueError(f"AR(1) coefficient must satisfy |a| < 1, got {a}")
    b = -gamma * a / (1.0 - a)
    rho = beta * math.exp(gamma**2 * sigma**2 / (2.0 * (1.0 - a) ** 2))
    return {"rho": rho, "b": b, "long_run_yield": 1.0 / rho - 1.0}


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Closed-form C-CAPM / AR(1) eigenpair.")
    parser.add_argument("--beta", type=float, default=0.98)
    parser.add_argument("--gamma", type=float, default=2.0)
    parser.add_argument("--a", type=float, default=0.5)
    parser.add_argument("--sigma", type=float, default=0.1)
    parser.add_argument("--json", action="store_true", help="print JSON instead of text")
    args = parser.parse_args(argv)

    try:
        result = affine_eigenpair(args.beta, args.gamma, args.a, args.sigma)
    except ValueError as e:
        print(f"❌ {e}")
        return 2

    if args.json:
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        print(f"rho            = {result['rho']:.15g}")
        print(f"b              = {result['b']:.15g}")
        print(f"long-run yield = {result['long_run_yield']:.15g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
