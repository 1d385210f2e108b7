#!/usr/bin/env python3
# pyright: strict
"""
Run Configuration
=================

Parses a TOML (or JSON) run file into validated pydantic models and turns
each section into the library object it describes. Environment overrides
are read from ``.env.local`` at the project root:

- EIGENPRICE_OUTPUT_DIR: default output directory
- EIGENPRICE_DENSE_LIMIT: default dense eigendecomposition limit
- LOG_LEVEL: logging level (read by the CLI)
"""

import hashlib
import json
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, InvalidModel, NonStationaryModel
from .habit import HabitModel, synthesize_consistent_returns
from .models import ConditionId, FloatArray, Grid
from .operator_core import SDFSpec, ccapm_sdf, constant_sdf, exponential_affine_sdf, unit_sdf
from .statemodels import DiscreteChain, GaussianAR1, OUSkeleton, StackedNAR, StateModel


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSection(_Section):
    kind: Literal["DiscreteChain", "GaussianAR1", "StackedNAR", "OUSkeleton"]
    transition: Optional[List[List[float]]] = None
    states: Optional[List[float]] = None
    a: Optional[float] = None
    sigma: Optional[float] = Field(default=None, gt=0)
    coefficients: Optional[List[float]] = None
    intercept: float = 0.0
    kappa: Optional[float] = Field(default=None, gt=0)
    tau: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _required_per_kind(self) -> "ModelSection":
        required = {
            "DiscreteChain": ["transition"],
            "GaussianAR1": ["a", "sigma"],
            "StackedNAR": ["coefficients"],
            "OUSkeleton": ["kappa", "sigma", "tau"],
        }[self.kind]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"model kind {self.kind} needs: {', '.join(missing)}")
        try:
            self.build()
        except (InvalidModel, NonStationaryModel) as exc:
            raise ValueError(f"model {self.kind}: {exc}") from exc
        return self

    def build(self) -> StateModel:
        if self.kind == "DiscreteChain":
            assert self.transition is not None
            states = None if self.states is None else np.asarray(self.states)
            return DiscreteChain(transition=np.asarray(self.transition), states=states)
        if self.kind == "GaussianAR1":
            assert self.a is not None and self.sigma is not None
            return GaussianAR1(a=self.a, sigma=self.sigma)
        if self.kind == "StackedNAR":
            assert self.coefficients is not None
            return StackedNAR.linear(tuple(self.coefficients), sigma=self.sigma or 1.0, intercept=self.intercept)
        assert self.kappa is not None and self.sigma is not None and self.tau is not None
        return OUSkeleton(kappa=self.kappa, sigma=self.sigma, tau=self.tau)


class SDFSection(_Section):
    kind: Literal["Unit", "Constant", "CCAPM", "ExponentialAffine"]
    beta: Optional[float] = Field(default=None, gt=0, le=1)
    gamma: float = Field(default=0.0, ge=0)
    log_beta: Optional[float] = None
    theta: Optional[float] = None
    shock_sigma: float = Field(default=0.0, ge=0)
    mc_draws: Optional[int] = Field(default=None, ge=2)

    @model_validator(mode="after")
    def _required_per_kind(self) -> "SDFSection":
        if self.kind in ("Constant", "CCAPM") and self.beta is None:
            raise ValueError(f"sdf kind {self.kind} needs beta")
        if self.kind == "ExponentialAffine" and (self.log_beta is None or self.theta is None):
            raise ValueError("sdf kind ExponentialAffine needs log_beta and theta")
        if self.shock_sigma > 0 and self.kind != "CCAPM":
            raise ValueError("shock_sigma applies to the CCAPM sdf only")
        return self

    def build(self) -> SDFSpec:
        if self.kind == "Unit":
            return unit_sdf()
        if self.kind == "Constant":
            assert self.beta is not None
            return constant_sdf(self.beta)
        if self.kind == "ExponentialAffine":
            assert self.log_beta is not None and self.theta is not None
            return exponential_affine_sdf(self.log_beta, self.theta)
        assert self.beta is not None
        scale = self.shock_sigma
        if scale > 0:
            return ccapm_sdf(self.beta, self.gamma, shock_law=lambda x, xn, z: scale * z)
        return ccapm_sdf(self.beta, self.gamma)


class HabitSection(_Section):
    """Habit recovery run: returns synthesized from a known (β₀, h₀) with log h₀ linear."""

    gamma: float = Field(ge=0)
    beta0: float = Field(gt=0)
    h0_coefficients: List[float] = Field(default_factory=list)

    def build(self, growth_model: StateModel, grid: Grid) -> HabitModel:
        if not isinstance(growth_model, StackedNAR):
            raise ConfigError("habit runs need a StackedNAR growth model")
        coef = np.zeros(growth_model.order)
        given = np.asarray(self.h0_coefficients, dtype=np.float64)[: growth_model.order]
        coef[: given.size] = given

        def h0(states: FloatArray) -> FloatArray:
            return np.exp(np.asarray(states) @ coef)

        return synthesize_consistent_returns(h0, self.beta0, self.gamma, growth_model, grid)


class GridSection(_Section):
    points: int = Field(default=64, ge=2)
    truncation: float = Field(default=8.0, gt=0)
    weights: Literal["chain", "simulate"] = "chain"


class SolverSection(_Section):
    tol: float = Field(default=1e-12, gt=0)
    max_iter: int = Field(default=100_000, ge=1)
    dense_limit: Optional[int] = Field(default=None, ge=1)


class ChecksSection(_Section):
    run: List[ConditionId] = Field(
        default_factory=lambda: [
            ConditionId.POSITIVITY,
            ConditionId.EVENTUAL_STRONG_POSITIVITY,
            ConditionId.IRREDUCIBILITY,
            ConditionId.NO_ARBITRAGE_SUFFICIENT,
            ConditionId.YIELD_NON_DEGENERACY,
        ]
    )
    n_max: int = Field(default=50, ge=1)
    yield_n_max: int = Field(default=200, ge=1)
    samples: int = Field(default=1000, ge=1)
    window: Optional[int] = Field(default=None, ge=1)
    ell: Optional[int] = Field(default=None, ge=1)
    hs_ceiling: float = Field(default=1e12, gt=0)


class OutputSection(_Section):
    directory: Optional[str] = None
    horizons: int = Field(default=200, ge=1)
    save_matrix: bool = False
    path_length: int = Field(default=10_000, ge=1)


class RunConfig(_Section):
    seed: int
    model: ModelSection
    sdf: Optional[SDFSection] = None
    habit: Optional[HabitSection] = None
    grid: GridSection = Field(default_factory=GridSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    checks: ChecksSection = Field(default_factory=ChecksSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _one_of_sdf_or_habit(self) -> "RunConfig":
        if (self.sdf is None) == (self.habit is None):
            raise ValueError("exactly one of [sdf] or [habit] must be present")
        return self


@dataclass(frozen=True)
class EnvOverrides:
    """Defaults taken from the environment (.env.local)."""

    output_dir: Optional[Path]
    dense_limit: Optional[int]

    @classmethod
    def load(cls, project_root: Path) -> "EnvOverrides":
        load_dotenv(project_root / ".env.local")
        output_dir = os.getenv("EIGENPRICE_OUTPUT_DIR")
        dense_limit = os.getenv("EIGENPRICE_DENSE_LIMIT")
        try:
            limit = int(dense_limit) if dense_limit else None
        except ValueError as e:
            raise ConfigError(f"EIGENPRICE_DENSE_LIMIT must be an integer, got {dense_limit!r}") from e
        return cls(output_dir=Path(output_dir) if output_dir else None, dense_limit=limit)


def _parse(path: Path, raw: bytes) -> Dict[str, Any]:
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            return tomllib.loads(raw.decode("utf-8"))
        if suffix == ".json":
            return json.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    raise ConfigError(f"unsupported config format {suffix!r}; use .toml or .json")


def load_config(path: Path) -> "LoadedConfig":
    """Read, validate and hash a run configuration.

    Raises:
        ConfigError: unreadable file, bad syntax or failed validation.
    """
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    data = _parse(path, raw)
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config {path}:\n{e}", {"errors": e.errors(include_url=False)}) from e
    return LoadedConfig(path=path, config=config, sha256=hashlib.sha256(raw).hexdigest())


@dataclass(frozen=True)
class LoadedConfig:
    path: Path
    config: RunConfig
    sha256: str
