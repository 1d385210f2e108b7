#!/usr/bin/env python3
# pyright: strict
"""
Eigenprice Runner
=================

Configuration-driven front end that:
1. Builds the state model, stationary grid and discretized pricing operator
2. Machine-checks the identification conditions and writes their reports
3. Solves for the principal eigenpair and runs the dense spectrum oracle
4. Writes yield curves, long-run limit errors and the SDF decomposition
   (or the recovered habit solution)
5. Records a manifest with content hashes for reproducibility

Subcommands: run (default) | check | solve | price | decompose | habit | plotdata

Exit codes:
- 0: all requested checks passed and the solver converged
- 1: unexpected failure
- 2: configuration error or unknown subcommand
- 3: a check failed (artifacts are still written)
- 4: the eigen-solver did not converge or produced a non-positive iterate

Environment Variables (optional, read from .env.local):
- EIGENPRICE_OUTPUT_DIR: default artifact directory
- EIGENPRICE_DENSE_LIMIT: default dense eigendecomposition limit
- LOG_LEVEL: logging level (default INFO)
"""

import argparse
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, TypedDict, TypeVar

import numpy as np
import pandas as pd

from lib.artifacts import MANIFEST_NAME, ArtifactWriter, read_manifest_header, resume_writer
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
from lib.config import EnvOverrides, LoadedConfig, RunConfig, load_config
from lib.env_checks import run_sanity_checks
from lib.errors import (
    ConfigError,
    EigenpriceError,
    InvalidModel,
    NoConvergence,
    NonPositiveIterate,
    NonStationaryModel,
    UniquenessFailed,
    ZeroBondPrice,
)
from lib.habit import HabitModel, build_habit_operator, check_habit_no_arbitrage, habit_sdf, recover_habit
from lib.models import ConditionId, ConditionReport, Eigenpair, Grid, Verdict
from lib.operator_core import (
    DiscreteOperator,
    SDFSpec,
    build_pricing_operator,
    ccapm_reference,
    clamp_roundoff,
    save_operator,
)
from lib.pricing import decompose, decompose_along_path, long_run_limit_check, yield_curve
from lib.spectral import DEFAULT_DENSE_LIMIT, dominant_eigenpair, verify_theorem_conclusions
from lib.statemodels import StateModel, simulate_path, stationary_grid

T = TypeVar("T")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_CHECK_FAILED = 3
EXIT_SOLVER = 4

COMMANDS = ("run", "check", "solve", "price", "decompose", "habit", "plotdata")
PIPELINES: Dict[str, Tuple[str, ...]] = {
    "run": ("checks", "solve", "price", "finish"),
    "check": ("checks",),
    "solve": ("solve",),
    "price": ("solve", "price"),
    "decompose": ("solve", "decompose"),
    "habit": ("solve", "habit"),
}

logger = logging.getLogger("eigenprice")


def configure_logging() -> logging.Logger:
    """Configure logging with env-driven levels."""
    level_name = os.getenv("LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, logging.INFO)

    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S%z",
    )
    logger.debug("Logging configured")
    return logger


def run_step(
    *,
    run_id: str,
    stage: str,
    step: str,
    fn: Callable[[], T],
    allow_failure: bool = True,
) -> Tuple[bool, Optional[T]]:
    """
    Execute a single pipeline step with structured logging and failure isolation.
    """
    logger.info("STEP_START", extra={"run_id": run_id, "stage": stage, "step": step})
    try:
        result = fn()
        logger.info("STEP_SUCCESS", extra={"run_id": run_id, "stage": stage, "step": step})
        return True, result
    except Exception as e:
        logger.error(
            "STEP_FAILURE",
            extra={"run_id": run_id, "stage": stage, "step": step, "error": str(e)},
            exc_info=not isinstance(e, EigenpriceError),
        )
        if not allow_failure:
            raise
        return False, None


class RunStepRecord(TypedDict, total=False):
    stage: str
    step: str
    status: str
    error: str


class StrictAbort(Exception):
    """A check failed and --strict asked to stop."""


class EigenpriceRun:
    """Orchestrates one configured run and owns its artifact directory."""

    def __init__(
        self,
        loaded: LoadedConfig,
        output_dir: Path,
        *,
        seed: Optional[int] = None,
        dense_limit: Optional[int] = None,
        strict: bool = False,
    ) -> None:
        self.loaded = loaded
        self.config: RunConfig = loaded.config
        self.seed = self.config.seed if seed is None else seed
        self.dense_limit = dense_limit or DEFAULT_DENSE_LIMIT
        self.strict = strict
        self.output_dir = output_dir
        self.writer = ArtifactWriter(output_dir)
        self.check_failed = False

        self.model: Optional[StateModel] = None
        self.grid: Optional[Grid] = None
        self.sdf: Optional[SDFSpec] = None
        self.habit_model: Optional[HabitModel] = None
        self.operator: Optional[DiscreteOperator] = None
        self.pair: Optional[Eigenpair] = None

    # ── BUILD ──────────────────────────────────────────────────────────────

    def build(self) -> DiscreteOperator:
        """Model, stationary grid and discretized operator."""
        cfg = self.config
        model = cfg.model.build()
        grid = stationary_grid(
            model,
            cfg.grid.points,
            method=cfg.grid.weights,
            seed=self.seed,
            truncation=cfg.grid.truncation,
        )
        logger.info(f"📐 {model.kind.value} on {grid.n} grid points ({grid.label})")

        if cfg.habit is not None:
            self.habit_model = cfg.habit.build(model, grid)
            self.sdf = habit_sdf(self.habit_model)
            op = build_habit_operator(self.habit_model, grid)
        else:
            assert cfg.sdf is not None
            self.sdf = cfg.sdf.build()
            op = build_pricing_operator(model, self.sdf, grid, cfg.sdf.mc_draws, seed=self.seed)

        self.model, self.grid, self.operator = model, grid, op
        self.writer.write_json(
            "operator.json",
            {"label": op.label, "n": op.n, "meta": op.meta, "grid": grid.to_dict()},
        )
        if cfg.output.save_matrix:
            for path in save_operator(op, self.output_dir, "operator_matrix"):
                self.writer.adopt(path)
        return op

    # ── CHECKS ─────────────────────────────────────────────────────────────

    def _run_check(self, condition: ConditionId) -> ConditionReport:
        assert self.model is not None and self.grid is not None and self.operator is not None
        assert self.sdf is not None
        checks = self.config.checks
        model, op = self.model, self.operator

        if condition is ConditionId.POSITIVITY:
            report = check_positivity(op)
            if report.passed:
                self.operator = clamp_roundoff(op)
            return report
        if condition is ConditionId.EVENTUAL_STRONG_POSITIVITY:
            return check_eventual_strong_positivity(op, checks.n_max)
        if condition is ConditionId.IRREDUCIBILITY:
            return check_irreducibility_markov(model, self.grid, checks.n_max)
        if condition is ConditionId.NO_ARBITRAGE_SUFFICIENT:
            if self.habit_model is not None:
                return check_habit_no_arbitrage(self.habit_model, checks.samples, self.seed)
            window = checks.window or model.order
            return check_no_arbitrage_sufficient(self.sdf, model, window, checks.samples, self.seed)
        if condition is ConditionId.POWER_COMPACTNESS:
            return check_power_compactness(
                model, self.sdf, self.grid, checks.ell or model.order, checks.hs_ceiling, seed=self.seed
            )
        if condition is ConditionId.YIELD_NON_DEGENERACY:
            try:
                return check_yield_nondegeneracy(op, checks.yield_n_max)
            except ZeroBondPrice as e:
                return ConditionReport(
                    condition_id=condition,
                    verdict=Verdict.FAIL,
                    witness=e.witness,
                    tolerance={"n_max": checks.yield_n_max},
                    note=str(e),
                )
        if condition is ConditionId.DEGENERATE_TRANSITION:
            return detect_degenerate_transition(model)
        return check_kernel_positivity_ab(op, checks.hs_ceiling)

    def run_checks(self) -> List[ConditionReport]:
        """Run the requested condition checks and write condition_reports.json."""
        logger.info("🔎 Checking identification conditions...")
        reports: List[ConditionReport] = []
        try:
            for condition in self.config.checks.run:
                report = self._run_check(condition)
                reports.append(report)
                if report.verdict is Verdict.FAIL:
                    self.check_failed = True
                    logger.warning(f"❌ {condition.value} failed: {report.note or report.witness}")
                    if self.strict:
                        raise StrictAbort(condition.value)
                elif report.verdict is Verdict.INCONCLUSIVE:
                    logger.warning(f"⚠️  {condition.value} inconclusive: {report.note}")
                else:
                    logger.info(f"✓ {condition.value} passed")
        finally:
            self.writer.write_json("condition_reports.json", [r.to_dict() for r in reports])
            if reports:
                print(render_table(reports))
        return reports

    # ── SOLVE ──────────────────────────────────────────────────────────────

    def solve(self) -> Eigenpair:
        """Dominant eigenpair plus the dense spectrum oracle when n is small enough."""
        assert self.operator is not None and self.grid is not None
        solver = self.config.solver
        logger.info("🧮 Solving for the principal eigenpair...")
        pair = dominant_eigenpair(self.operator, solver.tol, solver.max_iter)
        self.pair = pair
        logger.info(f"✓ rho={pair.rho:.15g} gap={pair.gap:.6f} iterations={pair.iterations}")
        self.writer.write_csv("eigenpair.csv", pair.to_frame(self.grid))

        if self.operator.n > self.dense_limit:
            logger.warning(f"⚠️  {self.operator.n} points exceed the dense limit {self.dense_limit}; spectrum oracle skipped")
            return pair

        theorem = verify_theorem_conclusions(self.operator, pair, strict=False, dense_limit=self.dense_limit)
        self.writer.write_json("spectrum.json", {"eigenpair": pair.to_dict(), "theorem": theorem.to_dict()})
        if not theorem.passed:
            self.check_failed = True
            if self.strict:
                raise StrictAbort("theorem conclusions")
        return pair

    # ── PRICE ──────────────────────────────────────────────────────────────

    def price(self) -> None:
        """Yield curve and long-run limit errors for ψ = 1."""
        assert self.operator is not None and self.grid is not None and self.pair is not None
        horizons = self.config.output.horizons
        curve = yield_curve(self.operator, horizons)
        self.writer.write_csv("yield_curve.csv", curve.to_frame(self.grid))

        errors = long_run_limit_check(self.operator, self.pair, np.ones(self.operator.n), horizons)
        self.writer.write_csv("long_run_errors.csv", errors.to_frame())
        self.writer.write_json("long_run.json", {"constant": errors.constant, "log_rate": errors.log_rate})
        logger.info(f"✓ Long-horizon yield {1.0 / self.pair.rho - 1.0:.8f}; fitted log-rate {errors.log_rate:.4f}")

    # ── DECOMPOSE / HABIT ──────────────────────────────────────────────────

    def decompose(self) -> None:
        """Twisted kernel, its stationary law and the path decomposition summary."""
        assert self.operator is not None and self.grid is not None and self.pair is not None
        assert self.model is not None and self.sdf is not None
        result = decompose(self.operator, self.pair, self.dense_limit)
        self.writer.write_csv("decomposition.csv", result.to_frame(self.grid))

        path = simulate_path(self.model, self.seed, self.config.output.path_length)
        along = decompose_along_path(self.sdf, self.model, self.pair, path, self.grid)
        product_error = float(np.max(np.abs(along.transitory * along.permanent - along.sdf) / along.sdf))
        self.writer.write_json(
            "decomposition.json",
            {
                "long_run_constant": result.long_run_constant,
                "twisted_row_sum_error": float(np.max(np.abs(result.twisted_kernel.sum(axis=1) - 1.0))),
                "path": {
                    "length": path.length,
                    "permanent_mean": along.permanent_mean,
                    "permanent_stderr": along.permanent_stderr,
                    "product_rel_error": product_error,
                },
            },
        )

    def habit(self) -> None:
        """Recover (β, h) from the habit operator."""
        assert self.operator is not None and self.grid is not None
        if self.habit_model is None:
            raise ConfigError("the habit subcommand needs a [habit] section")
        try:
            solution = recover_habit(self.operator, self.config.solver.tol, self.config.solver.max_iter, self.dense_limit)
        except UniquenessFailed as e:
            self.check_failed = True
            self.writer.write_json("habit_summary.json", {"uniqueness": e.report.excerpt(), "error": str(e)})
            raise
        self.writer.write_csv("habit_solution.csv", solution.to_frame(self.grid))
        self.writer.write_json("habit_summary.json", solution.to_dict())

    def finish(self) -> None:
        """Decomposition for SDF runs, habit recovery for habit runs."""
        if self.habit_model is not None:
            self.habit()
        else:
            self.decompose()

    # ── ORCHESTRATION ──────────────────────────────────────────────────────

    def _comparison(self) -> Optional[Dict[str, float]]:
        if self.model is None or self.sdf is None or self.pair is None:
            return None
        reference = ccapm_reference(self.model, self.sdf)
        if reference is None:
            return None
        rho_oracle = reference[0]
        return {
            "rho_numeric": self.pair.rho,
            "rho_oracle": rho_oracle,
            "rel_error": abs(self.pair.rho - rho_oracle) / rho_oracle,
        }

    def _write_run_summary(
        self,
        *,
        run_id: str,
        command: str,
        started_at: datetime,
        ended_at: datetime,
        status: str,
        steps: List[RunStepRecord],
    ) -> Path:
        """Persist run_summary.json (the only artifact with wall-clock times)."""
        summary = {
            "run_id": run_id,
            "command": command,
            "config": str(self.loaded.path),
            "seed": self.seed,
            "started_at": started_at.isoformat(),
            "ended_at": ended_at.isoformat(),
            "duration_sec": round((ended_at - started_at).total_seconds(), 2),
            "status": status,
            "steps": steps,
            "artifacts": sorted(self.writer.hashes),
        }
        run_file = self.output_dir / "run_summary.json"
        run_file.write_text(json.dumps(summary, indent=2, ensure_ascii=False), encoding="utf-8")
        logger.info(f"📄 Saved run summary: {run_file}")
        return run_file

    def execute(self, command: str) -> int:
        """Run the pipeline for ``command`` and return the exit code."""
        run_id = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
        started_at = datetime.now(timezone.utc)
        steps: List[RunStepRecord] = []
        exit_code = EXIT_OK

        logger.info("=" * 60)
        logger.info(f"=== eigenprice {command} (seed {self.seed}) ===")
        logger.info("=" * 60)

        handlers: Dict[str, Callable[[], Any]] = {
            "build": self.build,
            "checks": self.run_checks,
            "solve": self.solve,
            "price": self.price,
            "decompose": self.decompose,
            "habit": self.habit,
            "finish": self.finish,
        }
        stages = [(name, handlers[name]) for name in ("build",) + PIPELINES[command]]

        try:
            for stage, fn in stages:
                try:
                    run_step(run_id=run_id, stage=command, step=stage, fn=fn, allow_failure=False)
                    steps.append({"stage": command, "step": stage, "status": "success"})
                except Exception as e:
                    steps.append({"stage": command, "step": stage, "status": "failure", "error": str(e)})
                    raise
        except StrictAbort as e:
            logger.error(f"❌ --strict: stopping after failed check {e}")
            exit_code = EXIT_CHECK_FAILED
        except UniquenessFailed:
            exit_code = EXIT_CHECK_FAILED
        except (NoConvergence, NonPositiveIterate) as e:
            logger.error(f"❌ Solver failed: {e}")
            exit_code = EXIT_SOLVER
        except (ConfigError, InvalidModel, NonStationaryModel) as e:
            logger.error(f"❌ Configuration error: {e}")
            exit_code = EXIT_CONFIG
        except Exception as e:
            logger.error(f"❌ Run failed: {e}")
            exit_code = EXIT_ERROR

        if exit_code == EXIT_OK and self.check_failed:
            exit_code = EXIT_CHECK_FAILED

        self.writer.write_manifest(
            config_sha256=self.loaded.sha256,
            seed=self.seed,
            comparison=self._comparison(),
        )
        status = "success" if exit_code == EXIT_OK else "failed"
        self._write_run_summary(
            run_id=run_id,
            command=command,
            started_at=started_at,
            ended_at=datetime.now(timezone.utc),
            status=status,
            steps=steps,
        )

        logger.info("=" * 60)
        logger.info(f"{'✅' if exit_code == EXIT_OK else '❌'} eigenprice {command} finished with exit code {exit_code}")
        logger.info(f"   Output: {self.output_dir}")
        logger.info("=" * 60)
        return exit_code


# ─────────────────────────────────────────────────────────────────────────────
# plotdata
# ─────────────────────────────────────────────────────────────────────────────


def _series(x: Any, y: Any) -> pd.DataFrame:
    return pd.DataFrame({"x": np.asarray(x), "y": np.asarray(y)})


def emit_plot_data(output_dir: Path) -> List[Path]:
    """Re-emit existing artifacts as (x, y) series CSVs and add them to the manifest.

    Never reads its own output, so repeated calls give identical files.
    """
    writer = resume_writer(output_dir)
    written: List[Path] = []

    eigenpair_csv = output_dir / "eigenpair.csv"
    central: Optional[int] = None
    if eigenpair_csv.exists():
        frame = pd.read_csv(eigenpair_csv)
        central = int(frame["weight"].to_numpy().argmax())
        written.append(writer.write_csv("plot_phi.csv", _series(frame["x0"], frame["phi"])))
        written.append(writer.write_csv("plot_phi_star.csv", _series(frame["x0"], frame["phi_star"])))

    yield_csv = output_dir / "yield_curve.csv"
    if yield_csv.exists():
        frame = pd.read_csv(yield_csv)
        point = central if central is not None else int(frame["point"].min())
        rows = frame[frame["point"] == point]
        written.append(writer.write_csv("plot_yield_curve.csv", _series(rows["horizon"], rows["yield"])))

    errors_csv = output_dir / "long_run_errors.csv"
    if errors_csv.exists():
        frame = pd.read_csv(errors_csv)
        written.append(writer.write_csv("plot_long_run_errors.csv", _series(frame["n"], frame["error"])))

    decomposition_csv = output_dir / "decomposition.csv"
    if decomposition_csv.exists():
        frame = pd.read_csv(decomposition_csv)
        written.append(writer.write_csv("plot_pi_tilde.csv", _series(frame["x0"], frame["pi_tilde"])))

    habit_csv = output_dir / "habit_solution.csv"
    if habit_csv.exists():
        frame = pd.read_csv(habit_csv)
        written.append(writer.write_csv("plot_habit.csv", _series(frame["x0"], frame["h"])))

    if not written:
        logger.warning(f"⚠️  No artifacts found in {output_dir}; run a pipeline first")
    elif (output_dir / MANIFEST_NAME).exists():
        writer.write_manifest(**read_manifest_header(output_dir))
    return written


# ─────────────────────────────────────────────────────────────────────────────
# CLI
# ─────────────────────────────────────────────────────────────────────────────


def resolve_output_dir(args_out: Optional[str], env: EnvOverrides, config: Optional[RunConfig], config_path: Optional[Path], project_root: Path) -> Path:
    """--out > EIGENPRICE_OUTPUT_DIR > [output].directory > output/<config stem>."""
    if args_out:
        return Path(args_out)
    if env.output_dir is not None:
        return env.output_dir
    if config is not None and config.output.directory:
        return Path(config.output.directory)
    stem = config_path.stem if config_path is not None else "eigenprice"
    return project_root / "output" / stem


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Build, check and solve discretized pricing operators.",
        epilog="Example: python3 scripts/eigenprice.py run --config configs/ccapm_ar1.toml",
    )
    parser.add_argument("command", nargs="?", default="run", choices=COMMANDS, help="pipeline to run (default: run)")
    parser.add_argument("--config", help="TOML or JSON run configuration")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="artifact directory")
    parser.add_argument("--strict", action="store_true", help="abort on the first failing check")
    parser.add_argument("--dense-limit", type=int, help="largest n for the dense eigendecomposition")
    parser.add_argument("--check-env", action="store_true", help="run environment sanity checks and exit")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run the eigenprice CLI.

    Args:
        argv: Command-line arguments (defaults to sys.argv if None).

    Returns:
        Process exit code (see module docstring).
    """
    configure_logging()
    project_root = Path(__file__).parent.parent
    args = build_parser().parse_args(argv)

    if args.check_env:
        return EXIT_OK if run_sanity_checks(project_root) else EXIT_ERROR

    try:
        env = EnvOverrides.load(project_root)
        loaded = load_config(Path(args.config)) if args.config else None
        if loaded is None and args.command != "plotdata":
            raise ConfigError("--config is required for this subcommand")
        config = loaded.config if loaded is not None else None
        output_dir = resolve_output_dir(args.out, env, config, loaded.path if loaded else None, project_root)

        if args.command == "plotdata":
            emit_plot_data(output_dir)
            return EXIT_OK

        assert loaded is not None and config is not None
        if args.command == "habit" and config.habit is None:
            raise ConfigError("the habit subcommand needs a [habit] section")
        dense_limit = args.dense_limit or config.solver.dense_limit or env.dense_limit
        run = EigenpriceRun(loaded, output_dir, seed=args.seed, dense_limit=dense_limit, strict=args.strict)
    except ConfigError as e:
        logger.error(f"❌ Configuration error: {e}")
        return EXIT_CONFIG

    try:
        return run.execute(args.command)
    except Exception as e:
        logger.error(f"❌ Fatal error: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
