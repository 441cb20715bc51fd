"""Command-line front end: solve, heavy-traffic, sweeps, densities, simulations and comparisons.

Exit codes: 0 success, 2 invalid input, 3 solver failure / invalid heavy-traffic result / failed comparison.
"""
import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from config.logging_config import setup_logging
from config.settings import get_settings
from models.epochs import Epoch
from models.model_spec import ModelSpec, load_model_spec
from models.sim_config import SimConfig
from serializers.manifest_serializer import OutputEntry, RunManifest
from services.errors import ModelValidationError, QueueSolverError
from services.reports import (
    PmfHook,
    baseline_rows,
    compare_report,
    density_report,
    ht_report,
    lambdas_from_rhos,
    simulation_summary,
    solve_report,
    sweep_rows,
    write_json,
    write_manifest,
    write_pmf_csv,
    write_rows_csv,
)
from services.simulator import simulate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3

SWEEP_COLUMNS = [
    "index",
    "lambda",
    "rho",
    "mean_departure",
    "mean_batch_arrival",
    "mean_customer_arrival",
    "mean_arbitrary",
    "scaled_mean",
    "ht_mean",
    "sim_mean_departure",
    "sim_half_width_departure",
    "sim_mean_batch_arrival",
    "sim_half_width_batch_arrival",
    "sim_mean_customer_arrival",
    "sim_half_width_customer_arrival",
    "sim_mean_arbitrary",
    "sim_half_width_arbitrary",
    "error",
]
DENSITY_COLUMNS = ["x_left", "x_right", "x_mid", "density", "reference_density", "cdf", "reference_cdf"]


class InputError(Exception):
    """Bad flags or files; maps to exit code 2."""


# ------------------------
# Parsing helpers
# ------------------------
def parse_grid(text: str) -> List[float]:
    """'a:b:step' (inclusive of b) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(part) for part in text.split(":"))
            if step <= 0 or stop < start:
                raise InputError(f"grid {text!r} needs step > 0 and stop >= start")
            return [float(v) for v in np.arange(start, stop + step / 2, step)]
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InputError(f"cannot parse grid {text!r}; expected a:b:step or v1,v2,...")


def load_model_file(path: str) -> ModelSpec:
    try:
        document = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"model file {path} does not exist")
    except json.JSONDecodeError as exc:
        raise InputError(f"model file {path} is not valid JSON: {exc}")
    return load_model_spec(document)


def _sim_config(args, model: ModelSpec) -> SimConfig:
    try:
        return SimConfig(
            model=model,
            seed=args.seed,
            num_departures=args.departures,
            replications=args.replications,
            queue_ceiling=get_settings().queue_ceiling,
        )
    except ValidationError as exc:
        first = exc.errors()[0]
        raise InputError(f"{'.'.join(str(p) for p in first['loc'])}: {first['msg']}")


# ------------------------
# Commands
# ------------------------
def cmd_solve(args, manifest: RunManifest, out: Path, **_) -> int:
    model = load_model_file(args.model)
    manifest.model_hash = model.fingerprint()
    epochs = [Epoch(e) for e in (args.epoch or [Epoch.DEPARTURE.value])]
    response, pmfs = solve_report(model, get_settings(), epochs, with_pmf=False)
    path = write_json(out / "solution.json", response)
    manifest.outputs.append(OutputEntry(path=str(path), kind="json", description="roots, f(0), rho, pi, f(1)"))
    if args.pmf:
        for epoch, pmf in pmfs.items():
            csv = write_pmf_csv(out / f"pmf_{epoch.value}.csv", [pmf])
            manifest.outputs.append(OutputEntry(path=str(csv), kind="csv", description=f"{epoch.value} pmf"))
    return EXIT_OK


def cmd_ht(args, manifest: RunManifest, out: Path, **_) -> int:
    model = load_model_file(args.model)
    manifest.model_hash = model.fingerprint()
    summary, result = ht_report(model)
    path = write_json(out / "ht.json", summary)
    manifest.outputs.append(OutputEntry(path=str(path), kind="json", description="heavy-traffic rate and terms"))
    if not result.valid and not args.allow_invalid:
        logger.error(f"InvalidHTDenominator: denominator {result.denominator:.6g} is not positive")
        return EXIT_SOLVER
    return EXIT_OK


def cmd_sweep(args, manifest: RunManifest, out: Path, **_) -> int:
    model = load_model_file(args.model)
    manifest.model_hash = model.fingerprint()
    if (args.lambda_grid is None) == (args.rho_grid is None):
        raise InputError("pass exactly one of --lambda-grid or --rho-grid")
    if args.rho_grid is not None:
        rhos = parse_grid(args.rho_grid)
        if any(not 0 < r < 1 for r in rhos):
            raise InputError("every --rho-grid value must lie in (0, 1)")
        lambdas = lambdas_from_rhos(model, rhos)
    else:
        lambdas = parse_grid(args.lambda_grid)
        if any(lam <= 0 for lam in lambdas):
            raise InputError("every --lambda-grid value must be positive")

    settings = get_settings()
    simulation = None
    if args.with_simulation:
        config = _sim_config(args, model)
        simulation = {
            "seed": config.seed,
            "num_departures": config.num_departures,
            "replications": config.replications,
            "queue_ceiling": config.queue_ceiling,
        }
    rows = sweep_rows(model, lambdas, settings, simulation)
    path = write_rows_csv(out / "sweep.csv", rows, SWEEP_COLUMNS)
    manifest.outputs.append(OutputEntry(path=str(path), kind="csv", description="sweep over the grid"))
    if args.baseline:
        baseline = baseline_rows(model, lambdas, settings)
        path = write_rows_csv(out / "sweep_baseline.csv", baseline, SWEEP_COLUMNS)
        manifest.outputs.append(OutputEntry(path=str(path), kind="csv", description="uncorrelated baseline sweep"))
    return EXIT_OK


def cmd_density(args, manifest: RunManifest, out: Path, **_) -> int:
    if args.bins < 10:
        raise InputError(f"--bins must be at least 10, got {args.bins}")
    if not 0 < args.rho < 1:
        raise InputError(f"--rho must lie in (0, 1), got {args.rho}")
    model = load_model_file(args.model)
    manifest.model_hash = model.fingerprint()
    report = density_report(model, args.rho, args.bins, get_settings(), Epoch(args.epoch or Epoch.DEPARTURE.value))
    csv = write_rows_csv(out / "density.csv", report.rows, DENSITY_COLUMNS)
    summary = write_json(
        out / "density.json",
        {"rho": report.rho, "eta": report.eta, "kolmogorov_distance": report.kolmogorov_distance},
    )
    manifest.outputs.append(OutputEntry(path=str(csv), kind="csv", description="scaled density vs exponential"))
    manifest.outputs.append(OutputEntry(path=str(summary), kind="json", description="Kolmogorov distance"))
    return EXIT_OK


def cmd_compare(args, manifest: RunManifest, out: Path, pmf_hook: Optional[PmfHook] = None) -> int:
    model = load_model_file(args.model)
    manifest.model_hash = model.fingerprint()
    report, _ = compare_report(_sim_config(args, model), get_settings(), pmf_hook=pmf_hook)
    path = write_json(out / "compare.json", report)
    manifest.outputs.append(OutputEntry(path=str(path), kind="json", description="solver vs simulator"))
    if not report.passed:
        logger.error(f"comparison failed for epochs: {', '.join(e.value for e in report.failed_epochs)}")
        return EXIT_SOLVER
    return EXIT_OK


def cmd_simulate(args, manifest: RunManifest, out: Path, **_) -> int:
    model = load_model_file(args.model)
    manifest.model_hash = model.fingerprint()
    result = simulate(_sim_config(args, model))
    path = write_json(out / "simulation.json", simulation_summary(result))
    manifest.outputs.append(OutputEntry(path=str(path), kind="json", description="simulation statistics"))
    for epoch in Epoch:
        csv = write_pmf_csv(out / f"sim_{epoch.value}.csv", [result.pmfs[epoch]], value_column="frequency")
        manifest.outputs.append(OutputEntry(path=str(csv), kind="csv", description=f"simulated {epoch.value} pmf"))
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "ht": cmd_ht,
    "sweep": cmd_sweep,
    "density": cmd_density,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
}


# ------------------------
# Parser
# ------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smq", description="Batch-Poisson semi-Markov queue solver")
    sub = parser.add_subparsers(dest="command", required=True)
    epochs = [e.value for e in Epoch]

    def common(p):
        p.add_argument("--model", required=True, help="Model JSON file")
        p.add_argument("--out", default=".", help="Output directory")

    def simulation_flags(p):
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--departures", type=int, default=1_000_000)
        p.add_argument("--replications", type=int, default=1)

    p = sub.add_parser("solve", help="Solve the stationary distribution")
    common(p)
    p.add_argument("--epoch", action="append", choices=epochs, help="Epoch to report (repeatable)")
    p.add_argument("--pmf", action="store_true", help="Write pmf CSVs")

    p = sub.add_parser("ht", help="Heavy-traffic rate")
    common(p)
    p.add_argument("--allow-invalid", action="store_true", help="Exit 0 even when the limit is not exponential")

    p = sub.add_parser("sweep", help="Sweep lambda or rho")
    common(p)
    p.add_argument("--lambda-grid", help="a:b:step or comma list of arrival rates")
    p.add_argument("--rho-grid", help="a:b:step or comma list of traffic intensities")
    p.add_argument("--baseline", action="store_true", help="Also sweep the uncorrelated baseline")
    p.add_argument("--with-simulation", action="store_true", help="Append simulated means")
    simulation_flags(p)

    p = sub.add_parser("density", help="Scaled queue-length density against the exponential limit")
    common(p)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--epoch", choices=epochs, default=Epoch.DEPARTURE.value)

    p = sub.add_parser("compare", help="Solver against simulator")
    common(p)
    simulation_flags(p)

    p = sub.add_parser("simulate", help="Simulate and export empirical pmfs")
    common(p)
    simulation_flags(p)
    return parser


def main(argv: Optional[List[str]] = None, pmf_hook: Optional[PmfHook] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command=args.command,
        config={key: value for key, value in vars(args).items() if key != "command"}
        | {"settings": get_settings().model_dump()},
    )
    try:
        code = COMMANDS[args.command](args, manifest, out, pmf_hook=pmf_hook)
    except ModelValidationError as exc:
        logger.error(f"ModelValidationError at {exc.path}: {exc.message}")
        code = EXIT_INVALID
    except InputError as exc:
        logger.error(f"invalid input: {exc}")
        code = EXIT_INVALID
    except QueueSolverError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        code = EXIT_SOLVER
    manifest.exit_code = code
    manifest.finished_at = datetime.now(timezone.utc)
    write_manifest(out, manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())
