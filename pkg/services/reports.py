"""Report builders shared by the command line and the HTTP routes."""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from config.settings import Settings
from models.epochs import Epoch
from models.model_spec import ModelSpec
from models.sim_config import SimConfig
from serializers.ht_serializer import DensityResponse, DensityRowSerializer, HTSerializer
from serializers.manifest_serializer import RunManifest
from serializers.simulation_serializer import (
    CompareReportSerializer,
    EpochComparisonSerializer,
    EpochStatisticsSerializer,
    SimResultSerializer,
)
from serializers.solution_serializer import (
    ComplexSerializer,
    MeanSerializer,
    PmfSerializer,
    SolutionSerializer,
    SolveResponse,
    SweepRowSerializer,
    sig,
    sig_list,
)
from services.errors import InvalidHTDenominator, QueueSolverError
from services.heavy_traffic import HTResult, ht_rate
from services.inversion import QueueLengthPmf, adaptive_pmf, invert_pgf, mean_queue_length, total_variation
from services.model_library import uncorrelated_baseline
from services.queue_model import rate_for_rho, traffic_intensity
from services.simulator import SimResult, simulate
from services.stationary_solver import (
    StationarySolution,
    normalization_row,
    normalization_row_by_cofactors,
    solve,
)

logger = logging.getLogger(__name__)

PmfHook = Callable[[Epoch, QueueLengthPmf], QueueLengthPmf]


# ------------------------
# Solve
# ------------------------
def normalization_gap(solution: StationarySolution, fd_step: float) -> float:
    """max |exact - finite-difference| over the normalization row."""
    exact = normalization_row(solution.moments)
    numeric = normalization_row_by_cofactors(solution.model, solution.moments, step=fd_step)
    return float(np.max(np.abs(exact - numeric)))


def solution_summary(solution: StationarySolution, fd_step: float = 1e-6) -> SolutionSerializer:
    gap = normalization_gap(solution, fd_step)
    logger.debug(f"normalization row: exact and finite-difference forms differ by {gap:.3e} (step {fd_step:g})")
    return SolutionSerializer(
        lam=sig(solution.model.lam),
        rho=sig(solution.rho),
        pi=sig_list(solution.moments.pi),
        roots=[ComplexSerializer(re=sig(z.real), im=sig(z.imag)) for z in solution.roots.roots],
        root_residual=sig(solution.roots.residual),
        f0=sig_list(solution.boundary.f0),
        f1=sig_list(solution.f_one),
        empty_probability=sig(solution.boundary.empty_probability),
        boundary_condition_number=sig(solution.boundary.condition),
        normalization_gap=sig(gap),
        model_hash=solution.model.fingerprint(),
    )


def pmf_summary(pmf: QueueLengthPmf) -> PmfSerializer:
    return PmfSerializer(
        epoch=pmf.epoch,
        source=pmf.source,
        probabilities=sig_list(pmf.probabilities),
        tail=sig(pmf.tail),
        mean=sig(pmf.mean()),
        truncation=pmf.truncation,
    )


def epoch_pmfs(
    solution: StationarySolution,
    epochs: Iterable[Epoch],
    settings: Settings,
    truncation: Optional[int] = None,
) -> Dict[Epoch, QueueLengthPmf]:
    out = {}
    for epoch in epochs:
        if truncation is None:
            out[epoch] = adaptive_pmf(solution, epoch, rtol=settings.mean_rtol, ceiling=settings.truncation_ceiling)
        else:
            out[epoch] = invert_pgf(solution, epoch, truncation)
    return out


def solve_report(
    model: ModelSpec,
    settings: Settings,
    epochs: Iterable[Epoch] = (Epoch.DEPARTURE,),
    with_pmf: bool = False,
    truncation: Optional[int] = None,
) -> tuple[SolveResponse, Dict[Epoch, QueueLengthPmf]]:
    solution = solve(model)
    pmfs = epoch_pmfs(solution, epochs, settings, truncation)
    means = [
        MeanSerializer(
            epoch=epoch,
            mean=sig(pmf.mean()),
            scaled_mean=sig((1.0 - solution.rho) * pmf.mean()),
            truncation=pmf.truncation,
        )
        for epoch, pmf in pmfs.items()
    ]
    response = SolveResponse(
        solution=solution_summary(solution, settings.fd_step),
        means=means,
        pmfs=[pmf_summary(pmf) for pmf in pmfs.values()] if with_pmf else [],
    )
    return response, pmfs


# ------------------------
# Heavy traffic
# ------------------------
def ht_summary(result: HTResult) -> HTSerializer:
    return HTSerializer(
        lambda_critical=sig(result.lambda_critical),
        pi=sig_list(result.pi),
        alphabar=sig_list(result.alphabar),
        alphahat_bar=sig(result.alphahat_bar),
        gammabar=sig_list(result.gammabar),
        qbar=sig_list(result.qbar),
        d1=sig(result.d1),
        correction_term=sig(result.correction_term),
        denominator=sig(result.denominator),
        eta=sig(result.eta),
        valid=result.valid,
        independence_condition=sig(result.independence_condition),
    )


def ht_report(model: ModelSpec) -> tuple[HTSerializer, HTResult]:
    result = ht_rate(model)
    return ht_summary(result), result


# ------------------------
# Sweep
# ------------------------
def lambdas_from_rhos(model: ModelSpec, rhos: Iterable[float]) -> List[float]:
    return [rate_for_rho(model, rho) for rho in rhos]


def _sweep_point(
    model: ModelSpec,
    index: int,
    lam: float,
    settings: Settings,
    ht_mean: Optional[float],
    simulation: Optional[dict],
) -> SweepRowSerializer:
    row = {"index": index, "lam": sig(lam), "ht_mean": sig(ht_mean)}
    try:
        at_lam = model.with_rate(lam)
        row["rho"] = sig(traffic_intensity(at_lam))
        solution = solve(at_lam)
        means = {
            epoch: mean_queue_length(solution, epoch, rtol=settings.mean_rtol, ceiling=settings.truncation_ceiling)
            for epoch in Epoch
        }
        row["mean_departure"] = sig(means[Epoch.DEPARTURE].mean)
        row["mean_batch_arrival"] = sig(means[Epoch.BATCH_ARRIVAL].mean)
        row["mean_customer_arrival"] = sig(means[Epoch.CUSTOMER_ARRIVAL].mean)
        row["mean_arbitrary"] = sig(means[Epoch.ARBITRARY].mean)
        row["scaled_mean"] = sig(means[Epoch.DEPARTURE].scaled_mean)
        if simulation is not None:
            result = simulate(SimConfig(model=at_lam, **simulation))
            for epoch in Epoch:
                key = epoch.value.replace("-", "_")
                row[f"sim_mean_{key}"] = sig(result.means[epoch])
                row[f"sim_half_width_{key}"] = sig(result.half_widths[epoch])
    except QueueSolverError as exc:
        logger.warning(f"sweep point {index} (lambda={lam:.6g}) failed: {type(exc).__name__}: {exc}")
        row["error"] = f"{type(exc).__name__}: {exc}"
    return SweepRowSerializer(**row)


def sweep_rows(
    model: ModelSpec,
    lambdas: List[float],
    settings: Settings,
    simulation: Optional[dict] = None,
) -> List[SweepRowSerializer]:
    """One row per grid point, ordered by grid index whatever the completion order."""
    try:
        result = ht_rate(model)
        ht_mean = result.mean
    except QueueSolverError as exc:
        logger.warning(f"heavy-traffic asymptote unavailable: {exc}")
        ht_mean = None

    def point(args):
        index, lam = args
        return _sweep_point(model, index, lam, settings, ht_mean, simulation)

    if settings.sweep_workers > 1:
        with ThreadPoolExecutor(max_workers=settings.sweep_workers) as pool:
            return list(pool.map(point, enumerate(lambdas)))
    return [point(args) for args in enumerate(lambdas)]


def baseline_rows(model: ModelSpec, lambdas: List[float], settings: Settings) -> List[SweepRowSerializer]:
    return sweep_rows(uncorrelated_baseline(model), lambdas, settings)


# ------------------------
# Density of the scaled queue length
# ------------------------
def kolmogorov_distance(pmf: QueueLengthPmf, rho: float, eta: float) -> float:
    """sup_x |P((1 - rho) X <= x) - (1 - exp(-eta x))|, both sides of every jump."""
    x = (1.0 - rho) * np.arange(len(pmf.probabilities))
    reference = -np.expm1(-eta * x)
    after = np.cumsum(pmf.probabilities)
    before = after - pmf.probabilities
    return float(max(np.max(np.abs(after - reference)), np.max(np.abs(before - reference))))


def _step_cdf(positions: np.ndarray, cdf: np.ndarray, x: float) -> float:
    count = int(np.searchsorted(positions, x, side="right"))
    return float(cdf[count - 1]) if count > 0 else 0.0


def density_rows(pmf: QueueLengthPmf, rho: float, eta: float, bins: int) -> List[DensityRowSerializer]:
    if bins < 10:
        raise ValueError(f"bins must be at least 10, got {bins}")
    scale = 1.0 - rho
    positions = scale * np.arange(len(pmf.probabilities))
    cdf = np.cumsum(pmf.probabilities)
    reach = np.searchsorted(cdf, 1.0 - 1e-6)
    upper = max(positions[min(reach, len(positions) - 1)], -np.log(1e-6) / eta)
    edges = np.linspace(0.0, upper, bins + 1)
    # masses on [left, right); the last bin is closed
    index = np.clip(np.searchsorted(edges, positions, side="right") - 1, 0, bins - 1)
    inside = positions <= upper
    mass = np.bincount(index[inside], weights=pmf.probabilities[inside], minlength=bins)
    widths = np.diff(edges)
    rows = []
    for k in range(bins):
        left, right = edges[k], edges[k + 1]
        mid = 0.5 * (left + right)
        rows.append(
            DensityRowSerializer(
                x_left=sig(left),
                x_right=sig(right),
                x_mid=sig(mid),
                density=sig(mass[k] / widths[k]),
                reference_density=sig(eta * np.exp(-eta * mid)),
                cdf=sig(_step_cdf(positions, cdf, right)),
                reference_cdf=sig(-np.expm1(-eta * right)),
            )
        )
    return rows


def density_report(
    model: ModelSpec,
    rho: float,
    bins: int,
    settings: Settings,
    epoch: Epoch = Epoch.DEPARTURE,
) -> DensityResponse:
    result = ht_rate(model)
    if not result.valid:
        raise InvalidHTDenominator(f"heavy-traffic denominator {result.denominator:.6g} is not positive")
    solution = solve(model.with_rate(rate_for_rho(model, rho)))
    pmf = adaptive_pmf(solution, epoch, rtol=settings.mean_rtol, ceiling=settings.truncation_ceiling)
    distance = kolmogorov_distance(pmf, solution.rho, result.eta)
    logger.info(f"scaled {epoch.value} distribution at rho={rho:.4g}: Kolmogorov distance {distance:.4g}")
    return DensityResponse(
        rho=sig(solution.rho),
        eta=sig(result.eta),
        kolmogorov_distance=sig(distance),
        rows=density_rows(pmf, solution.rho, result.eta, bins),
    )


# ------------------------
# Simulation and comparison
# ------------------------
def simulation_summary(result: SimResult) -> SimResultSerializer:
    return SimResultSerializer(
        epochs=[
            EpochStatisticsSerializer(
                epoch=epoch,
                mean=sig(result.means[epoch]),
                variance=sig(result.variances[epoch]),
                half_width=sig(result.half_widths[epoch]),
                frequencies=sig_list(result.pmfs[epoch].probabilities),
            )
            for epoch in Epoch
        ],
        utilization=sig(result.utilization),
        utilization_half_width=sig(result.utilization_half_width),
        empty_by_next_type=sig_list(result.empty_by_next_type),
        starred_fraction=sig(result.starred_fraction),
        service_start_types=sig_list(result.service_start_types),
        mean_sojourn=sig(result.mean_sojourn),
        sojourn_half_width=sig(result.sojourn_half_width),
        seed=result.seed,
        departures_recorded=result.departures_recorded,
        warmup_departures=result.warmup_departures,
        replications=result.replications,
        half_width_method=result.metadata.get("half_width_method", ""),
    )


def compare_report(
    config: SimConfig,
    settings: Settings,
    pmf_hook: Optional[PmfHook] = None,
) -> tuple[CompareReportSerializer, SimResult]:
    """Solver against simulator per epoch: TV distance and mean delta in confidence half-widths."""
    solution = solve(config.model)
    analytic = epoch_pmfs(solution, list(Epoch), settings)
    if pmf_hook is not None:
        analytic = {epoch: pmf_hook(epoch, pmf) for epoch, pmf in analytic.items()}
    simulated = simulate(config)

    rows = []
    failed = []
    for epoch in Epoch:
        tv = total_variation(analytic[epoch].probabilities, simulated.pmfs[epoch].probabilities)
        analytic_mean = analytic[epoch].mean()
        simulated_mean = simulated.means[epoch]
        half_width = simulated.half_widths[epoch]
        delta = abs(analytic_mean - simulated_mean) / half_width if half_width and half_width > 0 else None
        passed = tv < settings.tv_threshold and (delta is None or delta <= settings.mean_sigma)
        if not passed:
            failed.append(epoch)
            logger.warning(f"{epoch.value}: TV {tv:.4g}, mean delta {delta} half-widths")
        rows.append(
            EpochComparisonSerializer(
                epoch=epoch,
                total_variation=sig(tv),
                analytic_mean=sig(analytic_mean),
                simulated_mean=sig(simulated_mean),
                half_width=sig(half_width),
                mean_delta_half_widths=sig(delta),
                passed=passed,
            )
        )
    report = CompareReportSerializer(
        passed=not failed,
        failed_epochs=failed,
        thresholds={"total_variation": settings.tv_threshold, "mean_half_widths": settings.mean_sigma},
        epochs=rows,
        seed=config.seed,
        departures=config.num_departures,
        replications=config.replications,
    )
    return report, simulated


# ------------------------
# Files
# ------------------------
def write_pmf_csv(path: Path, pmfs: Iterable[QueueLengthPmf], value_column: str = "probability") -> Path:
    frames = [
        pd.DataFrame({"n": np.arange(len(pmf.probabilities)), value_column: pmf.probabilities, "epoch": pmf.epoch.value})
        for pmf in pmfs
    ]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["n", value_column, "epoch"])
    frame.to_csv(path, index=False, float_format="%.12g")
    return path


def write_rows_csv(path: Path, rows: List, columns: Optional[List[str]] = None) -> Path:
    records = [row.model_dump(by_alias=True) for row in rows]
    frame = pd.DataFrame.from_records(records, columns=columns)
    frame.to_csv(path, index=False, float_format="%.12g")
    return path


def write_json(path: Path, payload) -> Path:
    if hasattr(payload, "model_dump_json"):
        path.write_text(payload.model_dump_json(indent=2, by_alias=True))
    else:
        path.write_text(json.dumps(payload, indent=2))
    return path


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    return write_json(out_dir / "manifest.json", manifest)
