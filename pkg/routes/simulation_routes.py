from fastapi import APIRouter, Depends
from starlette.concurrency import run_in_threadpool

from config.settings import Settings
from dependencies import parse_model, settings_dependency
from models.sim_config import SimConfig
from serializers.simulation_serializer import CompareReportSerializer, SimResultSerializer, SimulationRequest
from services.reports import compare_report, simulation_summary
from services.simulator import simulate

router = APIRouter()


def _config(payload: SimulationRequest, settings: Settings) -> SimConfig:
    return SimConfig(
        model=parse_model(payload.model),
        seed=payload.seed,
        num_departures=payload.departures,
        warmup_fraction=payload.warmup_fraction,
        replications=payload.replications,
        queue_ceiling=settings.queue_ceiling,
    )


@router.post("/run", response_model=SimResultSerializer)
async def run_simulation(payload: SimulationRequest, settings: Settings = Depends(settings_dependency)):
    result = await run_in_threadpool(simulate, _config(payload, settings))
    return simulation_summary(result)


@router.post("/compare", response_model=CompareReportSerializer)
async def compare(payload: SimulationRequest, settings: Settings = Depends(settings_dependency)):
    report, _ = await run_in_threadpool(compare_report, _config(payload, settings), settings)
    return report
