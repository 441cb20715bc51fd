import logging

from fastapi import APIRouter, Depends, HTTPException
from starlette.concurrency import run_in_threadpool

from config.settings import Settings
from dependencies import parse_model, settings_dependency
from serializers.solution_serializer import SolveRequest, SolveResponse, SweepRequest, SweepResponse
from services.reports import baseline_rows, lambdas_from_rhos, solve_report, sweep_rows

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/solve", response_model=SolveResponse)
async def solve_model(payload: SolveRequest, settings: Settings = Depends(settings_dependency)):
    model = parse_model(payload.model)
    logger.info(f"solve requested for model {model.fingerprint()[:12]}")
    response, _ = await run_in_threadpool(
        solve_report, model, settings, payload.epochs, with_pmf=False, truncation=payload.truncation
    )
    return response


@router.post("/pmf", response_model=SolveResponse)
async def queue_length_pmf(payload: SolveRequest, settings: Settings = Depends(settings_dependency)):
    model = parse_model(payload.model)
    response, _ = await run_in_threadpool(
        solve_report, model, settings, payload.epochs, with_pmf=True, truncation=payload.truncation
    )
    return response


@router.post("/sweep", response_model=SweepResponse)
async def sweep(payload: SweepRequest, settings: Settings = Depends(settings_dependency)):
    if (payload.lambdas is None) == (payload.rhos is None):
        raise HTTPException(status_code=422, detail="Provide exactly one of 'lambdas' or 'rhos'")
    model = parse_model(payload.model)
    lambdas = payload.lambdas if payload.lambdas is not None else lambdas_from_rhos(model, payload.rhos)
    rows = await run_in_threadpool(sweep_rows, model, lambdas, settings)
    baseline = await run_in_threadpool(baseline_rows, model, lambdas, settings) if payload.baseline else []
    return SweepResponse(rows=rows, baseline=baseline)
