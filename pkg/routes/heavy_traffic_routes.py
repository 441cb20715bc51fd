from fastapi import APIRouter, Depends
from starlette.concurrency import run_in_threadpool

from config.settings import Settings
from dependencies import parse_model, settings_dependency
from serializers.ht_serializer import DensityRequest, DensityResponse, HTRequest, HTSerializer
from services.reports import density_report, ht_report

router = APIRouter()


@router.post("/rate", response_model=HTSerializer)
async def heavy_traffic_rate(payload: HTRequest):
    summary, _ = await run_in_threadpool(ht_report, parse_model(payload.model))
    return summary


@router.post("/density", response_model=DensityResponse)
async def scaled_density(payload: DensityRequest, settings: Settings = Depends(settings_dependency)):
    model = parse_model(payload.model)
    return await run_in_threadpool(density_report, model, payload.rho, payload.bins, settings)
