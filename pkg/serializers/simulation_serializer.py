from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from models.epochs import Epoch


class SimulationRequest(BaseModel):
    model: dict = Field(..., description="Model document")
    seed: int = Field(42, ge=0)
    departures: int = Field(100_000, ge=1000)
    replications: int = Field(1, ge=1)
    warmup_fraction: float = Field(0.1, ge=0, lt=1)


class EpochStatisticsSerializer(BaseModel):
    epoch: Epoch
    mean: float
    variance: float
    half_width: Optional[float] = Field(None, description="95% confidence half-width of the mean")
    frequencies: List[float]


class SimResultSerializer(BaseModel):
    epochs: List[EpochStatisticsSerializer]
    utilization: float
    utilization_half_width: Optional[float] = None
    empty_by_next_type: List[float] = Field(..., description="Departures leaving the system empty, by next type")
    starred_fraction: float = Field(..., description="Share of services drawn from the exceptional kernel")
    service_start_types: List[float] = Field(..., description="Type frequencies at regular service starts")
    mean_sojourn: float
    sojourn_half_width: Optional[float] = None
    seed: int
    departures_recorded: int
    warmup_departures: int
    replications: int
    half_width_method: str


class EpochComparisonSerializer(BaseModel):
    epoch: Epoch
    total_variation: float
    analytic_mean: float
    simulated_mean: float
    half_width: Optional[float] = None
    mean_delta_half_widths: Optional[float] = Field(None, description="|analytic - simulated| / half-width")
    passed: bool


class CompareReportSerializer(BaseModel):
    passed: bool
    failed_epochs: List[Epoch]
    thresholds: Dict[str, float]
    epochs: List[EpochComparisonSerializer]
    seed: int
    departures: int
    replications: int
