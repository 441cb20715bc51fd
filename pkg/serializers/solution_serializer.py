import math
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from models.epochs import Epoch, Provenance

SIGNIFICANT_DIGITS = 12


def sig(value: Optional[float], digits: int = SIGNIFICANT_DIGITS) -> Optional[float]:
    """Round to `digits` significant digits so exported numbers diff cleanly."""
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value) or value == 0.0:
        return value
    return float(f"{value:.{digits}g}")


def sig_list(values) -> List[float]:
    return [sig(v) for v in values]


# ------------------------
# Requests
# ------------------------
class SolveRequest(BaseModel):
    model: dict = Field(..., description="Model document (same schema as the CLI model file)")
    epochs: List[Epoch] = Field(default_factory=lambda: [Epoch.DEPARTURE], description="Epochs to report")
    truncation: Optional[int] = Field(None, ge=1, description="Fixed truncation M; adaptive when omitted")


class SweepRequest(BaseModel):
    model: dict = Field(..., description="Model document")
    lambdas: Optional[List[float]] = Field(None, description="Arrival rates to evaluate")
    rhos: Optional[List[float]] = Field(None, description="Traffic intensities to evaluate")
    baseline: bool = Field(False, description="Also sweep the uncorrelated single-type baseline")

    @field_validator("rhos")
    def validate_rhos(cls, rhos: Optional[List[float]]) -> Optional[List[float]]:
        if rhos is not None and any(not 0 < r < 1 for r in rhos):
            raise ValueError("every rho must lie in (0, 1)")
        return rhos


# ------------------------
# Responses
# ------------------------
class ComplexSerializer(BaseModel):
    re: float
    im: float


class SolutionSerializer(BaseModel):
    lam: float = Field(..., serialization_alias="lambda", description="Batch arrival rate")
    rho: float = Field(..., description="Traffic intensity")
    pi: List[float] = Field(..., description="Stationary vector of the routing matrix")
    roots: List[ComplexSerializer] = Field(..., description="Zeros of det M inside the unit disk")
    root_residual: float = Field(..., description="max |det M| at the polished zeros")
    f0: List[float] = Field(..., description="f_i(0): departure leaves the system empty, next type i")
    f1: List[float] = Field(..., description="f_i(1): stationary next-type mass at departures")
    empty_probability: float = Field(..., description="P(X = 0) at departure epochs")
    boundary_condition_number: float
    normalization_gap: float = Field(..., description="max |exact - finite-difference| over the normalization row")
    model_hash: str


class PmfSerializer(BaseModel):
    epoch: Epoch
    source: Provenance
    probabilities: List[float]
    tail: float = Field(..., description="1 - sum of the reported probabilities")
    mean: float
    truncation: int


class MeanSerializer(BaseModel):
    epoch: Epoch
    mean: float
    scaled_mean: float = Field(..., description="(1 - rho) * mean")
    truncation: int


class SolveResponse(BaseModel):
    solution: SolutionSerializer
    means: List[MeanSerializer]
    pmfs: List[PmfSerializer] = Field(default_factory=list)


class SweepRowSerializer(BaseModel):
    index: int
    lam: float = Field(..., serialization_alias="lambda")
    rho: Optional[float] = None
    mean_departure: Optional[float] = None
    mean_batch_arrival: Optional[float] = None
    mean_customer_arrival: Optional[float] = None
    mean_arbitrary: Optional[float] = None
    scaled_mean: Optional[float] = None
    ht_mean: Optional[float] = Field(None, description="1/eta, the heavy-traffic asymptote of scaled_mean")
    sim_mean_departure: Optional[float] = None
    sim_half_width_departure: Optional[float] = None
    sim_mean_batch_arrival: Optional[float] = None
    sim_half_width_batch_arrival: Optional[float] = None
    sim_mean_customer_arrival: Optional[float] = None
    sim_half_width_customer_arrival: Optional[float] = None
    sim_mean_arbitrary: Optional[float] = None
    sim_half_width_arbitrary: Optional[float] = None
    error: str = ""


class SweepResponse(BaseModel):
    rows: List[SweepRowSerializer]
    baseline: List[SweepRowSerializer] = Field(default_factory=list)
