from typing import List, Optional

from pydantic import BaseModel, Field


class HTRequest(BaseModel):
    model: dict = Field(..., description="Model document; its lambda is ignored")


class DensityRequest(BaseModel):
    model: dict = Field(..., description="Model document")
    rho: float = Field(..., gt=0, lt=1, description="Traffic intensity of the solved queue")
    bins: int = Field(50, ge=10, description="Number of equal-width bins on the scaled axis")


class HTSerializer(BaseModel):
    lambda_critical: float = Field(..., description="Arrival rate at which rho = 1")
    pi: List[float]
    alphabar: List[float] = Field(..., description="alpha_i at lambda*")
    alphahat_bar: float
    gammabar: List[float]
    qbar: List[float] = Field(..., description="q_k for k = 2..N")
    d1: float
    correction_term: float
    denominator: float = Field(..., description="1/eta when positive")
    eta: Optional[float] = Field(None, description="Rate of the exponential limit; null when invalid")
    valid: bool
    independence_condition: Optional[float] = Field(None, description="Two-type models only")


class DensityRowSerializer(BaseModel):
    x_left: float
    x_right: float
    x_mid: float
    density: float
    reference_density: float
    cdf: float
    reference_cdf: float


class DensityResponse(BaseModel):
    rho: float
    eta: float
    kolmogorov_distance: float
    rows: List[DensityRowSerializer]
