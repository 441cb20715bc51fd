import math
from typing import Annotated, List, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class FiniteBatch(BaseModel):
    """Batch size with finite support {1..K}; pmf[k-1] is P(B=k), so B=0 cannot be expressed."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["finite"] = "finite"
    pmf: List[float] = Field(default_factory=lambda: [1.0], min_length=1, description="P(B=1), P(B=2), ...")

    @field_validator("pmf")
    def validate_pmf(cls, pmf: List[float]) -> List[float]:
        if any(p < 0 for p in pmf):
            raise ValueError("batch probabilities must be nonnegative")
        total = math.fsum(pmf)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"batch probabilities sum to {total:.12g}, expected 1")
        return pmf

    def pgf(self, z):
        z = np.asarray(z, dtype=complex)
        # Horner on sum_k p_k z^k
        acc = np.zeros_like(z)
        for p in reversed(self.pmf):
            acc = (acc + p) * z
        return acc

    def pgf_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z)
        for k in range(len(self.pmf), 0, -1):
            acc = acc * z + k * self.pmf[k - 1]
        return acc

    def mean(self) -> float:
        return math.fsum(k * p for k, p in enumerate(self.pmf, start=1))

    def second_moment(self) -> float:
        return math.fsum(k * k * p for k, p in enumerate(self.pmf, start=1))

    def draw(self, stream) -> int:
        u = stream.uniform()
        acc = 0.0
        for k, p in enumerate(self.pmf, start=1):
            acc += p
            if u < acc:
                return k
        return len(self.pmf)


class GeometricBatch(BaseModel):
    """Geometric batch size on {1,2,...}: P(B=k) = p(1-p)^(k-1)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["geometric"] = "geometric"
    p: float = Field(..., gt=0, le=1, description="Success parameter")

    def pgf(self, z):
        z = np.asarray(z, dtype=complex)
        return self.p * z / (1 - (1 - self.p) * z)

    def pgf_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return self.p / (1 - (1 - self.p) * z) ** 2

    def mean(self) -> float:
        return 1.0 / self.p

    def second_moment(self) -> float:
        return (2.0 - self.p) / self.p**2

    def draw(self, stream) -> int:
        if self.p >= 1.0:
            return 1
        u = stream.uniform()
        return 1 + int(math.log1p(-u) / math.log1p(-self.p))


BatchDistribution = Annotated[Union[FiniteBatch, GeometricBatch], Field(discriminator="kind")]
