from typing import Annotated, List, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


# ------------------------
# Duration families
# ------------------------
# Each family exposes its Laplace-Stieltjes transform E[exp(-sT)], the first
# derivative of that transform in s, the first two moments and a sampler that
# draws from a stream offering standard exponentials and uniforms.


class Exponential(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: Literal["exponential"] = "exponential"
    rate: float = Field(..., gt=0, description="Rate of the exponential duration")

    def transform(self, s):
        return self.rate / (self.rate + s)

    def transform_derivative(self, s):
        return -self.rate / (self.rate + s) ** 2

    def mean(self) -> float:
        return 1.0 / self.rate

    def second_moment(self) -> float:
        return 2.0 / self.rate**2

    def draw(self, stream) -> float:
        return stream.exponential() / self.rate


class Erlang(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: Literal["erlang"] = "erlang"
    shape: int = Field(..., ge=1, description="Number of exponential phases")
    rate: float = Field(..., gt=0, description="Rate of every phase")

    def transform(self, s):
        return (self.rate / (self.rate + s)) ** self.shape

    def transform_derivative(self, s):
        return -self.shape * self.rate**self.shape / (self.rate + s) ** (self.shape + 1)

    def mean(self) -> float:
        return self.shape / self.rate

    def second_moment(self) -> float:
        return self.shape * (self.shape + 1) / self.rate**2

    def draw(self, stream) -> float:
        total = 0.0
        for _ in range(self.shape):
            total += stream.exponential()
        return total / self.rate


class Deterministic(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: Literal["deterministic"] = "deterministic"
    value: float = Field(..., ge=0, description="Constant duration")

    def transform(self, s):
        return np.exp(-s * self.value)

    def transform_derivative(self, s):
        return -self.value * np.exp(-s * self.value)

    def mean(self) -> float:
        return self.value

    def second_moment(self) -> float:
        return self.value**2

    def draw(self, stream) -> float:
        return self.value


class Hyperexponential2(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: Literal["hyperexponential2"] = "hyperexponential2"
    p: float = Field(..., ge=0, le=1, description="Probability of the first phase")
    rate1: float = Field(..., gt=0, description="Rate of the first phase")
    rate2: float = Field(..., gt=0, description="Rate of the second phase")

    def transform(self, s):
        return self.p * self.rate1 / (self.rate1 + s) + (1 - self.p) * self.rate2 / (self.rate2 + s)

    def transform_derivative(self, s):
        return -self.p * self.rate1 / (self.rate1 + s) ** 2 - (1 - self.p) * self.rate2 / (self.rate2 + s) ** 2

    def mean(self) -> float:
        return self.p / self.rate1 + (1 - self.p) / self.rate2

    def second_moment(self) -> float:
        return 2 * self.p / self.rate1**2 + 2 * (1 - self.p) / self.rate2**2

    def draw(self, stream) -> float:
        rate = self.rate1 if stream.uniform() < self.p else self.rate2
        return stream.exponential() / rate


BasicDistribution = Annotated[
    Union[Exponential, Erlang, Deterministic, Hyperexponential2],
    Field(discriminator="family"),
]


class MixtureComponent(BaseModel):
    model_config = ConfigDict(frozen=True)

    weight: float = Field(..., ge=0, le=1, description="Mixing probability")
    distribution: BasicDistribution


class Mixture(BaseModel):
    """Finite mixture of the basic families (used for the uncorrelated baseline)."""

    model_config = ConfigDict(frozen=True)

    family: Literal["mixture"] = "mixture"
    components: List[MixtureComponent] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_weights(self):
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {total:.12g}, expected 1")
        return self

    def transform(self, s):
        return sum(c.weight * c.distribution.transform(s) for c in self.components)

    def transform_derivative(self, s):
        return sum(c.weight * c.distribution.transform_derivative(s) for c in self.components)

    def mean(self) -> float:
        return sum(c.weight * c.distribution.mean() for c in self.components)

    def second_moment(self) -> float:
        return sum(c.weight * c.distribution.second_moment() for c in self.components)

    def draw(self, stream) -> float:
        u = stream.uniform()
        acc = 0.0
        for component in self.components:
            acc += component.weight
            if u < acc:
                return component.distribution.draw(stream)
        return self.components[-1].distribution.draw(stream)


DurationDistribution = Annotated[
    Union[Exponential, Erlang, Deterministic, Hyperexponential2, Mixture],
    Field(discriminator="family"),
]
