from pydantic import BaseModel, ConfigDict, Field

from models.model_spec import ModelSpec


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: ModelSpec
    seed: int = Field(42, ge=0, lt=2**64, description="Base seed; replications derive their streams from it")
    num_departures: int = Field(1_000_000, ge=1000, description="Departures per replication, warmup included")
    warmup_fraction: float = Field(0.1, ge=0, lt=1, description="Share of departures discarded before recording")
    replications: int = Field(1, ge=1, description="Independent replications")
    queue_ceiling: int = Field(10_000_000, ge=1, description="Queue length at which a run is declared unstable")
    workers: int = Field(1, ge=1, description="Processes used for replications")
