from enum import Enum


class Epoch(str, Enum):
    DEPARTURE = "departure"
    BATCH_ARRIVAL = "batch-arrival"
    CUSTOMER_ARRIVAL = "customer-arrival"
    ARBITRARY = "arbitrary"


class Provenance(str, Enum):
    ANALYTIC = "analytic"
    SIMULATED = "simulated"
