import math
from typing import Optional

from models.batch_model import FiniteBatch
from models.distributions import Erlang, Exponential, Mixture, MixtureComponent
from models.model_spec import KernelEntry, ModelSpec
from services.queue_model import stationary_pi

TWO_TYPE_P11 = 0.9
TWO_TYPE_P22 = 0.951138
# alpha_ij / lambda for the two-type example
TWO_TYPE_LOADS = ((1.0, 3.0), (10.0, 20.0))


def mm1_model(lam: float = 0.5, mu: float = 1.0) -> ModelSpec:
    return ModelSpec(
        lam=lam,
        batch=FiniteBatch(pmf=[1.0]),
        N=1,
        G=[[KernelEntry(weight=1.0, duration=Exponential(rate=mu))]],
    )


def two_type_exact_p22() -> float:
    """P22 that zeroes the two-type independence condition: P21 solves 3x^2 + 1.9x - 0.1 = 0."""
    p21 = (-1.9 + math.sqrt(1.9**2 + 1.2)) / 6.0
    return 1.0 - p21


def two_type_model(lam: float, p22: Optional[float] = None) -> ModelSpec:
    """Two types, single arrivals, Erlang(i+j) durations with alpha_ij = lambda * TWO_TYPE_LOADS[i][j]."""
    p22 = TWO_TYPE_P22 if p22 is None else p22
    P = ((TWO_TYPE_P11, 1.0 - TWO_TYPE_P11), (1.0 - p22, p22))
    G = []
    for i in range(2):
        row = []
        for j in range(2):
            shape = i + j + 2
            # alpha_ij = lambda * P_ij * shape / mu_ij
            rate = P[i][j] * shape / TWO_TYPE_LOADS[i][j]
            row.append(KernelEntry(weight=P[i][j], duration=Erlang(shape=shape, rate=rate)))
        G.append(row)
    return ModelSpec(lam=lam, batch=FiniteBatch(pmf=[1.0]), N=2, G=G)


def _flatten(duration, weight: float):
    if isinstance(duration, Mixture):
        for component in duration.components:
            yield from _flatten(component.distribution, weight * component.weight)
    else:
        yield MixtureComponent(weight=weight, distribution=duration)


def _stationary_mixture(kernel, pi) -> Mixture:
    components = []
    for i, row in enumerate(kernel):
        for entry in row:
            if entry.weight > 0:
                components.extend(_flatten(entry.duration, float(pi[i]) * entry.weight))
    total = math.fsum(c.weight for c in components)
    return Mixture(components=[MixtureComponent(weight=c.weight / total, distribution=c.distribution) for c in components])


def uncorrelated_baseline(model: ModelSpec) -> ModelSpec:
    """Single-type queue whose service law is the stationary mixture of the kernel rows; same lambda and batch."""
    pi = stationary_pi(model.routing_matrix()).pi
    regular = _stationary_mixture(model.G, pi)
    exceptional = _stationary_mixture(model.Gstar, pi)
    return ModelSpec(
        lam=model.lam,
        batch=model.batch,
        N=1,
        G=[[KernelEntry(weight=1.0, duration=regular)]],
        Gstar=[[KernelEntry(weight=1.0, duration=exceptional)]],
    )
