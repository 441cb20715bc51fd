import numpy as np
import pytest

from models.batch_model import FiniteBatch, GeometricBatch
from models.distributions import Erlang, Exponential, Hyperexponential2
from models.model_spec import KernelEntry, ModelSpec
from services.model_library import mm1_model, two_type_model
from services.queue_model import rate_for_rho

TWO_TYPE_LAMBDA = 0.02


def _random_duration(rng: np.random.Generator):
    family = rng.integers(3)
    if family == 0:
        return Exponential(rate=float(rng.uniform(0.5, 3.0)))
    if family == 1:
        return Erlang(shape=int(rng.integers(1, 4)), rate=float(rng.uniform(0.5, 4.0)))
    return Hyperexponential2(
        p=float(rng.uniform(0.1, 0.9)), rate1=float(rng.uniform(0.3, 1.5)), rate2=float(rng.uniform(1.5, 5.0))
    )


def _random_kernel(rng: np.random.Generator, n: int):
    weights = rng.dirichlet(np.ones(n), size=n)
    kernel = []
    for i in range(n):
        row = weights[i] / weights[i].sum()
        row[-1] = 1.0 - row[:-1].sum()
        kernel.append([KernelEntry(weight=float(row[j]), duration=_random_duration(rng)) for j in range(n)])
    return kernel


def random_model(rng: np.random.Generator, n: int, rho_low: float = 0.1, rho_high: float = 0.9) -> ModelSpec:
    """Irreducible model with positive routing weights, random families and batch law, scaled to a random rho."""
    if rng.random() < 0.5:
        batch = FiniteBatch(pmf=[1.0])
    elif rng.random() < 0.5:
        pmf = rng.dirichlet(np.ones(3))
        pmf[-1] = 1.0 - pmf[:-1].sum()
        batch = FiniteBatch(pmf=[float(p) for p in pmf])
    else:
        batch = GeometricBatch(p=float(rng.uniform(0.4, 0.9)))
    model = ModelSpec(lam=1.0, batch=batch, N=n, G=_random_kernel(rng, n), Gstar=_random_kernel(rng, n))
    rho = float(rng.uniform(rho_low, rho_high))
    return model.with_rate(rate_for_rho(model, rho))


@pytest.fixture
def mm1():
    return mm1_model(lam=0.5, mu=1.0)


@pytest.fixture
def two_type():
    return two_type_model(TWO_TYPE_LAMBDA)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def erlang_mg1(lam: float, shape: int = 2, rate: float = 2.0, batch=None) -> ModelSpec:
    return ModelSpec(
        lam=lam,
        batch=batch or FiniteBatch(pmf=[1.0]),
        N=1,
        G=[[KernelEntry(weight=1.0, duration=Erlang(shape=shape, rate=rate))]],
    )
