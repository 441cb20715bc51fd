import logging
from dataclasses import dataclass

import numpy as np

from models.model_spec import KernelEntry, ModelSpec
from services.errors import DegenerateModelError, ReducibleChainError
from services.linalg import cofactor

logger = logging.getLogger(__name__)

PI_AGREEMENT = 1e-10


# ------------------------
# Transforms
# ------------------------
def kernel_transform(entry: KernelEntry, s):
    """weight * E[exp(-s T)] for Re(s) >= 0."""
    return entry.transform(s)


def transform_argument(model: ModelSpec, z) -> np.ndarray:
    """s(z) = lambda (1 - B(z)); pinned to 0 at z = 1 so A(1) reproduces P exactly."""
    z = np.asarray(z, dtype=complex)
    s = model.lam * (1.0 - model.batch.pgf(z))
    return np.where(z == 1.0, 0.0 + 0.0j, s)


def arrival_matrix(model: ModelSpec, z, exceptional: bool = False) -> np.ndarray:
    """A_ij(z) = G_ij(lambda(1 - B(z))); shape z.shape + (N, N). A(1) is the routing matrix itself."""
    z = np.asarray(z, dtype=complex)
    s = transform_argument(model, z)
    kernel = model.kernel(exceptional)
    out = np.empty(s.shape + (model.N, model.N), dtype=complex)
    for i, row in enumerate(kernel):
        for j, entry in enumerate(row):
            out[..., i, j] = entry.transform(s)
    out[z == 1.0] = model.routing_matrix(exceptional=exceptional)
    return out


def arrival_matrix_derivative(model: ModelSpec, z, exceptional: bool = False) -> np.ndarray:
    """dA_ij/dz by the chain rule on G_ij(lambda(1 - B(z)))."""
    z = np.asarray(z, dtype=complex)
    s = transform_argument(model, z)
    ds_dz = -model.lam * model.batch.pgf_derivative(z)
    kernel = model.kernel(exceptional)
    out = np.empty(s.shape + (model.N, model.N), dtype=complex)
    for i, row in enumerate(kernel):
        for j, entry in enumerate(row):
            out[..., i, j] = entry.transform_derivative(s) * ds_dz
    return out


# ------------------------
# Stationary vector of P
# ------------------------
@dataclass(frozen=True)
class StationaryVector:
    pi: np.ndarray
    cofactors: np.ndarray  # d_i: cofactor of entry (i, 1) of I - P
    d: float


def stationary_pi(P: np.ndarray) -> StationaryVector:
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
        raise ReducibleChainError("routing matrix rows do not sum to 1")

    i_minus_p = np.eye(n) - P
    cofactors = np.array([float(cofactor(i_minus_p, i, 0)) for i in range(n)])
    d = float(cofactors.sum())
    if abs(d) < 1e-14:
        raise ReducibleChainError("cofactor sum d vanishes: the routing chain is reducible")

    if n > 1 and np.linalg.matrix_rank(i_minus_p) < n - 1:
        raise ReducibleChainError("I - P has more than one null direction: the routing chain is reducible")

    system = i_minus_p.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(system, rhs)

    pi_cofactor = cofactors / d
    gap = float(np.max(np.abs(pi - pi_cofactor)))
    if gap > PI_AGREEMENT:
        raise ReducibleChainError(f"stationary vector: cofactor and linear-solve paths differ by {gap:.3e}")
    if np.any(pi <= 0):
        raise ReducibleChainError(f"stationary vector has non-positive entries: {pi}")
    return StationaryVector(pi=pi, cofactors=cofactors, d=d)


# ------------------------
# Moments
# ------------------------
@dataclass(frozen=True)
class MomentSet:
    lam: float
    mean_batch: float
    second_moment_batch: float
    P: np.ndarray
    Pstar: np.ndarray
    stationary: StationaryVector
    alpha_ij: np.ndarray
    alphastar_ij: np.ndarray
    alphahat_ij: np.ndarray
    alphahatstar_ij: np.ndarray
    rho: float

    @property
    def pi(self) -> np.ndarray:
        return self.stationary.pi

    @property
    def alpha_i(self) -> np.ndarray:
        return self.alpha_ij.sum(axis=1)

    @property
    def alphastar_i(self) -> np.ndarray:
        return self.alphastar_ij.sum(axis=1)

    @property
    def alphahat_i(self) -> np.ndarray:
        return self.alphahat_ij.sum(axis=1)

    @property
    def alphahatstar_i(self) -> np.ndarray:
        return self.alphahatstar_ij.sum(axis=1)


def kernel_moments(model: ModelSpec, exceptional: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """(m1_ij, m2_ij): weight times first and second moment of each duration."""
    kernel = model.kernel(exceptional)
    m1 = np.array([[entry.first_moment() for entry in row] for row in kernel])
    m2 = np.array([[entry.second_moment() for entry in row] for row in kernel])
    return m1, m2


def _arrival_moments(model: ModelSpec, exceptional: bool) -> tuple[np.ndarray, np.ndarray]:
    lam = model.lam
    eb = model.batch.mean()
    eb2 = model.batch.second_moment()
    m1, m2 = kernel_moments(model, exceptional)
    alpha = lam * eb * m1
    # A'' (1) + A'(1) with A(z) = G(lambda(1 - B(z)))
    alphahat = lam**2 * eb**2 * m2 + lam * (eb2 - eb) * m1 + alpha
    return alpha, alphahat


def moment_set(model: ModelSpec) -> MomentSet:
    P = model.routing_matrix()
    stationary = stationary_pi(P)
    alpha, alphahat = _arrival_moments(model, exceptional=False)
    alphastar, alphahatstar = _arrival_moments(model, exceptional=True)
    rho = float(stationary.pi @ alpha.sum(axis=1))
    return MomentSet(
        lam=model.lam,
        mean_batch=model.batch.mean(),
        second_moment_batch=model.batch.second_moment(),
        P=P,
        Pstar=model.routing_matrix(exceptional=True),
        stationary=stationary,
        alpha_ij=alpha,
        alphastar_ij=alphastar,
        alphahat_ij=alphahat,
        alphahatstar_ij=alphahatstar,
        rho=rho,
    )


def traffic_intensity(model: ModelSpec) -> float:
    return moment_set(model).rho


def solve_lambda_critical(model: ModelSpec) -> float:
    """Arrival rate at which rho = 1 with kernels and batch law held fixed."""
    pi = stationary_pi(model.routing_matrix()).pi
    m1, _ = kernel_moments(model)
    load_per_rate = model.batch.mean() * float(pi @ m1.sum(axis=1))
    if load_per_rate <= 0:
        raise DegenerateModelError("every mean service time is zero; rho does not depend on lambda")
    return 1.0 / load_per_rate


def rate_for_rho(model: ModelSpec, rho: float) -> float:
    return rho * solve_lambda_critical(model)
