"""Heavy-traffic limit of the scaled departure-epoch queue length (1 - rho) X.

As rho -> 1 with the kernels held fixed and lambda -> lambda*, the scaled queue
length is exponential with rate eta. Everything here is evaluated exactly at
lambda*; the exceptional kernel never enters.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.model_spec import ModelSpec
from services.errors import InvalidHTDenominator, NotN2
from services.linalg import cofactor
from services.queue_model import MomentSet, moment_set, rate_for_rho, solve_lambda_critical
from services.roots import det_m

logger = logging.getLogger(__name__)

CRITICAL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class HTResult:
    lambda_critical: float
    pi: np.ndarray
    alphabar: np.ndarray
    alphahat_bar: float
    gammabar: np.ndarray
    qbar: np.ndarray
    d1: float
    correction_term: float
    denominator: float
    valid: bool
    independence_condition: Optional[float] = None

    @property
    def eta(self) -> Optional[float]:
        return 1.0 / self.denominator if self.valid else None

    @property
    def mean(self) -> Optional[float]:
        """Mean of the limiting scaled queue length, 1/eta."""
        return self.denominator if self.valid else None


def _critical_moments(model: ModelSpec) -> MomentSet:
    lam_star = solve_lambda_critical(model)
    moments = moment_set(model.with_rate(lam_star))
    if abs(moments.rho - 1.0) > CRITICAL_TOLERANCE:
        raise ValueError(f"rho at lambda* is {moments.rho:.15g}, expected 1")
    return moments


def gamma(moments: MomentSet) -> np.ndarray:
    """gamma_j = sum_i pi_i alpha_ij / pi_j, mean arrivals during the service preceding a type-j service."""
    pi = moments.pi
    return (pi @ moments.alpha_ij) / pi


def gamma_bar(moments: MomentSet) -> np.ndarray:
    """gamma at lambda*."""
    if abs(moments.rho - 1.0) > CRITICAL_TOLERANCE:
        raise ValueError(f"gamma_bar is defined at rho = 1, got rho = {moments.rho:.15g}")
    return gamma(moments)


def q_cofactors(moments: MomentSet) -> np.ndarray:
    """q_k, k = 2..N: cofactors along the first row of [x; (1 - alpha_j, (I - P)_{j,2..N})_{j=2..N}]."""
    n = moments.P.shape[0]
    if n < 2:
        return np.array([])
    matrix = np.zeros((n, n))
    matrix[1:, 0] = 1.0 - moments.alpha_i[1:]
    matrix[1:, 1:] = (np.eye(n) - moments.P)[1:, 1:]
    return np.array([float(cofactor(matrix, 0, k)) for k in range(1, n)])


def build_ht_result(
    lambda_critical: float,
    pi: np.ndarray,
    alphabar: np.ndarray,
    alphahat_bar: float,
    gammabar: np.ndarray,
    qbar: np.ndarray,
    d1: float,
    independence_condition: Optional[float] = None,
) -> HTResult:
    pi = np.asarray(pi, dtype=float)
    gammabar = np.asarray(gammabar, dtype=float)
    qbar = np.asarray(qbar, dtype=float)
    correction = -float(np.sum(pi[1:] * (1.0 - gammabar[1:]) * qbar)) / d1 if len(qbar) else 0.0
    denominator = (alphahat_bar - 1.0) / 2.0 + correction
    valid = bool(denominator > 0)
    if not valid:
        logger.warning(f"heavy-traffic denominator {denominator:.6g} is not positive; no exponential limit")
    return HTResult(
        lambda_critical=lambda_critical,
        pi=pi,
        alphabar=np.asarray(alphabar, dtype=float),
        alphahat_bar=float(alphahat_bar),
        gammabar=gammabar,
        qbar=qbar,
        d1=float(d1),
        correction_term=correction,
        denominator=float(denominator),
        valid=valid,
        independence_condition=independence_condition,
    )


def _independence_term(moments: MomentSet) -> float:
    P = moments.P
    alpha_i = moments.alpha_i
    alpha_ij = moments.alpha_ij
    return float(
        (1.0 - alpha_i[1]) / (P[0, 1] + P[1, 0]) * ((P[0, 1] / P[1, 0]) * (1.0 - alpha_ij[1, 1]) - alpha_ij[0, 1])
    )


def ht_rate(model: ModelSpec) -> HTResult:
    """Rate eta of the exponential heavy-traffic limit; model.lam is ignored."""
    moments = _critical_moments(model)
    pi = moments.pi
    result = build_ht_result(
        lambda_critical=moments.lam,
        pi=pi,
        alphabar=moments.alpha_i,
        alphahat_bar=float(pi @ moments.alphahat_i),
        gammabar=gamma_bar(moments),
        qbar=q_cofactors(moments),
        d1=float(moments.stationary.cofactors[0]),
        independence_condition=_independence_term(moments) if model.N == 2 else None,
    )
    if result.valid:
        logger.info(f"heavy-traffic rate eta = {result.eta:.12g} at lambda* = {result.lambda_critical:.12g}")
    return result


def ht_rate_n2(model: ModelSpec) -> HTResult:
    """Two-type rate from the explicit correction term."""
    if model.N != 2:
        raise NotN2(model.N)
    moments = _critical_moments(model)
    pi = moments.pi
    alphahat_bar = float(pi @ moments.alphahat_i)
    term = _independence_term(moments)
    denominator = (alphahat_bar - 1.0) / 2.0 + term
    return HTResult(
        lambda_critical=moments.lam,
        pi=pi,
        alphabar=moments.alpha_i,
        alphahat_bar=alphahat_bar,
        gammabar=gamma_bar(moments),
        qbar=np.array([-(1.0 - moments.alpha_i[1])]),
        d1=float(moments.stationary.cofactors[0]),
        correction_term=term,
        denominator=float(denominator),
        valid=bool(denominator > 0),
        independence_condition=term,
    )


def independence_condition(model: ModelSpec) -> float:
    """Zero when the two-type heavy-traffic limit does not see the service correlations."""
    if model.N != 2:
        raise NotN2(model.N)
    return _independence_term(_critical_moments(model))


def ht_distribution(result: HTResult, x) -> tuple[np.ndarray, np.ndarray]:
    """(pdf, cdf) of Exp(eta); the same law holds at departure and arbitrary epochs."""
    if not result.valid:
        raise InvalidHTDenominator(
            f"heavy-traffic denominator {result.denominator:.6g} is not positive; eta is undefined"
        )
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("the scaled queue length is nonnegative")
    eta = result.eta
    return eta * np.exp(-eta * x), -np.expm1(-eta * x)


def det_m_expansion(model: ModelSpec, rho: float, s: float) -> float:
    """(det M(e^{-s(1-rho)})^T / (-s d (1-rho)^2) - 1) / s, which tends to 1/eta as rho -> 1."""
    at_rho = model.with_rate(rate_for_rho(model, rho))
    moments = moment_set(at_rho)
    epsilon = 1.0 - moments.rho
    value = complex(det_m(at_rho, np.exp(-s * epsilon))).real
    return (value / (-s * moments.stationary.d * epsilon**2) - 1.0) / s
