"""Queue-length pmfs from PGFs by a discrete Cauchy transform on a circle of radius r < 1."""
import logging
from dataclasses import dataclass

import numpy as np

from models.epochs import Epoch, Provenance
from services.errors import InversionUnstable, TruncationFailure
from services.stationary_solver import StationarySolution, epoch_pgf

logger = logging.getLogger(__name__)

CLAMP_FLOOR = -1e-9
NORMALIZATION_TOLERANCE = 1e-6
INITIAL_TRUNCATION = 64
# per-sample error of the epoch PGF, before the r^-n amplification
ROUNDOFF = 1e-13
MEAN_FLOOR = 1e-12


@dataclass(frozen=True)
class QueueLengthPmf:
    probabilities: np.ndarray
    tail: float
    epoch: Epoch
    source: Provenance = Provenance.ANALYTIC

    @property
    def truncation(self) -> int:
        return len(self.probabilities) - 1

    def mean(self) -> float:
        n = np.arange(len(self.probabilities))
        return float(n @ self.probabilities)

    def variance(self) -> float:
        n = np.arange(len(self.probabilities))
        mean = self.mean()
        return float((n * n) @ self.probabilities - mean * mean)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probabilities)

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(length)
        k = min(length, len(self.probabilities))
        out[:k] = self.probabilities[:k]
        return out


@dataclass(frozen=True)
class MeanQueueLength:
    mean: float
    scaled_mean: float
    truncation: int
    epoch: Epoch


def _sample_count(truncation: int) -> int:
    return 1 << int(np.ceil(np.log2(2 * truncation)))


def invert_pgf(solution: StationarySolution, epoch: Epoch = Epoch.DEPARTURE, truncation: int = 128) -> QueueLengthPmf:
    """p_0..p_M from K >= 2M samples of the epoch PGF on |z| = 10^(-8/(2M))."""
    if truncation < 1:
        raise ValueError(f"truncation must be at least 1, got {truncation}")
    epoch = Epoch(epoch)
    samples = _sample_count(truncation)
    radius = 10.0 ** (-8.0 / (2 * truncation))
    z = radius * np.exp(2j * np.pi * np.arange(samples) / samples)

    values = epoch_pgf(solution, z, epoch)
    coefficients = np.fft.fft(values) / samples
    n = np.arange(truncation + 1)
    probabilities = coefficients[: truncation + 1].real / radius**n

    worst = float(probabilities.min())
    if worst < CLAMP_FLOOR:
        raise InversionUnstable(f"{epoch.value} pmf has p_{int(probabilities.argmin())} = {worst:.3e}")
    probabilities = np.where(probabilities < 0, 0.0, probabilities)

    total = float(probabilities.sum())
    if total > 1.0 + NORMALIZATION_TOLERANCE:
        raise InversionUnstable(f"{epoch.value} pmf sums to {total:.12g} at truncation {truncation}")
    if total > 1.0:
        # round-off overshoot: rescale so the reported mass and tail add up to one
        probabilities = probabilities / total
        total = 1.0
    tail = 1.0 - total
    logger.debug(f"inverted {epoch.value} PGF with M={truncation}, K={samples}, tail={tail:.3e}")
    return QueueLengthPmf(probabilities=probabilities, tail=tail, epoch=epoch)


def tail_mean_contribution(pmf: QueueLengthPmf) -> float:
    """Estimate of sum_{n > M} n p_n.

    The decay per window comes from two windows of width M/4 ending at 3M/4,
    where the 10^(8n/(2M)) amplification of round-off is still small, and is
    extrapolated geometrically past M. Zero when the windows sit below the
    round-off floor: nothing beyond M can then be resolved at this radius.
    """
    truncation = pmf.truncation
    width = truncation // 4
    p = pmf.probabilities
    earlier = float(p[width : 2 * width].sum())
    later = float(p[2 * width : 3 * width].sum())
    floor = width * ROUNDOFF * 10.0 ** (8.0 * 3 * width / (2 * truncation))
    if later <= floor or earlier <= floor:
        return 0.0
    decay = later / earlier
    if decay >= 1.0:
        return np.inf
    mass = later * decay**2 / (1.0 - decay)
    return mass * (truncation + width / (1.0 - decay))


def adaptive_pmf(
    solution: StationarySolution,
    epoch: Epoch = Epoch.DEPARTURE,
    rtol: float = 1e-8,
    ceiling: int = 65536,
) -> QueueLengthPmf:
    """Double the truncation until the mean beyond M is below rtol * mean."""
    truncation = INITIAL_TRUNCATION
    while truncation <= ceiling:
        pmf = invert_pgf(solution, epoch, truncation)
        mean = pmf.mean()
        contribution = tail_mean_contribution(pmf)
        if contribution <= rtol * max(mean, MEAN_FLOOR):
            logger.info(f"{Epoch(epoch).value} pmf settled at M={truncation}, mean={mean:.10g}")
            return pmf
        logger.debug(f"M={truncation}: tail contribution {contribution:.3e} against mean {mean:.6g}")
        truncation *= 2
    raise TruncationFailure(
        f"{Epoch(epoch).value} tail did not fall below rtol before truncation {ceiling} (rho = {solution.rho:.6g})"
    )


def mean_queue_length(
    solution: StationarySolution,
    epoch: Epoch = Epoch.DEPARTURE,
    rtol: float = 1e-8,
    ceiling: int = 65536,
) -> MeanQueueLength:
    pmf = adaptive_pmf(solution, epoch, rtol=rtol, ceiling=ceiling)
    mean = pmf.mean()
    return MeanQueueLength(
        mean=mean,
        scaled_mean=(1.0 - solution.rho) * mean,
        truncation=pmf.truncation,
        epoch=Epoch(epoch),
    )


# ------------------------
# Distances between pmfs
# ------------------------
def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    length = max(len(p), len(q))
    a = np.zeros(length)
    b = np.zeros(length)
    a[: len(p)] = p
    b[: len(q)] = q
    return 0.5 * float(np.abs(a - b).sum())
