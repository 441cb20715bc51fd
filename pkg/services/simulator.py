"""Discrete-event simulation of the batch-Poisson queue with type-correlated service.

A service that starts when the previous departure left the system empty draws
its (next type, duration) pair from the exceptional kernel, every other
service from the regular one. The next type is drawn first and the duration
from that entry's law.
"""
import bisect
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from scipy import stats

from models.epochs import Epoch, Provenance
from models.model_spec import ModelSpec
from models.sim_config import SimConfig
from services.errors import UnstableModelError, UnstableRun
from services.inversion import QueueLengthPmf
from services.queue_model import traffic_intensity

logger = logging.getLogger(__name__)

ALPHA = 0.05  # two-sided 95% intervals
BATCH_COUNT = 20
BUFFER_SIZE = 65536


class RandomStream:
    """Buffered standard exponentials and uniforms from one numpy Generator."""

    def __init__(self, seed_sequence: np.random.SeedSequence):
        self._rng = np.random.default_rng(seed_sequence)
        self._exp = self._rng.standard_exponential(BUFFER_SIZE)
        self._uni = self._rng.random(BUFFER_SIZE)
        self._exp_pos = 0
        self._uni_pos = 0

    def exponential(self) -> float:
        if self._exp_pos == BUFFER_SIZE:
            self._exp = self._rng.standard_exponential(BUFFER_SIZE)
            self._exp_pos = 0
        value = self._exp[self._exp_pos]
        self._exp_pos += 1
        return float(value)

    def uniform(self) -> float:
        if self._uni_pos == BUFFER_SIZE:
            self._uni = self._rng.random(BUFFER_SIZE)
            self._uni_pos = 0
        value = self._uni[self._uni_pos]
        self._uni_pos += 1
        return float(value)


# ------------------------
# Results
# ------------------------
@dataclass(frozen=True)
class SimResult:
    pmfs: Dict[Epoch, QueueLengthPmf]
    means: Dict[Epoch, float]
    variances: Dict[Epoch, float]
    half_widths: Dict[Epoch, float]
    utilization: float
    utilization_half_width: float
    empty_by_next_type: np.ndarray
    starred_fraction: float
    service_start_types: np.ndarray
    mean_sojourn: float
    sojourn_half_width: float
    departures_recorded: int
    seed: int
    replications: int
    warmup_departures: int
    metadata: dict = field(default_factory=dict)

    @property
    def empty_probability(self) -> float:
        return float(self.empty_by_next_type.sum())


def t_half_width(samples) -> float:
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 2:
        return float("nan")
    return float(stats.sem(samples) * stats.t.ppf(1 - ALPHA / 2, len(samples) - 1))


class _Counts:
    """Histogram that grows with the largest level seen."""

    def __init__(self):
        self.values = [0.0] * 64

    def add(self, level: int, amount: float = 1.0) -> None:
        if level >= len(self.values):
            self.values.extend([0.0] * (level + 1 - len(self.values)))
        self.values[level] += amount

    def add_run(self, start: int, length: int) -> None:
        """One observation at each of the levels start .. start + length - 1."""
        top = start + length
        if top > len(self.values):
            self.values.extend([0.0] * (top - len(self.values)))
        for level in range(start, top):
            self.values[level] += 1.0

    def pmf(self, epoch: Epoch) -> QueueLengthPmf:
        counts = np.array(self.values)
        last = np.nonzero(counts)[0]
        counts = counts[: last[-1] + 1] if len(last) else counts[:1]
        total = counts.sum()
        probabilities = counts / total if total > 0 else counts
        return QueueLengthPmf(probabilities=probabilities, tail=0.0, epoch=epoch, source=Provenance.SIMULATED)


# ------------------------
# Event loop
# ------------------------
class QueueSimulation:
    """Single replication; event order alone defines the result."""

    def __init__(self, model: ModelSpec, stream: RandomStream, num_departures: int, warmup: int, ceiling: int):
        self.model = model
        self.stream = stream
        self.num_departures = num_departures
        self.warmup = warmup
        self.ceiling = ceiling
        self.batch_size = max(1, (num_departures - warmup) // BATCH_COUNT)

        self.cumulative = {
            flag: [np.cumsum([entry.weight for entry in row]).tolist() for row in model.kernel(flag)]
            for flag in (False, True)
        }
        self.durations = {flag: [[entry.duration for entry in row] for row in model.kernel(flag)] for flag in (False, True)}

        # state
        self.clock = 0.0
        self.in_system = 0
        self.next_type = min(int(stream.uniform() * model.N), model.N - 1)
        self.starts_busy_period = True
        self.next_arrival = stream.exponential() / model.lam
        self.next_departure = math.inf
        self.arrival_times = []
        self.arrival_head = 0
        self.departures = 0

        # statistics
        self.recording = warmup == 0
        self.record_start = 0.0
        self.counts = {epoch: _Counts() for epoch in Epoch}
        self.busy_time = 0.0
        self.services = 0
        self.starred_services = 0
        self.empty_by_next_type = np.zeros(model.N)
        self.service_start_types = np.zeros(model.N)
        self.sojourn_total = 0.0
        self.sojourn_count = 0
        self.batch_sums = np.zeros((BATCH_COUNT, len(Epoch) + 2))
        self.batch_weights = np.zeros((BATCH_COUNT, len(Epoch) + 2))

    # column layout of the batch-means tables
    _COLUMNS = {epoch: k for k, epoch in enumerate(Epoch)}
    _UTILIZATION = len(Epoch)
    _SOJOURN = len(Epoch) + 1

    def _batch_index(self) -> int:
        return min((self.departures - self.warmup) // self.batch_size, BATCH_COUNT - 1)

    def _advance(self, until: float) -> None:
        elapsed = until - self.clock
        if self.recording and elapsed > 0:
            self.counts[Epoch.ARBITRARY].add(self.in_system, elapsed)
            b = self._batch_index()
            self.batch_sums[b, self._COLUMNS[Epoch.ARBITRARY]] += self.in_system * elapsed
            self.batch_weights[b, self._COLUMNS[Epoch.ARBITRARY]] += elapsed
            busy = elapsed if self.in_system > 0 else 0.0
            self.busy_time += busy
            self.batch_sums[b, self._UTILIZATION] += busy
            self.batch_weights[b, self._UTILIZATION] += elapsed
        self.clock = until

    def _start_service(self) -> None:
        current = self.next_type
        exceptional = self.starts_busy_period
        row = self.cumulative[exceptional][current]
        upcoming = min(bisect.bisect_right(row, self.stream.uniform() * row[-1]), self.model.N - 1)
        duration = self.durations[exceptional][current][upcoming].draw(self.stream)
        if self.recording:
            self.services += 1
            if exceptional:
                self.starred_services += 1
            else:
                self.service_start_types[current] += 1
        self.next_type = upcoming
        self.next_departure = self.clock + duration

    def _process_arrival(self) -> None:
        self._advance(self.next_arrival)
        size = self.model.batch.draw(self.stream)
        seen = self.in_system
        if self.recording:
            b = self._batch_index()
            self.counts[Epoch.BATCH_ARRIVAL].add(seen)
            self.counts[Epoch.CUSTOMER_ARRIVAL].add_run(seen, size)
            self.batch_sums[b, self._COLUMNS[Epoch.BATCH_ARRIVAL]] += seen
            self.batch_weights[b, self._COLUMNS[Epoch.BATCH_ARRIVAL]] += 1
            self.batch_sums[b, self._COLUMNS[Epoch.CUSTOMER_ARRIVAL]] += size * seen + size * (size - 1) / 2
            self.batch_weights[b, self._COLUMNS[Epoch.CUSTOMER_ARRIVAL]] += size
        self.arrival_times.extend([self.clock] * size)
        self.in_system += size
        if self.in_system > self.ceiling:
            raise UnstableRun(
                f"queue length {self.in_system} exceeds the ceiling {self.ceiling} at t={self.clock:.6g}"
            )
        if seen == 0:
            self._start_service()
        self.next_arrival = self.clock + self.stream.exponential() / self.model.lam

    def _process_departure(self) -> None:
        self._advance(self.next_departure)
        self.in_system -= 1
        arrived = self.arrival_times[self.arrival_head]
        self.arrival_head += 1
        if self.arrival_head > 65536 and self.arrival_head * 2 > len(self.arrival_times):
            del self.arrival_times[: self.arrival_head]
            self.arrival_head = 0

        if self.recording:
            b = self._batch_index()
            self.counts[Epoch.DEPARTURE].add(self.in_system)
            self.batch_sums[b, self._COLUMNS[Epoch.DEPARTURE]] += self.in_system
            self.batch_weights[b, self._COLUMNS[Epoch.DEPARTURE]] += 1
            sojourn = self.clock - arrived
            self.sojourn_total += sojourn
            self.sojourn_count += 1
            self.batch_sums[b, self._SOJOURN] += sojourn
            self.batch_weights[b, self._SOJOURN] += 1
            if self.in_system == 0:
                self.empty_by_next_type[self.next_type] += 1

        self.departures += 1
        if not self.recording and self.departures >= self.warmup:
            self.recording = True
            self.record_start = self.clock

        # a departure that empties the system makes the next service exceptional
        self.starts_busy_period = self.in_system == 0
        if self.in_system > 0:
            self._start_service()
        else:
            self.next_departure = math.inf

    def run(self) -> "QueueSimulation":
        while self.departures < self.num_departures:
            # ties go to the departure
            if self.next_arrival < self.next_departure:
                self._process_arrival()
            else:
                self._process_departure()
        return self

    def batch_means(self, column: int) -> np.ndarray:
        weights = self.batch_weights[:, column]
        ok = weights > 0
        return self.batch_sums[ok, column] / weights[ok]


def _observed_means(sim: QueueSimulation) -> Dict[Epoch, np.ndarray]:
    return {epoch: sim.batch_means(sim._COLUMNS[epoch]) for epoch in Epoch}


def _single_result(sim: QueueSimulation, seed: int) -> SimResult:
    recorded = sim.num_departures - sim.warmup
    pmfs = {epoch: sim.counts[epoch].pmf(epoch) for epoch in Epoch}
    batch_means = _observed_means(sim)
    elapsed = sim.clock - sim.record_start
    return SimResult(
        pmfs=pmfs,
        means={epoch: pmfs[epoch].mean() for epoch in Epoch},
        variances={epoch: pmfs[epoch].variance() for epoch in Epoch},
        half_widths={epoch: t_half_width(batch_means[epoch]) for epoch in Epoch},
        utilization=sim.busy_time / elapsed if elapsed > 0 else float("nan"),
        utilization_half_width=t_half_width(sim.batch_means(sim._UTILIZATION)),
        empty_by_next_type=sim.empty_by_next_type / recorded,
        starred_fraction=sim.starred_services / sim.services if sim.services else float("nan"),
        service_start_types=sim.service_start_types / max(sim.service_start_types.sum(), 1.0),
        mean_sojourn=sim.sojourn_total / sim.sojourn_count if sim.sojourn_count else float("nan"),
        sojourn_half_width=t_half_width(sim.batch_means(sim._SOJOURN)),
        departures_recorded=recorded,
        seed=seed,
        replications=1,
        warmup_departures=sim.warmup,
        metadata={"half_width_method": f"batch means ({BATCH_COUNT} batches)"},
    )


def _run(config: SimConfig, seed_sequence: np.random.SeedSequence) -> SimResult:
    warmup = int(config.warmup_fraction * config.num_departures)
    sim = QueueSimulation(
        model=config.model,
        stream=RandomStream(seed_sequence),
        num_departures=config.num_departures,
        warmup=warmup,
        ceiling=config.queue_ceiling,
    )
    return _single_result(sim.run(), config.seed)


def _check_stable(model: ModelSpec) -> None:
    rho = traffic_intensity(model)
    if rho >= 1.0:
        raise UnstableModelError(f"simulation needs rho < 1, got rho = {rho:.12g}")


def simulate(config: SimConfig) -> SimResult:
    _check_stable(config.model)
    logger.info(
        f"simulating {config.num_departures} departures (seed {config.seed}, warmup {config.warmup_fraction:.0%})"
    )
    if config.replications > 1:
        return replicate(config)
    return _run(config, np.random.SeedSequence(config.seed))


# ------------------------
# Replications
# ------------------------
def _merge(config: SimConfig, runs: list) -> SimResult:
    def pooled(epoch: Epoch) -> QueueLengthPmf:
        length = max(len(run.pmfs[epoch].probabilities) for run in runs)
        probabilities = np.mean([run.pmfs[epoch].padded(length) for run in runs], axis=0)
        return QueueLengthPmf(probabilities=probabilities, tail=0.0, epoch=epoch, source=Provenance.SIMULATED)

    pmfs = {epoch: pooled(epoch) for epoch in Epoch}
    return SimResult(
        pmfs=pmfs,
        means={epoch: float(np.mean([run.means[epoch] for run in runs])) for epoch in Epoch},
        variances={epoch: pmfs[epoch].variance() for epoch in Epoch},
        half_widths={epoch: t_half_width([run.means[epoch] for run in runs]) for epoch in Epoch},
        utilization=float(np.mean([run.utilization for run in runs])),
        utilization_half_width=t_half_width([run.utilization for run in runs]),
        empty_by_next_type=np.mean([run.empty_by_next_type for run in runs], axis=0),
        starred_fraction=float(np.mean([run.starred_fraction for run in runs])),
        service_start_types=np.mean([run.service_start_types for run in runs], axis=0),
        mean_sojourn=float(np.mean([run.mean_sojourn for run in runs])),
        sojourn_half_width=t_half_width([run.mean_sojourn for run in runs]),
        departures_recorded=sum(run.departures_recorded for run in runs),
        seed=config.seed,
        replications=len(runs),
        warmup_departures=runs[0].warmup_departures,
        metadata={"half_width_method": f"Student t across {len(runs)} replications"},
    )


def replicate(config: SimConfig) -> SimResult:
    if config.replications < 2:
        raise ValueError(f"replicate needs at least 2 replications, got {config.replications}")
    _check_stable(config.model)
    children = np.random.SeedSequence(config.seed).spawn(config.replications)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            runs = list(pool.map(_run, [config] * len(children), children))
    else:
        runs = [_run(config, child) for child in children]
    logger.info(f"merged {len(runs)} replications")
    return _merge(config, runs)
