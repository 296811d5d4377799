"""Simulation by thinning against a windowed upper bound.

The external arrivals and their marks are drawn first. Within a window
(tau, tau+delta] the self stress is frozen at its value at tau, so

    bound(t) = lambda0 * exp(beta*t - S_tau - S'_t)

dominates the intensity there. bound(t) grows between external arrivals and
drops at each of them, so its maximum over the window sits at one of the
external arrival times (as a left limit) or at the window end.
"""
import logging
import math
import time
from bisect import bisect_left
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core_model import Event, EventKind, EventLog, IntensityState, ModelParams
from .errors import ParameterError
from .streams import exponential_gap, path_generators

logger = logging.getLogger(__name__)

Monitor = Callable[["BoundWindow", float, float], None]


@dataclass(frozen=True)
class BoundWindow:
    start: float
    width: float
    log_bound: float

    def __post_init__(self):
        if not self.width > 0:
            raise ParameterError(f"window width must be positive, got {self.width}")

    @property
    def end(self) -> float:
        return self.start + self.width

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound)


@dataclass(frozen=True)
class ExternalPath:
    """External arrival times and marks on (0, end_time]."""
    times: np.ndarray
    marks: np.ndarray
    end_time: float

    def __post_init__(self):
        if len(self.times) != len(self.marks):
            raise ParameterError("external times and marks differ in length")
        object.__setattr__(self, "_cumulative", np.concatenate(([0.0], np.cumsum(self.marks))))
        object.__setattr__(self, "_time_list", [float(t) for t in self.times])

    def __len__(self) -> int:
        return len(self.times)

    def stress_before(self, t: float) -> float:
        """S'_t: total external mark of arrivals strictly before t."""
        return float(self._cumulative[bisect_left(self._time_list, t)])


def simulate_external_path(params: ModelParams, end_time: float, rng: np.random.Generator) -> ExternalPath:
    """Rate-rho Poisson arrivals with marks, drawn gap, mark, gap, mark, ..."""
    times: List[float] = []
    marks: List[float] = []
    t = exponential_gap(rng, params.rho)
    while t <= end_time:
        times.append(t)
        marks.append(params.jump_ext.sample(rng))
        t += exponential_gap(rng, params.rho)
    return ExternalPath(np.asarray(times, dtype=float), np.asarray(marks, dtype=float), end_time)


def _window(params: ModelParams, external: ExternalPath, self_stress: float, tau: float, delta: float) -> BoundWindow:
    end = tau + delta
    lo = bisect_left(external._time_list, tau)
    hi = bisect_left(external._time_list, end)
    # arrivals in (tau, end); one exactly at end is covered by the end candidate
    while lo < hi and external._time_list[lo] <= tau:
        lo += 1
    candidates = np.append(external.times[lo:hi], end)
    log_values = params.log_lambda0 + params.beta * candidates - self_stress - external._cumulative[lo : hi + 1]
    return BoundWindow(tau, delta, float(np.max(log_values)))


def upper_bound(
    history: EventLog,
    external: ExternalPath,
    params: ModelParams,
    tau: float,
    delta: float,
) -> BoundWindow:
    """Windowed bound on (tau, tau+delta] given the self arrivals of ``history`` up to tau."""
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if tau + delta > external.end_time:
        raise ParameterError(f"external path ends at {external.end_time}, window needs {tau + delta}")
    self_stress = sum(e.mark for e in history.self_events if e.time <= tau)
    return _window(params, external, self_stress, tau, delta)


def _merge(
    params: ModelParams,
    end_time: float,
    self_times: Sequence[float],
    self_marks: Sequence[float],
    external: ExternalPath,
) -> EventLog:
    arrivals = [(t, EventKind.SELF, x) for t, x in zip(self_times, self_marks)]
    arrivals += [(float(t), EventKind.EXTERNAL, float(y)) for t, y in zip(external.times, external.marks)]
    arrivals.sort(key=lambda a: a[0])
    state = IntensityState.initial(params)
    events = []
    for t, kind, mark in arrivals:
        log_before = state.move_to(t, params.beta)
        log_after = state.jump(mark)
        events.append(Event(t, kind, mark, math.exp(log_before), math.exp(log_after)))
    return EventLog(tuple(events), end_time)


def simulate_path_thinning(
    params: ModelParams,
    end_time: float,
    delta: float,
    seed: int,
    stream: int = 0,
    monitor: Optional[Monitor] = None,
) -> EventLog:
    """Sample one path by windowed thinning.

    After an acceptance the clock moves to the accepted time and a new window
    opens. A rejection keeps the window and proposes again from the rejected
    time. Running past the window end moves the clock to the window end.
    ``monitor(window, proposal_time, bound_value)`` sees every proposal that
    reaches the acceptance test.
    """
    if not (math.isfinite(end_time) and end_time > 0):
        raise ParameterError(f"end_time must be positive, got {end_time}")
    if not (math.isfinite(delta) and delta > 0):
        raise ParameterError(f"delta must be positive, got {delta}")
    self_rng, ext_rng = path_generators(seed, stream)
    external = simulate_external_path(params, end_time, ext_rng)
    beta, log_lambda0 = params.beta, params.log_lambda0

    self_times: List[float] = []
    self_marks: List[float] = []
    self_stress = 0.0
    t = 0.0
    proposals = 0
    while t < end_time:
        window = _window(params, external, self_stress, t, min(delta, end_time - t))
        limit = window.end
        scale = math.exp(-window.log_bound)
        s = t
        while True:
            s += float(self_rng.exponential(scale))
            if s > limit:
                t = window.end
                break
            proposals += 1
            log_value = log_lambda0 + beta * s - self_stress - external.stress_before(s)
            if monitor is not None:
                monitor(window, s, math.exp(log_value))
            if math.log(1.0 - self_rng.random()) <= log_value - window.log_bound:
                mark = params.jump_self.sample(self_rng)
                self_times.append(s)
                self_marks.append(mark)
                self_stress += mark
                t = s
                break
    logger.debug(f"thinning path seed={seed} stream={stream}: {len(self_times)} accepted of {proposals} proposals")
    return _merge(params, end_time, self_times, self_marks, external)


def grid_search_delta(
    params: ModelParams,
    end_time: float,
    candidate_deltas: Sequence[float],
    trials: int,
    paths_per_trial: int = 1,
    seed: int = 0,
) -> float:
    """Return the window width with the smallest mean wall time per trial."""
    candidates = [float(d) for d in candidate_deltas]
    if not candidates:
        raise ParameterError("candidate_deltas must be nonempty")
    if trials <= 0:
        raise ParameterError("trials must be positive")
    if paths_per_trial <= 0:
        raise ParameterError("paths_per_trial must be positive")
    bad = [d for d in candidates if not (math.isfinite(d) and d > 0)]
    if bad:
        raise ParameterError(f"candidate deltas must be positive, got {bad}")
    if len(candidates) == 1:
        return candidates[0]

    timings = {}
    for delta in candidates:
        elapsed = 0.0
        for trial in range(trials):
            start = time.perf_counter()
            for i in range(paths_per_trial):
                simulate_path_thinning(params, end_time, delta, seed, stream=trial * paths_per_trial + i)
            elapsed += time.perf_counter() - start
        timings[delta] = elapsed / trials
        logger.info(f"delta={delta:g}: {timings[delta]:.4f}s per trial")
    best = min(candidates, key=lambda d: timings[d])
    logger.info(f"grid search picked delta={best:g}")
    return best
