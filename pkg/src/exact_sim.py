"""Exact simulation by composition.

Between arrivals the intensity grows as lambda+ * exp(beta*s), so the merged
(self + external) interarrival time has survival

    P(tau > s) = exp(-(lambda+/beta) * (exp(beta*s) - 1)) * exp(-rho*s).

That survival is the product of a self clock and an independent rate-rho
exponential clock. Sampling each and keeping the minimum is exact and also
tells which stream produced the arrival.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .core_model import Event, EventKind, EventLog, IntensityState, ModelParams
from .errors import ParameterError
from .streams import BATCH_PURPOSE, exponential_gap, open_uniform, path_generators, stream_generator

logger = logging.getLogger(__name__)

_MINUS_INV_E = -math.exp(-1.0)
# log1p(exp(a)) == a to double precision above this
_SOFTPLUS_CUTOFF = 36.0
# exp() overflows a little above 709
_LOG_OVERFLOW = 700.0


@dataclass(frozen=True)
class CompositionDraw:
    tau1: float
    tau2: float
    winner: EventKind

    def __post_init__(self):
        expected = EventKind.SELF if self.tau1 <= self.tau2 else EventKind.EXTERNAL
        if self.winner is not expected:
            raise ParameterError(f"winner {self.winner.value} inconsistent with tau1={self.tau1}, tau2={self.tau2}")

    @property
    def tau(self) -> float:
        return min(self.tau1, self.tau2)


def _check_horizon(end_time: float) -> None:
    if not (math.isfinite(end_time) and end_time > 0):
        raise ParameterError(f"end_time must be positive, got {end_time}")


def _self_waiting_time(log_lambda: float, beta: float, neg_log_u: float) -> float:
    """(1/beta) * log(1 + (beta/lambda) * neg_log_u), evaluated from log lambda."""
    if neg_log_u <= 0.0:
        return 0.0
    a = math.log(beta) - log_lambda + math.log(neg_log_u)
    if a > _SOFTPLUS_CUTOFF:
        return a / beta
    return math.log1p(math.exp(a)) / beta


def interarrival_cdf(lambda_post: float, params: ModelParams, t: float) -> float:
    """Law of the time from an arrival with post-jump intensity lambda_post to the next one."""
    if not lambda_post > 0:
        raise ParameterError(f"lambda_post must be positive, got {lambda_post}")
    if not t >= 0:
        raise ParameterError(f"t must be nonnegative, got {t}")
    growth = params.beta * t
    if growth > _LOG_OVERFLOW:
        return 1.0
    log_survival = -(lambda_post / params.beta) * math.expm1(growth) - params.rho * t
    return -math.expm1(log_survival)


def _check_uniform(u: float, name: str) -> None:
    if not 0.0 < u <= 1.0:
        raise ParameterError(f"{name} must lie in (0, 1], got {u}")


def sample_composition(state: IntensityState, params: ModelParams, u1: float, u2: float) -> CompositionDraw:
    """Turn two uniforms into the self and external candidate waiting times."""
    _check_uniform(u1, "u1")
    _check_uniform(u2, "u2")
    tau1 = _self_waiting_time(state.log_lambda, params.beta, -math.log(u1))
    tau2 = -math.log(u2) / params.rho if params.rho > 0 else math.inf
    winner = EventKind.SELF if tau1 <= tau2 else EventKind.EXTERNAL
    return CompositionDraw(tau1, tau2, winner)


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function by Halley iteration."""
    if x < _MINUS_INV_E:
        if x < _MINUS_INV_E * (1.0 + 1e-15):
            raise ParameterError(f"lambert_w0 is undefined below -1/e, got {x}")
        return -1.0
    if x == 0.0:
        return 0.0
    if x == _MINUS_INV_E:
        return -1.0
    if x < -0.32:
        # branch-point series
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif x < 3.0:
        lx = math.log1p(x)
        w = lx * (1.0 - math.log1p(lx) / (2.0 + lx))
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(64):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def lambert_w0_exp(log_x: float) -> float:
    """W0(exp(log_x)) without forming exp(log_x); solves w + log(w) = log_x."""
    if log_x <= 1.0:
        return lambert_w0(math.exp(log_x))
    w = log_x - math.log(log_x)
    for _ in range(64):
        step = (w + math.log(w) - log_x) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 1e-15 * w:
            break
    return w


def _inverse_interarrival(log_lambda: float, params: ModelParams, u: float) -> float:
    beta, rho = params.beta, params.rho
    hazard = -math.log1p(-u)
    if rho <= 0.0:
        return _self_waiting_time(log_lambda, beta, hazard)
    # t = c/rho - W0(z)/beta with c = lambda/beta + hazard and
    # z = (lambda/rho) exp(beta*c/rho); since w + log w = log z this is
    # t = (log w - log(lambda/rho)) / beta, free of cancellation.
    log_ratio = log_lambda - math.log(rho)
    log_z = log_ratio + (math.exp(log_lambda) + beta * hazard) / rho
    if log_z > _LOG_OVERFLOW:
        log_w = math.log(lambert_w0_exp(log_z))
    elif log_z < -_LOG_OVERFLOW:
        log_w = log_z
    else:
        log_w = math.log(lambert_w0(math.exp(log_z)))
    return max((log_w - log_ratio) / beta, 0.0)


def inverse_interarrival_cdf(lambda_post: float, params: ModelParams, u: float) -> float:
    """Inverse of interarrival_cdf in closed form through Lambert W."""
    if not lambda_post > 0:
        raise ParameterError(f"lambda_post must be positive, got {lambda_post}")
    if not 0.0 < u < 1.0:
        raise ParameterError(f"u must lie in (0, 1), got {u}")
    return _inverse_interarrival(math.log(lambda_post), params, u)


def simulate_path(params: ModelParams, end_time: float, seed: int, stream: int = 0) -> EventLog:
    """Sample one path on (0, end_time] by composition.

    The external clock is exponential, so its residual after a self-arrival
    has the same law as a fresh draw; keeping the pending external time
    instead of redrawing leaves the path law unchanged and lets the thinning
    sampler reproduce the same external arrivals from the same stream.
    """
    _check_horizon(end_time)
    self_rng, ext_rng = path_generators(seed, stream)
    beta, rho = params.beta, params.rho
    state = IntensityState.initial(params)
    next_external = exponential_gap(ext_rng, rho)
    events: List[Event] = []
    while True:
        tau1 = _self_waiting_time(state.log_lambda, beta, -math.log(open_uniform(self_rng)))
        self_wins = tau1 <= next_external - state.t
        arrival = state.t + tau1 if self_wins else next_external
        if arrival > end_time:
            break
        log_before = state.move_to(arrival, beta)
        if self_wins:
            kind = EventKind.SELF
            mark = params.jump_self.sample(self_rng)
        else:
            kind = EventKind.EXTERNAL
            mark = params.jump_ext.sample(ext_rng)
            next_external = arrival + exponential_gap(ext_rng, rho)
        log_after = state.jump(mark)
        events.append(Event(arrival, kind, mark, math.exp(log_before), math.exp(log_after)))
    logger.debug(f"composition path seed={seed} stream={stream}: {len(events)} arrivals")
    return EventLog(tuple(events), end_time)


def simulate_path_inverse(params: ModelParams, end_time: float, seed: int, stream: int = 0) -> EventLog:
    """Sample one path by inverting the merged interarrival law.

    Each arrival is attributed to the self stream with probability
    lambda/(lambda + rho), the share of the total hazard at that instant.
    """
    _check_horizon(end_time)
    self_rng, ext_rng = path_generators(seed, stream)
    beta, rho = params.beta, params.rho
    state = IntensityState.initial(params)
    events: List[Event] = []
    while True:
        tau = _inverse_interarrival(state.log_lambda, params, open_uniform(self_rng))
        arrival = state.t + tau
        if arrival > end_time:
            break
        log_before = state.move_to(arrival, beta)
        p_self = 1.0 / (1.0 + rho * math.exp(-log_before)) if rho > 0 else 1.0
        if self_rng.random() < p_self:
            kind = EventKind.SELF
            mark = params.jump_self.sample(self_rng)
        else:
            kind = EventKind.EXTERNAL
            mark = params.jump_ext.sample(ext_rng)
        log_after = state.jump(mark)
        events.append(Event(arrival, kind, mark, math.exp(log_before), math.exp(log_after)))
    return EventLog(tuple(events), end_time)


@dataclass(frozen=True)
class PathBatch:
    """Many composition paths stored as NaN-padded (n_paths, max_events) matrices."""
    params: ModelParams
    end_time: float
    times: np.ndarray
    is_self: np.ndarray
    marks: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.times.shape[0]

    def counts(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-path (N_T, N'_T)."""
        present = ~np.isnan(self.times)
        n_self = np.sum(present & self.is_self, axis=1)
        return n_self, np.sum(present, axis=1) - n_self

    def log_intensity_on_grid(self, grid) -> np.ndarray:
        """Left-limit log-intensities, shape (n_paths, len(grid))."""
        grid = np.asarray(grid, dtype=float)
        out = np.empty((self.n_paths, grid.size))
        for j, g in enumerate(grid):
            released = np.where(self.times < g, self.marks, 0.0).sum(axis=1)
            out[:, j] = self.params.log_lambda0 + self.params.beta * g - released
        return out

    def event_log(self, i: int) -> EventLog:
        row = ~np.isnan(self.times[i])
        times, marks, selfs = self.times[i, row], self.marks[i, row], self.is_self[i, row]
        released = np.concatenate(([0.0], np.cumsum(marks)[:-1]))
        log_before = self.params.log_lambda0 + self.params.beta * times - released
        events = tuple(
            Event(
                float(t),
                EventKind.SELF if s else EventKind.EXTERNAL,
                float(x),
                math.exp(lb),
                math.exp(lb - x),
            )
            for t, s, x, lb in zip(times, selfs, marks, log_before)
        )
        return EventLog(events, self.end_time)


def simulate_batch(params: ModelParams, end_time: float, n_paths: int, seed: int, stream: int = 0) -> PathBatch:
    """Run the composition sampler on ``n_paths`` paths in lockstep with numpy."""
    _check_horizon(end_time)
    if n_paths <= 0:
        raise ParameterError("n_paths must be positive")
    rng = stream_generator(seed, stream, BATCH_PURPOSE)
    beta, rho = params.beta, params.rho
    log_beta = math.log(beta)
    clock = np.zeros(n_paths)
    log_lam = np.full(n_paths, params.log_lambda0)
    next_ext = rng.exponential(1.0 / rho, n_paths) if rho > 0 else np.full(n_paths, np.inf)
    position = np.zeros(n_paths, dtype=np.int64)
    records = []
    active = np.arange(n_paths)
    tiny = np.finfo(float).tiny
    while active.size:
        log_u = np.log(np.maximum(rng.standard_exponential(active.size), tiny))
        a = log_beta - log_lam[active] + log_u
        tau1 = np.where(a > _SOFTPLUS_CUTOFF, a, np.log1p(np.exp(np.minimum(a, _SOFTPLUS_CUTOFF)))) / beta
        now = clock[active]
        self_time = now + tau1
        ext_time = next_ext[active]
        self_wins = self_time <= ext_time
        arrival = np.where(self_wins, self_time, ext_time)
        keep = arrival <= end_time
        idx, arrival, self_wins, now = active[keep], arrival[keep], self_wins[keep], now[keep]
        if idx.size == 0:
            break
        marks = np.empty(idx.size)
        n_self = int(self_wins.sum())
        if n_self:
            marks[self_wins] = params.jump_self.sample(rng, n_self)
        if n_self < idx.size:
            marks[~self_wins] = params.jump_ext.sample(rng, idx.size - n_self)
            hit = idx[~self_wins]
            next_ext[hit] = arrival[~self_wins] + rng.exponential(1.0 / rho, hit.size)
        log_lam[idx] += beta * (arrival - now) - marks
        clock[idx] = arrival
        records.append((idx, position[idx].copy(), arrival, self_wins, marks))
        position[idx] += 1
        active = idx
    width = int(position.max()) if n_paths else 0
    times = np.full((n_paths, width), np.nan)
    is_self = np.zeros((n_paths, width), dtype=bool)
    mark_mat = np.zeros((n_paths, width))
    for idx, pos, arrival, self_wins, marks in records:
        times[idx, pos] = arrival
        is_self[idx, pos] = self_wins
        mark_mat[idx, pos] = marks
    logger.debug(f"batch of {n_paths} paths finished after {len(records)} lockstep rounds")
    return PathBatch(params, end_time, times, is_self, mark_mat)
