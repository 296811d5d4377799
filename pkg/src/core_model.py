"""Model definition for the extrinsic stress-release process.

The conditional intensity is

    lambda_t = lambda0 * exp(beta*t - S_t - S'_t)

where S_t sums the self marks X_i with T_i < t and S'_t sums the external
marks Y_j with T'_j < t. The intensity is left-continuous: at an event time
the value returned is the pre-jump limit.

All intensities are carried as natural logs and exponentiated only when a
value leaves the library.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DivergentMomentError, MomentViolation, ParameterError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]
Sampler = Callable[[np.random.Generator, Optional[int]], Union[float, np.ndarray]]


class JumpKind(str, Enum):
    EXPONENTIAL = "exponential"
    DETERMINISTIC = "deterministic"
    CUSTOM = "custom"


@dataclass(frozen=True)
class JumpDist:
    """Distribution of the positive jump sizes (marks).

    ``value`` is the rate ``a`` for exponential marks and the point mass
    ``x0`` for deterministic ones. Custom distributions supply a sampler
    ``sampler(rng, size)`` together with their exponential moments
    ``moments[k] = E[exp(kX)] - 1``; nothing is integrated numerically.
    """
    kind: JumpKind
    value: float = 1.0
    sampler: Optional[Sampler] = field(default=None, compare=False)
    moments: Optional[Mapping[int, float]] = None
    name: str = ""

    def __post_init__(self):
        if self.kind in (JumpKind.EXPONENTIAL, JumpKind.DETERMINISTIC):
            if not (math.isfinite(self.value) and self.value > 0):
                what = "rate" if self.kind is JumpKind.EXPONENTIAL else "x0"
                raise ParameterError(f"{self.kind.value} jump {what} must be positive, got {self.value}")
        elif self.sampler is None:
            raise ParameterError("custom jump distribution needs a sampler")

    @classmethod
    def exponential(cls, rate: float) -> "JumpDist":
        return cls(JumpKind.EXPONENTIAL, float(rate))

    @classmethod
    def deterministic(cls, x0: float) -> "JumpDist":
        return cls(JumpKind.DETERMINISTIC, float(x0))

    @classmethod
    def custom(cls, sampler: Sampler, moments: Mapping[int, float], name: str = "custom") -> "JumpDist":
        return cls(JumpKind.CUSTOM, sampler=sampler, moments=dict(moments), name=name)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        """Draw one mark (``size=None``) or an array of marks."""
        if self.kind is JumpKind.EXPONENTIAL:
            draw = rng.exponential(1.0 / self.value, size)
        elif self.kind is JumpKind.DETERMINISTIC:
            return self.value if size is None else np.full(size, self.value)
        else:
            draw = self.sampler(rng, size)
            if np.any(np.asarray(draw) <= 0):
                raise ParameterError(f"{self.name} sampler produced a nonpositive mark")
        return float(draw) if size is None else np.asarray(draw, dtype=float)

    def describe(self) -> str:
        if self.kind is JumpKind.EXPONENTIAL:
            return f"exp:{self.value!r}"
        if self.kind is JumpKind.DETERMINISTIC:
            return f"const:{self.value!r}"
        return self.name


@dataclass(frozen=True)
class ModelParams:
    """lambda0, beta, rho and the two mark distributions."""
    lambda0: float
    beta: float
    rho: float
    jump_self: JumpDist
    jump_ext: JumpDist

    def __post_init__(self):
        validate(self)

    @property
    def log_lambda0(self) -> float:
        return math.log(self.lambda0)

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "beta": self.beta,
            "rho": self.rho,
            "jump_self": self.jump_self.describe(),
            "jump_ext": self.jump_ext.describe(),
        }


def validate(params: ModelParams) -> None:
    """Raise ParameterError naming the first violated constraint."""
    if not (math.isfinite(params.lambda0) and params.lambda0 > 0):
        raise ParameterError("lambda0 must be positive")
    if not (math.isfinite(params.beta) and params.beta > 0):
        raise ParameterError("beta must be positive")
    if not (math.isfinite(params.rho) and params.rho >= 0):
        raise ParameterError("rho must be nonnegative")
    for side, dist in (("jump_self", params.jump_self), ("jump_ext", params.jump_ext)):
        if not isinstance(dist, JumpDist):
            raise ParameterError(f"{side} must be a JumpDist, got {type(dist).__name__}")


def exp_moment(dist: JumpDist, k: int) -> float:
    """m_k = E[exp(kX)] - 1, or DivergentMomentError when it is infinite."""
    if int(k) != k or k < 1:
        raise ParameterError(f"moment order must be a positive integer, got {k}")
    k = int(k)
    if dist.kind is JumpKind.EXPONENTIAL:
        if dist.value <= k:
            raise DivergentMomentError(
                "divergent exponential moment",
                [MomentViolation(k, dist.describe(), f"exponential rate {dist.value:g} must exceed {k}")],
            )
        # a/(a-k) - 1
        return k / (dist.value - k)
    if dist.kind is JumpKind.DETERMINISTIC:
        return math.expm1(k * dist.value)
    if not dist.moments or k not in dist.moments:
        raise DivergentMomentError(
            "exponential moment unavailable",
            [MomentViolation(k, dist.describe(), f"m_{k} not supplied")],
        )
    value = float(dist.moments[k])
    if not math.isfinite(value):
        raise DivergentMomentError(
            "divergent exponential moment", [MomentViolation(k, dist.describe(), f"m_{k} is {value}")]
        )
    return value


class EventKind(str, Enum):
    SELF = "self"
    EXTERNAL = "external"


@dataclass(frozen=True, slots=True)
class Event:
    time: float
    kind: EventKind
    mark: float
    intensity_before: float
    intensity_after: float


@dataclass(frozen=True)
class EventLog:
    """All arrivals on (0, end_time] in time order, self and external."""
    events: Tuple[Event, ...]
    end_time: float

    def __post_init__(self):
        if not isinstance(self.events, tuple):
            object.__setattr__(self, "events", tuple(self.events))
        if not (math.isfinite(self.end_time) and self.end_time > 0):
            raise ParameterError(f"end_time must be positive, got {self.end_time}")

    def __len__(self) -> int:
        return len(self.events)

    @cached_property
    def times(self) -> np.ndarray:
        return np.fromiter((e.time for e in self.events), dtype=float, count=len(self.events))

    @cached_property
    def marks(self) -> np.ndarray:
        return np.fromiter((e.mark for e in self.events), dtype=float, count=len(self.events))

    @cached_property
    def is_self(self) -> np.ndarray:
        return np.fromiter((e.kind is EventKind.SELF for e in self.events), dtype=bool, count=len(self.events))

    @cached_property
    def cumulative_marks(self) -> np.ndarray:
        """Entry j is the total stress released by the first j events."""
        return np.concatenate(([0.0], np.cumsum(self.marks)))

    @property
    def self_events(self) -> Tuple[Event, ...]:
        return tuple(e for e in self.events if e.kind is EventKind.SELF)

    @property
    def external_events(self) -> Tuple[Event, ...]:
        return tuple(e for e in self.events if e.kind is EventKind.EXTERNAL)

    @property
    def n_self(self) -> int:
        return int(self.is_self.sum())

    @property
    def n_external(self) -> int:
        return len(self.events) - self.n_self

    def check_invariants(self, params: ModelParams, rtol: float = 1e-9) -> None:
        """Raise ParameterError at the first event breaking an EventLog invariant."""
        previous = 0.0
        log_lam = params.log_lambda0
        for i, e in enumerate(self.events):
            if not (previous < e.time <= self.end_time):
                raise ParameterError(f"event {i} time {e.time} not in ({previous}, {self.end_time}]")
            if not e.mark > 0:
                raise ParameterError(f"event {i} mark must be positive, got {e.mark}")
            log_lam += params.beta * (e.time - previous)
            expected = math.exp(log_lam)
            if not math.isclose(e.intensity_before, expected, rel_tol=rtol):
                raise ParameterError(
                    f"event {i} intensity_before {e.intensity_before} != reconstructed {expected}"
                )
            if not math.isclose(e.intensity_after, e.intensity_before * math.exp(-e.mark), rel_tol=rtol):
                raise ParameterError(f"event {i} intensity_after does not match its mark")
            log_lam -= e.mark
            previous = e.time


@dataclass(slots=True)
class IntensityState:
    """Post-jump log-intensity and clock; the cursor a sampler advances."""
    log_lambda: float
    t: float = 0.0

    @classmethod
    def initial(cls, params: ModelParams) -> "IntensityState":
        return cls(params.log_lambda0, 0.0)

    @property
    def intensity(self) -> float:
        return math.exp(self.log_lambda)

    def move_to(self, t: float, beta: float) -> float:
        """Let the intensity grow to time ``t``; return the pre-jump log-intensity there."""
        self.log_lambda += beta * (t - self.t)
        self.t = t
        return self.log_lambda

    def jump(self, mark: float) -> float:
        self.log_lambda -= mark
        return self.log_lambda


def _check_times(log: EventLog, t: np.ndarray) -> None:
    if np.any(t < 0) or np.any(t > log.end_time) or np.any(np.isnan(t)):
        raise ParameterError(f"query time outside [0, {log.end_time}]")


def log_intensity_at(log: EventLog, params: ModelParams, t: ArrayLike):
    """log lambda_t using only events strictly before t."""
    times = np.asarray(t, dtype=float)
    _check_times(log, times)
    released = log.cumulative_marks[np.searchsorted(log.times, times, side="left")]
    value = params.log_lambda0 + params.beta * times - released
    return float(value) if value.ndim == 0 else value


def intensity_at(log: EventLog, params: ModelParams, t: ArrayLike):
    """lambda_t (pre-jump at event times)."""
    value = log_intensity_at(log, params, t)
    return math.exp(value) if isinstance(value, float) else np.exp(value)


def compensator(log: EventLog, params: ModelParams, t: Optional[float] = None) -> float:
    """Integral of lambda over (0, t], exact on every inter-event segment."""
    t = log.end_time if t is None else float(t)
    _check_times(log, np.asarray(t))
    k = int(np.searchsorted(log.times, t, side="left"))
    starts = np.concatenate(([0.0], log.times[:k]))
    ends = np.concatenate((log.times[:k], [t]))
    log_start = params.log_lambda0 + params.beta * starts - log.cumulative_marks[: k + 1]
    return float(np.sum(np.exp(log_start) * np.expm1(params.beta * (ends - starts))) / params.beta)
