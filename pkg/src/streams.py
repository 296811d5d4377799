"""Seeded random streams.

Every simulated path owns its generators. A generator is addressed by
``(seed, stream, purpose)``: ``stream`` is the path index and ``purpose``
separates the self-arrival draws from the external Poisson path, so two
samplers given the same ``(seed, stream)`` see the same external arrivals.
Philox is counter-based, so distinct spawn keys give disjoint streams.
"""
import math
from typing import Tuple

import numpy as np

from .errors import ParameterError

SELF_PURPOSE = 0
EXTERNAL_PURPOSE = 1
BATCH_PURPOSE = 2


def stream_generator(seed: int, stream: int = 0, purpose: int = SELF_PURPOSE) -> np.random.Generator:
    if seed < 0 or stream < 0:
        raise ParameterError(f"seed and stream must be nonnegative, got seed={seed}, stream={stream}")
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(purpose)))
    return np.random.Generator(np.random.Philox(seq))


def path_generators(seed: int, stream: int = 0) -> Tuple[np.random.Generator, np.random.Generator]:
    """Return the (self, external) generator pair of one path."""
    return (
        stream_generator(seed, stream, SELF_PURPOSE),
        stream_generator(seed, stream, EXTERNAL_PURPOSE),
    )


def open_uniform(rng: np.random.Generator) -> float:
    """Uniform draw on the open interval (0, 1)."""
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return u


def exponential_gap(rng: np.random.Generator, rate: float) -> float:
    """Waiting time of a rate-``rate`` Poisson clock; +inf when the rate is zero."""
    if rate <= 0.0:
        return math.inf
    return float(rng.exponential(1.0 / rate))
