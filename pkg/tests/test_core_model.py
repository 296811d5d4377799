import math

import numpy as np
import pytest

from src.core_model import (
    Event,
    EventKind,
    EventLog,
    IntensityState,
    JumpDist,
    ModelParams,
    compensator,
    exp_moment,
    intensity_at,
    log_intensity_at,
)
from src.errors import DivergentMomentError, ParameterError


def _log(events, end_time=10.0):
    return EventLog(tuple(events), end_time)


def _event(params, t, kind, mark, log_before):
    return Event(t, kind, mark, math.exp(log_before), math.exp(log_before - mark))


def test_beta_must_be_positive():
    """Test that a zero beta is rejected with the constraint named."""
    with pytest.raises(ParameterError, match="beta must be positive"):
        ModelParams(1.0, 0.0, 1.0, JumpDist.exponential(1.0), JumpDist.exponential(1.0))


def test_negative_rho_rejected():
    """Test that rho below zero is rejected."""
    with pytest.raises(ParameterError, match="rho must be nonnegative"):
        ModelParams(1.0, 1.0, -0.5, JumpDist.exponential(1.0), JumpDist.exponential(1.0))


def test_lambda0_must_be_positive():
    with pytest.raises(ParameterError, match="lambda0 must be positive"):
        ModelParams(0.0, 1.0, 1.0, JumpDist.exponential(1.0), JumpDist.exponential(1.0))


def test_jump_dist_rejects_nonpositive_rate():
    """Test that an exponential jump law needs a positive rate."""
    with pytest.raises(ParameterError):
        JumpDist.exponential(0.0)
    with pytest.raises(ParameterError):
        JumpDist.deterministic(-1.0)


def test_exp_moment_exponential():
    """Test m_k = k/(a-k) for exponential marks."""
    assert exp_moment(JumpDist.exponential(3.0), 1) == pytest.approx(0.5)
    assert exp_moment(JumpDist.exponential(3.0), 2) == pytest.approx(2.0)
    assert exp_moment(JumpDist.exponential(10.0), 1) == pytest.approx(1 / 9)
    assert exp_moment(JumpDist.exponential(10.0), 2) == pytest.approx(0.25)


def test_exp_moment_divergent():
    """Test that the moment of order k diverges once the rate is not above k."""
    with pytest.raises(DivergentMomentError) as info:
        exp_moment(JumpDist.exponential(3.0), 3)
    assert info.value.orders == (3,)


def test_exp_moment_deterministic():
    assert exp_moment(JumpDist.deterministic(0.5), 2) == pytest.approx(math.e - 1)


def test_custom_jump_dist():
    """Test that a custom law samples through its sampler and reports supplied moments only."""
    dist = JumpDist.custom(lambda rng, size: rng.gamma(2.0, 0.25, size), {1: 7 / 9}, name="gamma")
    rng = np.random.default_rng(0)
    assert dist.sample(rng) > 0
    assert dist.sample(rng, 5).shape == (5,)
    assert exp_moment(dist, 1) == pytest.approx(7 / 9)
    with pytest.raises(DivergentMomentError, match="not supplied"):
        exp_moment(dist, 2)


def test_intensity_is_left_continuous(path_params):
    """Test that the intensity at an event time is the pre-jump value."""
    p = path_params
    log = _log([_event(p, 1.0, EventKind.SELF, 0.7, p.beta * 1.0)])
    assert intensity_at(log, p, 1.0) == pytest.approx(math.exp(1.5))
    assert intensity_at(log, p, 1.0 + 1e-12) == pytest.approx(math.exp(1.5 - 0.7), rel=1e-9)


def test_intensity_example_values(path_params):
    """Test lambda at t=0 and the jump relation of a single event."""
    p = path_params
    log = _log([_event(p, 2.0, EventKind.EXTERNAL, 1.0, 3.0)])
    assert intensity_at(log, p, 0.0) == 1.0
    assert intensity_at(log, p, 3.0) == pytest.approx(math.exp(1.5 * 3.0 - 1.0))


def test_log_intensity_vectorized(path_params):
    p = path_params
    log = _log([_event(p, 1.0, EventKind.SELF, 0.5, 1.5), _event(p, 2.0, EventKind.EXTERNAL, 0.25, 2.5)])
    values = log_intensity_at(log, p, [0.5, 1.0, 1.5, 3.0])
    np.testing.assert_allclose(values, [0.75, 1.5, 2.25 - 0.5, 4.5 - 0.75])


def test_query_outside_horizon(path_params):
    log = _log([])
    with pytest.raises(ParameterError):
        intensity_at(log, path_params, 11.0)


def test_compensator_without_events(path_params):
    """Test the integral of exp(beta s) on an empty path."""
    log = _log([], end_time=2.0)
    assert compensator(log, path_params) == pytest.approx(math.expm1(3.0) / 1.5)


def test_compensator_matches_quadrature(path_params):
    """Test the closed-form compensator against numerical integration."""
    from scipy import integrate

    p = path_params
    log = _log([_event(p, 0.4, EventKind.SELF, 0.9, 0.6), _event(p, 1.1, EventKind.EXTERNAL, 0.3, 0.6 + 1.05 - 0.9)], 2.0)
    numeric, _ = integrate.quad(lambda s: intensity_at(log, p, s), 0.0, 2.0, points=[0.4, 1.1])
    assert compensator(log, p) == pytest.approx(numeric, rel=1e-8)


def test_check_invariants_detects_bad_intensity(path_params):
    p = path_params
    good = _log([_event(p, 1.0, EventKind.SELF, 0.5, 1.5)])
    good.check_invariants(p)
    bad = _log([Event(1.0, EventKind.SELF, 0.5, 2.0, 2.0 * math.exp(-0.5))])
    with pytest.raises(ParameterError, match="intensity_before"):
        bad.check_invariants(p)


def test_event_log_counts(path_params):
    p = path_params
    log = _log([_event(p, 1.0, EventKind.SELF, 0.5, 1.5), _event(p, 2.0, EventKind.EXTERNAL, 0.25, 2.5)])
    assert (log.n_self, log.n_external) == (1, 1)
    assert len(log) == 2
    np.testing.assert_allclose(log.cumulative_marks, [0.0, 0.5, 0.75])


def test_intensity_state_tracks_log(path_params):
    state = IntensityState.initial(path_params)
    assert state.move_to(2.0, path_params.beta) == pytest.approx(3.0)
    assert state.jump(1.0) == pytest.approx(2.0)
    assert state.intensity == pytest.approx(math.exp(2.0))


@pytest.mark.parametrize("k", [1, 2])
def test_exp_moment_matches_sample_mean(k):
    """Test m_k against the sample mean of exp(kX) - 1 over 10^6 marks."""
    dist = JumpDist.exponential(10.0)
    values = np.expm1(k * dist.sample(np.random.default_rng(k), 1_000_000))
    se = values.std(ddof=1) / math.sqrt(values.size)
    assert abs(values.mean() - exp_moment(dist, k)) < 4.0 * se
