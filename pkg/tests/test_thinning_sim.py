import math

import numpy as np
import pytest
from scipy import stats

from src.core_model import Event, EventKind, EventLog, JumpDist, ModelParams, intensity_at
from src.errors import ParameterError
from src.exact_sim import simulate_batch
from src.streams import stream_generator, EXTERNAL_PURPOSE
from src.thinning_sim import (
    ExternalPath,
    grid_search_delta,
    simulate_external_path,
    simulate_path_thinning,
    upper_bound,
)


def _external(times, marks, end_time=10.0):
    return ExternalPath(np.asarray(times, dtype=float), np.asarray(marks, dtype=float), end_time)


def _empty_history():
    return EventLog((), 10.0)


def test_bound_without_external_arrivals(path_params):
    """Test that the bound is the window-end value when nothing intervenes."""
    window = upper_bound(_empty_history(), _external([], []), path_params, 1.0, 0.5)
    assert window.bound == pytest.approx(math.exp(path_params.beta * 1.5))
    assert (window.start, window.width) == (1.0, 0.5)


def test_bound_with_one_external_arrival(path_params):
    """Test the two-candidate maximum around one external arrival."""
    p = path_params
    tau, delta, arrival, mark = 1.0, 1.0, 1.4, 0.3
    window = upper_bound(_empty_history(), _external([arrival], [mark]), p, tau, delta)
    lam_tau = math.exp(p.beta * tau)
    expected = max(
        lam_tau * math.exp(p.beta * (arrival - tau)),
        lam_tau * math.exp(p.beta * (arrival - tau)) * math.exp(-mark) * math.exp(p.beta * (tau + delta - arrival)),
    )
    assert window.bound == pytest.approx(expected)


def test_bound_large_external_mark_peaks_at_arrival(path_params):
    p = path_params
    window = upper_bound(_empty_history(), _external([1.2], [5.0]), p, 1.0, 0.5)
    assert window.bound == pytest.approx(math.exp(p.beta * 1.2))


def test_bound_uses_self_history(path_params):
    """Test that self marks up to tau lower the bound and later ones are ignored."""
    p = path_params
    history = EventLog(
        (
            Event(0.5, EventKind.SELF, 0.4, math.exp(0.75), math.exp(0.35)),
            Event(2.0, EventKind.SELF, 1.0, 1.0, 1.0),
        ),
        10.0,
    )
    window = upper_bound(history, _external([], []), p, 1.0, 0.5)
    assert window.bound == pytest.approx(math.exp(p.beta * 1.5 - 0.4))


def test_bound_shrinks_to_current_intensity(path_params):
    window = upper_bound(_empty_history(), _external([], []), path_params, 2.0, 1e-12)
    assert window.bound == pytest.approx(math.exp(path_params.beta * 2.0))


def test_external_path_stress_is_strict(path_params):
    ext = _external([1.0, 2.0], [0.5, 0.25])
    assert ext.stress_before(1.0) == 0.0
    assert ext.stress_before(1.5) == 0.5
    assert ext.stress_before(3.0) == 0.75


def test_simulated_external_path_rate(path_params):
    """Test that the external arrival count is near rho * T."""
    rng = stream_generator(3, 0, EXTERNAL_PURPOSE)
    ext = simulate_external_path(path_params, 500.0, rng)
    assert abs(len(ext) - 1000) < 5 * math.sqrt(1000)
    assert np.all(ext.marks > 0)


def test_thinning_is_deterministic(path_params):
    a = simulate_path_thinning(path_params, 10.0, 1.0, seed=7)
    assert simulate_path_thinning(path_params, 10.0, 1.0, seed=7) == a
    a.check_invariants(path_params, rtol=1e-8)


def test_thinning_rejects_bad_delta(path_params):
    with pytest.raises(ParameterError):
        simulate_path_thinning(path_params, 10.0, 0.0, seed=1)


def test_bound_holds_and_matches_true_intensity(path_params):
    """Test every proposal: intensity below the window bound and equal to the realized left limit."""
    seen = []

    def monitor(window, proposal, value):
        seen.append((window, proposal, value))

    for seed in range(5):
        seen.clear()
        log = simulate_path_thinning(path_params, 10.0, 0.7, seed=seed, monitor=monitor)
        assert seen
        for window, proposal, value in seen:
            assert window.start < proposal <= window.end
            assert value <= window.bound * (1 + 1e-12)
            assert value == pytest.approx(intensity_at(log, path_params, proposal), rel=1e-9)


def test_poisson_limit():
    """Test that a tiny beta with no external stream gives about Poisson(T) self counts."""
    p = ModelParams(1.0, 1e-6, 0.0, JumpDist.deterministic(1e-6), JumpDist.exponential(1.0))
    counts = [simulate_path_thinning(p, 5.0, 10.0, seed=1, stream=i).n_self for i in range(400)]
    assert np.mean(counts) == pytest.approx(5.0, abs=0.4)


def test_grid_search_single_candidate(path_params):
    assert grid_search_delta(path_params, 10.0, [1.5], trials=1) == 1.5


def test_grid_search_validates_inputs(path_params):
    with pytest.raises(ParameterError, match="trials must be positive"):
        grid_search_delta(path_params, 10.0, [1.0, 2.0], trials=0)
    with pytest.raises(ParameterError):
        grid_search_delta(path_params, 10.0, [], trials=1)


def test_grid_search_returns_a_candidate(curve_params):
    best = grid_search_delta(curve_params, 20.0, [0.5, 2.0], trials=1, paths_per_trial=2)
    assert best in (0.5, 2.0)


@pytest.mark.slow
def test_grid_search_avoids_extremes(curve_params):
    """Test that tiny and huge windows both lose against a middle width."""
    best = grid_search_delta(curve_params, 100.0, [0.01, 1.86, 50.0], trials=2, paths_per_trial=5, seed=3)
    assert best == 1.86


@pytest.mark.slow
def test_count_distribution_matches_composition(curve_params):
    """Test a two-sample KS on N_20 between thinning and the composition batch."""
    thin = [simulate_path_thinning(curve_params, 20.0, 1.86, seed=5, stream=i).n_self for i in range(10_000)]
    comp, _ = simulate_batch(curve_params, 20.0, 10_000, seed=6).counts()
    assert stats.ks_2samp(thin, comp).pvalue > 1e-3
