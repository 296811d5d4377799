from unittest.mock import patch

from src.metrics import RunMetrics


def test_bench_gauges_written(tmp_path):
    """Test that benchmark timings land in the textfile exposition."""
    metrics = RunMetrics()
    metrics.record_bench("thinning", 100, 0.5)
    metrics.record_delta(1.86)
    path = tmp_path / "bench.prom"
    metrics.write(str(path))
    text = path.read_text()
    assert 'stressrelease_bench_seconds{method="thinning",n="100"} 0.5' in text
    assert 'stressrelease_paths_per_second{method="thinning"} 200.0' in text
    assert "stressrelease_thinning_delta 1.86" in text


def test_push_failure_is_not_fatal():
    metrics = RunMetrics()
    with patch("src.metrics.push_to_gateway", side_effect=OSError("refused")):
        assert metrics.push("localhost:1") is False


def test_push_skipped_without_gateway():
    assert RunMetrics().push(None) is False


def test_push_uses_own_registry():
    metrics = RunMetrics()
    with patch("src.metrics.push_to_gateway") as push:
        assert metrics.push("localhost:9091") is True
    push.assert_called_once_with("localhost:9091", job="stressrelease", registry=metrics.registry)
