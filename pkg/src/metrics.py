"""Prometheus gauges for benchmark and validation runs."""
import logging
from typing import Optional

from prometheus_client import CollectorRegistry, Gauge, push_to_gateway, write_to_textfile

logger = logging.getLogger(__name__)

JOB_NAME = "stressrelease"


class RunMetrics:
    """Gauges of one CLI run, held in their own registry."""

    def __init__(self):
        self.registry = CollectorRegistry()
        self.bench_seconds = Gauge(
            "stressrelease_bench_seconds",
            "Fastest wall time to simulate n paths",
            ["method", "n"],
            registry=self.registry,
        )
        self.paths_per_second = Gauge(
            "stressrelease_paths_per_second",
            "Monte Carlo throughput",
            ["method"],
            registry=self.registry,
        )
        self.thinning_delta = Gauge(
            "stressrelease_thinning_delta",
            "Window width chosen by grid search",
            registry=self.registry,
        )
        self.validation_passed = Gauge(
            "stressrelease_validation_passed",
            "1 when the last validation passed its acceptance bands",
            registry=self.registry,
        )

    def record_bench(self, method: str, n: int, seconds: float) -> None:
        self.bench_seconds.labels(method=method, n=str(n)).set(seconds)
        if seconds > 0:
            self.paths_per_second.labels(method=method).set(n / seconds)

    def record_delta(self, delta: float) -> None:
        self.thinning_delta.set(delta)

    def record_validation(self, passed: bool, paths_per_second: dict) -> None:
        self.validation_passed.set(1 if passed else 0)
        for method, rate in paths_per_second.items():
            self.paths_per_second.labels(method=method).set(rate)

    def write(self, path: str) -> None:
        write_to_textfile(path, self.registry)
        logger.info(f"metrics written to {path}")

    def push(self, gateway: Optional[str]) -> bool:
        """Push to a Pushgateway; failures are logged and reported as False."""
        if not gateway:
            return False
        try:
            push_to_gateway(gateway, job=JOB_NAME, registry=self.registry)
        except Exception as e:
            logger.warning(f"Failed to push metrics to {gateway}: {e}")
            return False
        return True
