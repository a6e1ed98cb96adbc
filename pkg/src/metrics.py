"""Prometheus metrics for solves and controller episodes.

The registry is written to a text file in the exposition format (for a node
exporter textfile collector) rather than served over HTTP.
"""

from pathlib import Path
from typing import Union

import structlog
from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

logger = structlog.get_logger()

registry = CollectorRegistry()

solves_total = Counter(
    "pebfcs_solves_total",
    "Window solves by strategy and solver status",
    ["strategy", "status"],
    registry=registry,
)
solve_seconds = Histogram(
    "pebfcs_solve_seconds",
    "Wall time of one window solve",
    ["strategy"],
    buckets=(0.01, 0.05, 0.1, 0.5, 1, 5, 10, 30, 60, 300),
    registry=registry,
)
bnb_nodes_total = Counter(
    "pebfcs_bnb_nodes_total",
    "Branch-and-bound nodes explored",
    ["strategy"],
    registry=registry,
)
degradations_total = Counter(
    "pebfcs_controller_degradations_total",
    "Windows that fell back to charge-all-parked commands",
    ["strategy"],
    registry=registry,
)
realized_peak_kw = Gauge(
    "pebfcs_realized_peak_kw",
    "Realized station peak of the last episode",
    ["strategy"],
    registry=registry,
)


def record_solve(strategy: str, status: str, seconds: float, nodes: int = 0) -> None:
    solves_total.labels(strategy=strategy, status=status).inc()
    solve_seconds.labels(strategy=strategy).observe(seconds)
    if nodes:
        bnb_nodes_total.labels(strategy=strategy).inc(nodes)


def record_degradation(strategy: str) -> None:
    degradations_total.labels(strategy=strategy).inc()


def set_realized_peak(strategy: str, peak_kw: float) -> None:
    realized_peak_kw.labels(strategy=strategy).set(peak_kw)


def write_metrics(path: Union[str, Path]) -> None:
    """Write the registry atomically in the Prometheus text format."""
    write_to_textfile(str(path), registry)
    logger.info("Metrics written", path=str(path))
