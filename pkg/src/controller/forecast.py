"""Arrival-SOC forecasts from departure SOCs and observed trip consumption."""

from typing import Dict, List, Literal, Optional, Sequence

import structlog

logger = structlog.get_logger()


def forecast_arrival_soc(last_departure_soc: float, delta_soc_estimate: float) -> float:
    """SOC on return: departure SOC minus the expected trip consumption.

    The result is clamped to [0, 1]; a clamp at 0 is logged as a low-SOC
    warning. No SOC_min floor is applied here.
    """
    estimate = last_departure_soc - delta_soc_estimate
    if estimate < 0.0:
        logger.warning(
            "Forecast arrival SOC below zero, clamped",
            departure_soc=round(last_departure_soc, 6),
            delta_soc=round(delta_soc_estimate, 6),
        )
        return 0.0
    return min(estimate, 1.0)


class DeltaSocForecaster:
    """Per-bus trip ΔSOC estimates.

    ``running_mean`` averages the ΔSOC observed on each bus's completed trips
    and falls back to the prior mean before the first observation;
    ``timetable`` trusts the planned value of every trip.
    """

    def __init__(
        self,
        prior_mean: float,
        mode: Literal["running_mean", "timetable"] = "running_mean",
        bus_count: int = 0,
    ):
        if not 0 < prior_mean <= 1:
            raise ValueError(f"prior ΔSOC mean must lie in (0, 1], got {prior_mean}")
        self.prior_mean = prior_mean
        self.mode = mode
        self._history: Dict[int, List[float]] = {n: [] for n in range(bus_count)}

    @classmethod
    def from_planned(
        cls, planned: Sequence[float], mode: Literal["running_mean", "timetable"], bus_count: int
    ) -> "DeltaSocForecaster":
        """Prior mean taken from the planned trip ΔSOCs of the timetable."""
        prior = sum(planned) / len(planned) if planned else 0.2
        return cls(prior, mode, bus_count)

    def observe(self, bus: int, delta_soc: float) -> None:
        self._history.setdefault(bus, []).append(delta_soc)

    def observations(self, bus: int) -> int:
        return len(self._history.get(bus, ()))

    def estimate(self, bus: int, planned: Optional[float] = None) -> float:
        if self.mode == "timetable" and planned is not None:
            return planned
        history = self._history.get(bus)
        if not history:
            return self.prior_mean
        return sum(history) / len(history)
