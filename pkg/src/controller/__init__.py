"""Rolling-horizon controller."""

from ..piles import assign_piles, pile_matrix
from .forecast import DeltaSocForecaster, forecast_arrival_soc
from .rolling import (
    CommandRecord,
    ControllerState,
    DegradationEvent,
    DemandShortfall,
    EpisodeResult,
    LowSocEvent,
    StrategyKind,
    build_window,
    realized_costs,
    run_episode,
    step,
    uncoordinated_profile,
    uncoordinated_schedule,
    unroll_timetable,
)

__all__ = [
    "CommandRecord",
    "ControllerState",
    "DegradationEvent",
    "DeltaSocForecaster",
    "DemandShortfall",
    "EpisodeResult",
    "LowSocEvent",
    "StrategyKind",
    "assign_piles",
    "build_window",
    "forecast_arrival_soc",
    "pile_matrix",
    "realized_costs",
    "run_episode",
    "step",
    "uncoordinated_profile",
    "uncoordinated_schedule",
    "unroll_timetable",
]
