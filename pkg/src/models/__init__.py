"""Model builders, schedule extraction and verification."""

from .builders import build_model_a, build_model_a_relaxed, build_model_b, build_model_c, demand_bounds
from .schedule import Violation, extract_schedule, verify_schedule, window_costs, window_objective
from .window import BusBoundary, ModelKind, VarMap, WindowInput, WindowParking

__all__ = [
    "BusBoundary",
    "ModelKind",
    "VarMap",
    "Violation",
    "WindowInput",
    "WindowParking",
    "build_model_a",
    "build_model_a_relaxed",
    "build_model_b",
    "build_model_c",
    "demand_bounds",
    "extract_schedule",
    "verify_schedule",
    "window_costs",
    "window_objective",
]
