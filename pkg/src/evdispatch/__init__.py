"""EV ride-hailing dispatch: proactive guidance, batched matching with
charging-station selection, and a rolling-horizon benchmark simulator."""

from .config import Config, ConfigError, load_config
from .core import (BatchingWindow, ChargingStation, Ev, EvStatus, GeoPoint,
                   Rect, Region, RiderRequest, distance, soc_after_travel)
from .sim import POLICIES, Policy, Simulator, WindowRecord, run_experiment

__all__ = [
    "BatchingWindow", "ChargingStation", "Config", "ConfigError", "Ev",
    "EvStatus", "GeoPoint", "POLICIES", "Policy", "Rect", "Region",
    "RiderRequest", "Simulator", "WindowRecord", "distance", "load_config",
    "run_experiment", "soc_after_travel",
]
