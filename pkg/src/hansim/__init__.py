"""Decentralized duty-cycle coordination of home appliances, simulated."""

from .domain import (
    Action,
    ApplianceSpec,
    DeviceStatus,
    HanError,
    Kind,
    RequestEvent,
    StreamKey,
    stream_key,
    validate_appliance,
)
from .engine import SimResult, simulate
from .kernel import BACKEND
from .workload import Mode, Scenario, load_scenario, parse_scenario, render_scenario

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ApplianceSpec",
    "BACKEND",
    "DeviceStatus",
    "HanError",
    "Kind",
    "Mode",
    "RequestEvent",
    "Scenario",
    "SimResult",
    "StreamKey",
    "load_scenario",
    "parse_scenario",
    "render_scenario",
    "simulate",
    "stream_key",
    "validate_appliance",
]
