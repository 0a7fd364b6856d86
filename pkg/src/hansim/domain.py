"""Vocabulary types shared across the simulator.

All times are integer seconds. One simulation tick is one second.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


class HanError(Exception):
    """Base class for every user-facing error raised by hansim."""


class ValidationError(HanError):
    """An appliance or stream definition violates its invariants."""


class NonPositivePower(ValidationError):
    pass


class MinExceedsMax(ValidationError):
    pass


class Type1WithDutyCycle(ValidationError):
    pass


class NotSchedulable(HanError):
    pass


class UnknownDevice(HanError):
    pass


class Kind(enum.Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"


class Action(enum.Enum):
    ON = "on"
    OFF = "off"


class DeviceStatus(enum.IntEnum):
    # integer codes are shared with the replica kernels
    OFF = 0
    WAIT = 1
    ON = 2


@dataclass(frozen=True, order=True)
class StreamKey:
    min_dcd_s: int
    max_dcp_s: int

    def __post_init__(self):
        if not 0 < self.min_dcd_s <= self.max_dcp_s:
            raise MinExceedsMax(
                f"stream needs 0 < min_dcd ({self.min_dcd_s}) <= max_dcp ({self.max_dcp_s})"
            )

    @property
    def label(self) -> str:
        return f"{self.min_dcd_s}_{self.max_dcp_s}"


@dataclass(frozen=True)
class ApplianceSpec:
    id: str
    kind: Kind
    power_kw: float
    min_dcd_s: Optional[int] = None
    max_dcp_s: Optional[int] = None

    @property
    def schedulable(self) -> bool:
        return self.kind is Kind.TYPE2


@dataclass(frozen=True, order=True)
class RequestEvent:
    time_s: int
    device: str
    action: Action

    def sort_key(self):
        # ON before OFF at equal (time, device) keeps a same-tick pair meaningful
        return (self.time_s, self.device, 0 if self.action is Action.ON else 1)


def validate_appliance(spec: ApplianceSpec) -> ApplianceSpec:
    """Check the invariants of ``spec`` and return it unchanged.

    Raises a :class:`ValidationError` subclass whose message names the
    offending device.
    """
    if not spec.power_kw > 0:
        raise NonPositivePower(f"{spec.id}: power must be > 0 kW, got {spec.power_kw}")
    if spec.kind is Kind.TYPE1:
        if spec.min_dcd_s is not None or spec.max_dcp_s is not None:
            raise Type1WithDutyCycle(f"{spec.id}: Type-1 appliances take no duty-cycle parameters")
        return spec
    if spec.min_dcd_s is None or spec.max_dcp_s is None:
        raise MinExceedsMax(f"{spec.id}: Type-2 appliances need min_dcd and max_dcp")
    if spec.min_dcd_s <= 0:
        raise MinExceedsMax(f"{spec.id}: min_dcd must be positive, got {spec.min_dcd_s}")
    if spec.min_dcd_s > spec.max_dcp_s:
        raise MinExceedsMax(
            f"{spec.id}: min_dcd {spec.min_dcd_s}s exceeds max_dcp {spec.max_dcp_s}s"
        )
    return spec


def stream_key(spec: ApplianceSpec) -> StreamKey:
    if spec.kind is not Kind.TYPE2:
        raise NotSchedulable(f"{spec.id}: Type-1 appliances are served immediately")
    validate_appliance(spec)
    return StreamKey(spec.min_dcd_s, spec.max_dcp_s)


def group_streams(devices) -> dict[StreamKey, list[str]]:
    """Partition the Type-2 devices by stream; ids within a stream are sorted."""
    streams: dict[StreamKey, list[str]] = {}
    for spec in devices:
        if spec.schedulable:
            streams.setdefault(stream_key(spec), []).append(spec.id)
    return {key: sorted(ids) for key, ids in sorted(streams.items())}
