"""Replicated per-stream load-management state machine.

Every device-interface runs one :class:`SchedulerState` per stream and feeds
it the requests it has learnt about. A tick is processed in three phases:

* request collection: ON puts an idle device on the waiting list with a
  deadline ``now + max_dcp``; OFF removes it from whichever list holds it.
* tracking: running devices that have been ON for ``min_dcd`` seconds go
  back to the waiting list with a fresh deadline.
* scheduling: the time left before the latest waiting deadline is cut into
  ``min_dcd``-long slots and the waiting list is admitted round-robin, a
  quota per slot. Devices whose deadline has arrived are admitted
  regardless of the quota.

In the default mode scheduling fires on slot boundaries of the stream
(``now % min_dcd == 0``) and whenever a waiting deadline is due. With
``literal=True`` it fires every tick, admits ``floor(size/slots) + 1``
devices and demotes only after strictly more than ``min_dcd`` seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable

from .domain import Action, DeviceStatus, StreamKey, UnknownDevice

MASK64 = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


@dataclass
class SchedulerState:
    stream: StreamKey
    status: dict
    wl: list = field(default_factory=list)
    rl: list = field(default_factory=list)
    wait_time: dict = field(default_factory=dict)
    start_time: dict = field(default_factory=dict)
    literal: bool = False

    @classmethod
    def new(cls, stream: StreamKey, devices: Iterable[Hashable], literal: bool = False):
        return cls(stream, {d: DeviceStatus.OFF for d in sorted(devices)}, literal=literal)

    def copy(self) -> "SchedulerState":
        return SchedulerState(
            self.stream,
            dict(self.status),
            list(self.wl),
            list(self.rl),
            dict(self.wait_time),
            dict(self.start_time),
            self.literal,
        )

    def check(self) -> None:
        """Assert the structural invariants; used by tests."""
        assert not set(self.wl) & set(self.rl)
        for d, s in self.status.items():
            assert (d in self.wl) == (s is DeviceStatus.WAIT), d
            assert (d in self.rl) == (s is DeviceStatus.ON), d
        assert all(d in self.wait_time for d in self.wl)
        assert all(d in self.start_time for d in self.rl)

    def digest(self) -> int:
        """64-bit FNV-1a fingerprint of the state.

        Devices are fed by their position in sorted order so the value is
        comparable with the compiled kernel, which only knows indices.
        """
        index = {d: i for i, d in enumerate(self.status)}
        return state_digest(
            [int(s) for s in self.status.values()],
            [(index[d], self.wait_time[d]) for d in self.wl],
            [(index[d], self.start_time[d]) for d in self.rl],
        )


def state_digest(status, wl, rl) -> int:
    h = FNV_OFFSET
    for v in status:
        h = ((h ^ v) * FNV_PRIME) & MASK64
    h = ((h ^ 0xFF) * FNV_PRIME) & MASK64
    for i, t in wl:
        h = ((h ^ i) * FNV_PRIME) & MASK64
        h = ((h ^ t) * FNV_PRIME) & MASK64
    h = ((h ^ 0xFE) * FNV_PRIME) & MASK64
    for i, t in rl:
        h = ((h ^ i) * FNV_PRIME) & MASK64
        h = ((h ^ t) * FNV_PRIME) & MASK64
    return h


@dataclass(frozen=True)
class ScheduleDecision:
    """Net per-device transitions of one tick, keyed by the end status."""

    tick_s: int
    turned_on: frozenset = frozenset()
    turned_off_to_wait: frozenset = frozenset()
    completed_off: frozenset = frozenset()

    @property
    def empty(self) -> bool:
        return not (self.turned_on or self.turned_off_to_wait or self.completed_off)


def p1_collect_requests(state: SchedulerState, requests, now_s: int) -> SchedulerState:
    """Apply ``requests`` (ordered ``(device, action)`` pairs) in place."""
    max_dcp = state.stream.max_dcp_s
    for device, action in requests:
        status = state.status.get(device)
        if status is None:
            raise UnknownDevice(f"device {device!r} is not part of stream {state.stream.label}")
        if action is Action.ON:
            if status is DeviceStatus.OFF:
                state.status[device] = DeviceStatus.WAIT
                state.wl.append(device)
                state.wait_time[device] = now_s + max_dcp
        else:
            if status is DeviceStatus.ON:
                state.rl.remove(device)
                del state.start_time[device]
            elif status is DeviceStatus.WAIT:
                state.wl.remove(device)
                del state.wait_time[device]
            state.status[device] = DeviceStatus.OFF
    return state


def p2_track_unfinished(state: SchedulerState, now_s: int) -> SchedulerState:
    if not state.rl:
        return state
    min_dcd = state.stream.min_dcd_s
    max_dcp = state.stream.max_dcp_s
    keep = []
    for device in state.rl:
        ran = now_s - state.start_time[device]
        done = ran > min_dcd if state.literal else ran >= min_dcd
        if done:
            state.status[device] = DeviceStatus.WAIT
            del state.start_time[device]
            state.wl.append(device)
            state.wait_time[device] = now_s + max_dcp
        else:
            keep.append(device)
    state.rl = keep
    return state


def admission_quota(size: int, span: int, min_dcd: int, literal: bool = False) -> int:
    """Number of waiting devices admitted on quota when scheduling fires.

    ``span`` is the time from now to the latest waiting deadline; the
    slot count ``span / min_dcd`` is kept as an exact ratio and clamped to
    at least one slot.
    """
    if span <= min_dcd:
        return size
    if literal:
        # jobs_to_schedule = size/slots, admitted while >= 0
        return size * min_dcd // span + 1
    return -(-size * min_dcd // span)


def p3_should_fire(state: SchedulerState, now_s: int) -> bool:
    if not state.wl:
        return False
    if state.literal or now_s % state.stream.min_dcd_s == 0:
        return True
    return any(state.wait_time[d] <= now_s for d in state.wl)


def p3_schedule(state: SchedulerState, now_s: int) -> tuple[SchedulerState, set]:
    """Admit waiting devices; returns the state and the set of admitted devices."""
    admitted = set()
    if not state.wl:
        return state, admitted
    size = len(state.wl)
    max_wtime = max(state.wait_time[d] for d in state.wl)
    quota = admission_quota(size, max_wtime - now_s, state.stream.min_dcd_s, state.literal)
    remaining = []
    for device in state.wl:
        due = state.wait_time[device] <= now_s
        if quota > 0:
            quota -= 1
        elif due:
            if state.literal:
                quota -= 1
        else:
            remaining.append(device)
            continue
        del state.wait_time[device]
        state.rl.append(device)
        state.status[device] = DeviceStatus.ON
        state.start_time[device] = now_s
        admitted.add(device)
    state.wl = remaining
    return state, admitted


def step(state: SchedulerState, requests, now_s: int) -> tuple[SchedulerState, ScheduleDecision]:
    """Advance ``state`` by one tick in place."""
    before = dict(state.status)
    p1_collect_requests(state, requests, now_s)
    p2_track_unfinished(state, now_s)
    admitted = set()
    if p3_should_fire(state, now_s):
        _, admitted = p3_schedule(state, now_s)
    on, wait, off = set(), set(), set()
    for device, now_status in state.status.items():
        prev = before[device]
        if now_status is DeviceStatus.ON:
            if prev is not DeviceStatus.ON or device in admitted:
                on.add(device)
        elif now_status is DeviceStatus.WAIT:
            if prev is DeviceStatus.ON:
                wait.add(device)
        elif prev is not DeviceStatus.OFF:
            off.add(device)
    decision = ScheduleDecision(now_s, frozenset(on), frozenset(wait), frozenset(off))
    return state, decision


def next_wakeup(state: SchedulerState, now_s: int) -> int | None:
    """Earliest tick after ``now_s`` at which the state can change without new requests."""
    stream = state.stream
    candidates = []
    if state.rl:
        extra = 1 if state.literal else 0
        candidates.append(min(state.start_time[d] for d in state.rl) + stream.min_dcd_s + extra)
    if state.wl:
        if state.literal:
            candidates.append(now_s + 1)
        else:
            candidates.append((now_s // stream.min_dcd_s + 1) * stream.min_dcd_s)
            candidates.append(min(state.wait_time[d] for d in state.wl))
    if not candidates:
        return None
    return max(now_s + 1, min(candidates))
