"""Tick loop binding the communication plane and the execution plane.

Every appliance has its own device-interface (node). Each tick the due
requests are raised at their nodes, a sharing round runs, every node hands
newly learnt requests to its scheduler replicas, and each appliance follows
the verdict of the replica running on its own node.

Delivery does not depend on scheduler state, so the loop is evaluated in
two passes: first the communication plane produces, per node, the tick at
which each request is consumed; then every (node, stream) replica is run
over the whole horizon by the replica kernel. The result is the same as
interleaving the two per tick.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernel
from .domain import Action, DeviceStatus, Kind, group_streams
from .metrics import LoadTrace, aggregate
from .stnet import consume_requests, make_views, raise_request, run_round, views_agree
from .workload import Mode, Scenario, rng_streams, scenario_events

log = logging.getLogger(__name__)

TYPE1_LABEL = "type1"


@dataclass(frozen=True)
class DelayRecord:
    device: str
    request_time_s: int
    first_on_s: Optional[int]
    max_dcp_s: int

    @property
    def delay_s(self) -> Optional[int]:
        if self.first_on_s is None:
            return None
        return self.first_on_s - self.request_time_s


@dataclass
class ModeResult:
    mode: Mode
    traces: dict
    total: LoadTrace
    delays: list
    transitions: list = field(default_factory=list)
    # ticks at which the replicas of some stream disagreed (agreement checks only)
    divergent_ticks: int = 0
    # all-successful rounds after which the node views still differed
    convergence_failures: int = 0


@dataclass
class SimResult:
    scenario: Scenario
    events: list
    runs: dict

    def __getitem__(self, mode) -> ModeResult:
        return self.runs[Mode(mode)]


def simulate(scenario: Scenario, mode: Optional[Mode] = None, *, literal: bool = False,
             check_agreement: bool = False, backend: Optional[str] = None) -> SimResult:
    """Run ``scenario`` in the requested mode(s).

    ``check_agreement`` runs every node's replicas independently and records
    per-tick disagreement; otherwise replicas fed identical input are
    evaluated once. ``backend`` forces ``"python"`` or ``"cython"``.
    """
    mode = Mode(mode) if mode is not None else scenario.mode
    events = scenario_events(scenario)
    runs = {}
    for m in mode.runs:
        if m is Mode.COORDINATED:
            runs[m] = _coordinated(scenario, events, literal, check_agreement, backend)
        else:
            runs[m] = _baseline(scenario, events)
    return SimResult(scenario, events, runs)


def _kernel(backend):
    if backend is None:
        return kernel.run_replica
    if backend == "python":
        return kernel.python_run_replica
    if backend == "cython":
        from . import _ckernel

        return _ckernel.run_replica
    raise ValueError(f"unknown backend {backend!r}")


def _type1_load(scenario, events, horizon):
    devmap = scenario.device_map
    load = np.zeros(horizon + 1)
    on_since = {}
    for e in events:
        spec = devmap[e.device]
        if spec.kind is not Kind.TYPE1:
            continue
        if e.action is Action.ON:
            on_since.setdefault(e.device, e.time_s)
        elif e.device in on_since:
            start = on_since.pop(e.device)
            load[start] += spec.power_kw
            load[e.time_s] -= spec.power_kw
    for dev, start in on_since.items():
        load[start] += devmap[dev].power_kw
        load[horizon] -= devmap[dev].power_kw
    # cumulative sums of +p/-p pairs can leave -1e-16 residue
    return np.clip(np.cumsum(load[:horizon]), 0.0, None)


def _traces(scenario, stream_loads, events):
    horizon = scenario.duration_s
    traces = {label: LoadTrace(label, load) for label, load in stream_loads.items()}
    if any(d.kind is Kind.TYPE1 for d in scenario.devices):
        traces[TYPE1_LABEL] = LoadTrace(TYPE1_LABEL, _type1_load(scenario, events, horizon))
    if traces:
        total = aggregate(traces.values())
    else:
        total = LoadTrace("total", np.zeros(horizon))
    return traces, total


def disseminate(scenario: Scenario, events, check: bool = False):
    """Communication plane: per node, the ``(tick, event)`` consumption schedule.

    Returns ``(schedule, views, convergence_failures)``.
    """
    horizon = scenario.duration_s
    cfg = scenario.round_cfg
    period = cfg.period_s
    views = make_views(d.id for d in scenario.devices)
    schedule = {n: [] for n in views}
    if not views:
        return schedule, views, 0
    _, net_rng = rng_streams(scenario.seed)
    by_tick = defaultdict(list)
    for e in events:
        by_tick[e.time_s].append(e)
    event_ticks = sorted(by_tick)
    idx = 0
    last_raise = None
    failures = 0
    t = event_ticks[0] if event_ticks else horizon
    while t < horizon:
        changed = set()
        if idx < len(event_ticks) and event_ticks[idx] == t:
            for e in by_tick[t]:
                raise_request(views, e)
                changed.add(e.device)
            last_raise = t
            idx += 1
        stale = last_raise is not None and any(
            v.last_round_received * period < last_raise for v in views.values())
        if stale and t % period == 0:
            r = t // period
            run_round(views, (), cfg, net_rng, r)
            got = [n for n, v in views.items() if v.last_round_received == r]
            changed.update(got)
            if check and len(got) == len(views) and not views_agree(views):
                failures += 1
            stale = any(v.last_round_received * period < last_raise for v in views.values())
        for node in sorted(changed):
            if not views[node].pending:
                continue
            fresh, _ = consume_requests(views[node], t)
            schedule[node] += [(t, e) for e in fresh]
        nxt = event_ticks[idx] if idx < len(event_ticks) else horizon
        if stale:
            nxt = min(nxt, (t // period + 1) * period)
        t = nxt
    return schedule, views, failures


def _coordinated(scenario, events, literal, check, backend):
    run = _kernel(backend)
    horizon = scenario.duration_s
    devmap = scenario.device_map
    streams = group_streams(scenario.devices)
    type2 = [e for e in events if devmap[e.device].kind is Kind.TYPE2]
    schedule, views, failures = disseminate(scenario, type2, check)
    own = defaultdict(list)
    for e in type2:
        own[e.device].append(e)

    stream_loads = {}
    delays = []
    transitions = []
    divergent = 0
    for key, ids in streams.items():
        index = {d: i for i, d in enumerate(ids)}
        nodes = list(views) if check else ids
        cache = {}
        host_cols = {}
        digests = []
        for node in nodes:
            mine = [(t, e) for t, e in schedule[node] if e.device in index]
            ev_tick = np.array([t for t, _ in mine], dtype=np.int64)
            ev_dev = np.array([index[e.device] for _, e in mine], dtype=np.int64)
            ev_act = np.array([e.action is Action.ON for _, e in mine], dtype=np.int64)
            memo = (ev_tick.tobytes(), ev_dev.tobytes(), ev_act.tobytes())
            if not check and memo in cache:
                status, digest = cache[memo]
            else:
                status, digest = run(len(ids), key.min_dcd_s, key.max_dcp_s, horizon,
                                     ev_tick, ev_dev, ev_act, literal=literal, digests=check)
                if not check:
                    cache[memo] = (status, digest)
            if check:
                digests.append(digest)
            final = status[-1] if horizon else np.zeros(len(ids), dtype=np.uint8)
            views[node].status_replica.update(
                {d: DeviceStatus(int(final[i])) for d, i in index.items()})
            if node in index:
                host_cols[node] = status[:, index[node]].copy()
        if check and digests:
            stacked = np.vstack(digests)
            divergent += int(np.count_nonzero(np.any(stacked != stacked[0], axis=0)))

        load = np.zeros(horizon)
        for dev, col in host_cols.items():
            on = col == DeviceStatus.ON
            load[on] += devmap[dev].power_kw
            change = np.flatnonzero(np.diff(col.astype(np.int16))) + 1
            if horizon and col[0] != DeviceStatus.OFF:
                change = np.concatenate(([0], change))
            transitions += [(int(t), dev, DeviceStatus(int(col[t])).name) for t in change]
            delays += _coordinated_delays(dev, own[dev], col, key.max_dcp_s)
        stream_loads[key.label] = load
        if divergent:
            log.info("stream %s: replicas diverged on %d ticks", key.label, divergent)

    traces, total = _traces(scenario, stream_loads, events)
    transitions.sort()
    delays.sort(key=lambda r: (r.request_time_s, r.device))
    return ModeResult(Mode.COORDINATED, traces, total, delays, transitions, divergent, failures)


def _coordinated_delays(dev, dev_events, col, max_dcp):
    on_ticks = np.flatnonzero(col == DeviceStatus.ON)
    records = []
    active_since = None
    for i, e in enumerate(dev_events):
        if e.action is Action.ON:
            if active_since is None:
                active_since = e.time_s
                end = next((x.time_s for x in dev_events[i + 1:] if x.action is Action.OFF),
                           len(col))
                j = np.searchsorted(on_ticks, e.time_s)
                first = int(on_ticks[j]) if j < len(on_ticks) and on_ticks[j] < end else None
                records.append(DelayRecord(dev, e.time_s, first, max_dcp))
        else:
            active_since = None
    return records


def baseline_power(spec, dev_events, horizon: int) -> np.ndarray:
    """Free-running duty cycle anchored at each effective ON request.

    ON for ``min_dcd`` then OFF for ``max_dcp - min_dcd``, repeating until an
    OFF request. Returns a boolean ON mask over the horizon.
    """
    on = np.zeros(horizon, dtype=bool)
    anchor = None
    for e in list(dev_events) + [None]:
        if e is not None and e.action is Action.ON:
            if anchor is None:
                anchor = e.time_s
            continue
        if anchor is not None:
            stop = horizon if e is None else min(e.time_s, horizon)
            phase = (np.arange(anchor, stop) - anchor) % spec.max_dcp_s
            on[anchor:stop] = phase < spec.min_dcd_s
            anchor = None
    return on


def baseline_step(spec, anchor_s: int, now_s: int) -> DeviceStatus:
    """Physical state at ``now_s`` of a device free-running since ``anchor_s``."""
    if now_s < anchor_s:
        return DeviceStatus.OFF
    on = (now_s - anchor_s) % spec.max_dcp_s < spec.min_dcd_s
    return DeviceStatus.ON if on else DeviceStatus.OFF


def _baseline(scenario, events):
    horizon = scenario.duration_s
    devmap = scenario.device_map
    per_device = defaultdict(list)
    for e in events:
        if devmap[e.device].kind is Kind.TYPE2:
            per_device[e.device].append(e)
    stream_loads = {}
    delays = []
    transitions = []
    for key, ids in group_streams(scenario.devices).items():
        load = np.zeros(horizon)
        for dev in ids:
            spec = devmap[dev]
            on = baseline_power(spec, per_device[dev], horizon)
            load[on] += spec.power_kw
            col = on.astype(np.int8)
            change = np.flatnonzero(np.diff(col)) + 1
            if horizon and on[0]:
                change = np.concatenate(([0], change))
            transitions += [(int(t), dev, "ON" if on[t] else "OFF") for t in change]
            delays += _coordinated_delays(dev, per_device[dev],
                                          np.where(on, DeviceStatus.ON, DeviceStatus.OFF),
                                          spec.max_dcp_s)
        stream_loads[key.label] = load
    traces, total = _traces(scenario, stream_loads, events)
    transitions.sort()
    delays.sort(key=lambda r: (r.request_time_s, r.device))
    return ModeResult(Mode.BASELINE, traces, total, delays, transitions)


def delay_records(result: ModeResult):
    """``(device, request_time_s, first_on_s)`` per effective ON request."""
    return [(r.device, r.request_time_s, r.first_on_s) for r in result.delays]
