"""Request generation and the ``.han`` scenario file format.

A scenario file is line oriented::

    [scenario]
    name = dcube
    duration = 5h
    seed = 7
    mode = both

    [devices]
    ac = type2 power=1.0 min_dcd=15min max_dcp=30min count=30

    [arrivals]
    ac = poisson rate=10/h

    [network]
    delivery = perfect

See ``docs/scenario-format.md`` for the full grammar.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from .domain import (
    Action,
    ApplianceSpec,
    HanError,
    Kind,
    MinExceedsMax,
    RequestEvent,
    UnknownDevice,
    ValidationError,
    validate_appliance,
)
from .stnet import Blackout, IidLoss, Perfect, RoundConfig


class ScenarioError(HanError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ScenarioSyntaxError(ScenarioError):
    pass


class InvalidDutyCycle(ScenarioError):
    pass


class InvalidDevice(ScenarioError):
    pass


class Mode(enum.Enum):
    COORDINATED = "coordinated"
    BASELINE = "baseline"
    BOTH = "both"

    @property
    def runs(self):
        if self is Mode.BOTH:
            return (Mode.COORDINATED, Mode.BASELINE)
        return (self,)


# --- arrival processes -----------------------------------------------------

@dataclass(frozen=True)
class Poisson:
    """Aggregate Poisson arrivals of ON requests over ``target``.

    With ``per="set"`` one process with ``rate_per_h`` feeds the whole target
    set, arrivals visiting the devices in a seeded random order. With
    ``per="device"`` every device gets its own process at that rate.
    """

    target: tuple
    rate_per_h: float
    per: str = "set"
    start_s: int = 0
    stop_s: Optional[int] = None


@dataclass(frozen=True)
class Periodic:
    target: tuple
    interval_s: int
    phase_s: int = 0
    hold_s: Optional[int] = None
    start_s: int = 0
    stop_s: Optional[int] = None


@dataclass(frozen=True)
class Explicit:
    """The same list of ``(time_s, Action)`` applied to every target device."""

    target: tuple
    events: tuple
    start_s: int = 0
    stop_s: Optional[int] = None


@dataclass(frozen=True)
class RandomToggle:
    """Alternating OFF/ON holding times with exponential lengths, per device."""

    target: tuple
    mean_on_s: float
    mean_off_s: float
    start_s: int = 0
    stop_s: Optional[int] = None


def _window(proc, horizon_s):
    lo = max(0, proc.start_s)
    hi = horizon_s if proc.stop_s is None else min(horizon_s, proc.stop_s)
    return lo, hi


def _check_process(proc):
    if isinstance(proc, Poisson):
        if proc.rate_per_h <= 0:
            raise HanError("poisson rate must be positive")
        if proc.per not in ("set", "device"):
            raise HanError(f"poisson per must be 'set' or 'device', got {proc.per!r}")
    elif isinstance(proc, Periodic):
        if proc.interval_s <= 0:
            raise HanError("periodic interval must be positive")
        if proc.hold_s is not None and proc.hold_s <= 0:
            raise HanError("periodic hold must be positive")
    elif isinstance(proc, RandomToggle):
        if proc.mean_on_s <= 0 or proc.mean_off_s <= 0:
            raise HanError("toggle holding times must be positive")


def _poisson_times(rate_per_h, lo, hi, rng):
    if hi <= lo:
        return []
    mean_gap = 3600.0 / rate_per_h
    times = []
    t = float(lo)
    while True:
        t += rng.exponential(mean_gap)
        if t >= hi:
            return times
        times.append(int(t))


def gen_events(proc, horizon_s: int, rng) -> list[RequestEvent]:
    """Events of one arrival process within ``[0, horizon_s)``, sorted by time."""
    _check_process(proc)
    lo, hi = _window(proc, horizon_s)
    events = []
    if isinstance(proc, Poisson):
        if proc.per == "device":
            for dev in sorted(proc.target):
                events += [RequestEvent(t, dev, Action.ON)
                           for t in _poisson_times(proc.rate_per_h, lo, hi, rng)]
        else:
            times = _poisson_times(proc.rate_per_h, lo, hi, rng)
            order = list(rng.permutation(sorted(proc.target))) if proc.target else []
            events = [RequestEvent(t, str(order[i % len(order)]), Action.ON)
                      for i, t in enumerate(times)] if order else []
    elif isinstance(proc, Periodic):
        first = proc.phase_s
        if first < lo:
            first += -(-(lo - first) // proc.interval_s) * proc.interval_s
        for t in range(first, hi, proc.interval_s):
            for dev in proc.target:
                events.append(RequestEvent(t, dev, Action.ON))
                if proc.hold_s is not None and t + proc.hold_s < hi:
                    events.append(RequestEvent(t + proc.hold_s, dev, Action.OFF))
    elif isinstance(proc, Explicit):
        for t, action in proc.events:
            if lo <= t < hi:
                events += [RequestEvent(t, dev, action) for dev in proc.target]
    elif isinstance(proc, RandomToggle):
        for dev in sorted(proc.target):
            t = float(lo)
            on = False
            while True:
                t += rng.exponential(proc.mean_on_s if on else proc.mean_off_s)
                if t >= hi:
                    break
                on = not on
                events.append(RequestEvent(int(t), dev, Action.ON if on else Action.OFF))
    else:
        raise TypeError(f"unknown arrival process {proc!r}")
    events.sort(key=RequestEvent.sort_key)
    return events


# --- scenario ----------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    duration_s: int
    devices: tuple = ()
    arrivals: tuple = ()
    round_cfg: RoundConfig = field(default_factory=RoundConfig)
    seed: int = 0
    mode: Mode = Mode.BOTH
    tick_s: int = 1

    @property
    def device_map(self):
        return {d.id: d for d in self.devices}


def rng_streams(seed: int):
    """Independent generators for request generation and radio losses."""
    work, net = np.random.SeedSequence(seed).spawn(2)
    return work, np.random.default_rng(net)


def scenario_events(scenario: Scenario) -> list[RequestEvent]:
    """All requests of the scenario, one child generator per arrival process."""
    work, _ = rng_streams(scenario.seed)
    children = work.spawn(len(scenario.arrivals))
    events = []
    for proc, child in zip(scenario.arrivals, children):
        events += gen_events(proc, scenario.duration_s, np.random.default_rng(child))
    events.sort(key=RequestEvent.sort_key)
    return events


# --- parsing -----------------------------------------------------------------

_UNITS = {"": 1, "s": 1, "sec": 1, "min": 60, "m": 60, "h": 3600}
_DURATION = re.compile(r"^([0-9]*\.?[0-9]+)\s*(s|sec|min|m|h)?$")


def parse_duration(text: str) -> int:
    """``"15min"`` -> 900. Bare numbers are seconds."""
    m = _DURATION.match(text.strip())
    if not m:
        raise ValueError(f"bad duration {text!r}")
    value = Fraction(m.group(1)) * _UNITS[m.group(2) or ""]
    if value.denominator != 1:
        raise ValueError(f"duration {text!r} is not a whole number of seconds")
    return int(value)


def parse_rate(text: str) -> float:
    """Requests per hour; accepts ``10``, ``10/h`` and ``0.5/min``."""
    num, _, unit = text.strip().partition("/")
    per = {"": 1.0, "h": 1.0, "min": 60.0, "s": 3600.0}.get(unit.strip())
    if per is None:
        raise ValueError(f"bad rate {text!r}")
    return float(num) * per


def parse_number_list(text: str):
    """Sweep values: numbers, fractions like ``1/6`` or durations."""
    out = []
    for tok in text.replace(",", " ").split():
        if "/" in tok:
            out.append(Fraction(tok))
        else:
            try:
                out.append(Fraction(tok))
            except ValueError:
                out.append(Fraction(parse_duration(tok)))
    return out


def _attrs(tokens, line):
    attrs = {}
    for tok in tokens:
        key, eq, value = tok.partition("=")
        if not eq or not key:
            raise ScenarioSyntaxError(f"expected key=value, got {tok!r}", line)
        attrs[key] = value
    return attrs


def _pop_duration(attrs, key, line, default=None):
    if key not in attrs:
        return default
    try:
        return parse_duration(attrs.pop(key))
    except ValueError as exc:
        raise ScenarioSyntaxError(str(exc), line) from None


def _no_leftovers(attrs, line):
    if attrs:
        raise ScenarioSyntaxError(f"unknown attribute(s): {', '.join(sorted(attrs))}", line)


def _parse_device(key, value, line):
    tokens = value.split()
    if not tokens or tokens[0] not in ("type1", "type2"):
        raise ScenarioSyntaxError("device kind must be type1 or type2", line)
    kind = Kind(tokens[0])
    attrs = _attrs(tokens[1:], line)
    try:
        power = float(attrs.pop("power"))
    except KeyError:
        raise ScenarioSyntaxError("device needs power=<kW>", line) from None
    except ValueError:
        raise ScenarioSyntaxError("power must be a number", line) from None
    min_dcd = _pop_duration(attrs, "min_dcd", line)
    max_dcp = _pop_duration(attrs, "max_dcp", line)
    count = attrs.pop("count", None)
    _no_leftovers(attrs, line)
    if count is None:
        ids = [key]
    else:
        try:
            n = int(count)
        except ValueError:
            raise ScenarioSyntaxError("count must be an integer", line) from None
        if n < 1:
            raise ScenarioSyntaxError("count must be >= 1", line)
        width = max(2, len(str(n)))
        ids = [f"{key}{i:0{width}d}" for i in range(1, n + 1)]
    specs = []
    for dev_id in ids:
        spec = ApplianceSpec(dev_id, kind, power, min_dcd, max_dcp)
        try:
            validate_appliance(spec)
        except MinExceedsMax as exc:
            raise InvalidDutyCycle(str(exc), line) from None
        except ValidationError as exc:
            raise InvalidDevice(str(exc), line) from None
        specs.append(spec)
    return specs


def _parse_events(tokens, line):
    events = []
    for tok in tokens:
        action, at, when = tok.partition("@")
        if not at or action not in ("on", "off"):
            raise ScenarioSyntaxError(f"explicit events look like on@10min, got {tok!r}", line)
        try:
            events.append((parse_duration(when), Action(action)))
        except ValueError as exc:
            raise ScenarioSyntaxError(str(exc), line) from None
    return tuple(sorted(events, key=lambda e: (e[0], e[1] is Action.OFF)))


def _parse_arrival(target, value, line):
    tokens = value.split()
    if not tokens:
        raise ScenarioSyntaxError("missing arrival kind", line)
    kind, rest = tokens[0], tokens[1:]
    if kind == "explicit":
        attr_toks = [t for t in rest if "=" in t]
        events = _parse_events([t for t in rest if "=" not in t], line)
        attrs = _attrs(attr_toks, line)
    else:
        attrs = _attrs(rest, line)
    start = _pop_duration(attrs, "start", line, 0)
    stop = _pop_duration(attrs, "stop", line)
    try:
        if kind == "poisson":
            proc = Poisson(target, parse_rate(attrs.pop("rate")), attrs.pop("per", "set"),
                           start, stop)
        elif kind == "periodic":
            interval = _pop_duration(attrs, "interval", line)
            if interval is None:
                raise KeyError("interval")
            proc = Periodic(target, interval, _pop_duration(attrs, "phase", line, 0),
                            _pop_duration(attrs, "hold", line), start, stop)
        elif kind == "explicit":
            proc = Explicit(target, events, start, stop)
        elif kind == "toggle":
            on = _pop_duration(attrs, "on", line)
            off = _pop_duration(attrs, "off", line)
            if on is None or off is None:
                raise KeyError("on/off")
            proc = RandomToggle(target, float(on), float(off), start, stop)
        else:
            raise ScenarioSyntaxError(f"unknown arrival kind {kind!r}", line)
    except KeyError as exc:
        raise ScenarioSyntaxError(f"{kind} arrivals need {exc.args[0]}=", line) from None
    except ValueError as exc:
        raise ScenarioSyntaxError(str(exc), line) from None
    _no_leftovers(attrs, line)
    try:
        _check_process(proc)
    except HanError as exc:
        raise ScenarioSyntaxError(str(exc), line) from None
    return proc


def _parse_delivery(value, line):
    tokens = value.split()
    if not tokens:
        raise ScenarioSyntaxError("missing delivery model", line)
    kind, rest = tokens[0], tokens[1:]
    if kind == "perfect" and not rest:
        return Perfect()
    if kind == "iid":
        attrs = _attrs(rest, line)
        try:
            p = float(attrs.pop("p"))
            _no_leftovers(attrs, line)
            return IidLoss(p)
        except (KeyError, ValueError, HanError) as exc:
            raise ScenarioSyntaxError(f"iid delivery needs p in [0,1] ({exc})", line) from None
    if kind == "blackout":
        ranges = []
        for span in " ".join(rest).replace(",", " ").split():
            lo, _, hi = span.partition("-")
            try:
                ranges.append((int(lo), int(hi or lo)))
            except ValueError:
                raise ScenarioSyntaxError(f"bad round range {span!r}", line) from None
        return Blackout(tuple(ranges))
    raise ScenarioSyntaxError(f"unknown delivery model {value!r}", line)


def parse_scenario(text: str, default_name: str = "scenario") -> Scenario:
    section = None
    seen = set()
    header = {}
    devices = []
    groups = {}
    raw_arrivals = []
    network = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioSyntaxError(f"unterminated section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in ("scenario", "devices", "arrivals", "network"):
                raise ScenarioSyntaxError(f"unknown section [{section}]", lineno)
            if section in seen:
                raise ScenarioSyntaxError(f"duplicate section [{section}]", lineno)
            seen.add(section)
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise ScenarioSyntaxError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ScenarioSyntaxError("key outside of any section", lineno)
        if section == "scenario":
            if key in header:
                raise ScenarioSyntaxError(f"duplicate key {key!r}", lineno)
            header[key] = (value, lineno)
        elif section == "devices":
            if key in groups:
                raise ScenarioSyntaxError(f"duplicate device name {key!r}", lineno)
            specs = _parse_device(key, value, lineno)
            groups[key] = [s.id for s in specs]
            devices += specs
        elif section == "arrivals":
            raw_arrivals.append((key, value, lineno))
        else:
            network[key] = (value, lineno)

    ids = [d.id for d in devices]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise InvalidDevice(f"duplicate device id(s): {', '.join(dup)}")
    known = set(ids)

    arrivals = []
    for key, value, lineno in raw_arrivals:
        target = []
        for name in (n.strip() for n in key.split(",")):
            if name == "*":
                target += ids
            elif name in groups:
                target += groups[name]
            elif name in known:
                target.append(name)
            else:
                raise InvalidDevice(f"unknown device or group {name!r}", lineno)
        arrivals.append(_parse_arrival(tuple(dict.fromkeys(target)), value, lineno))

    def head(key, conv, default):
        if key not in header:
            return default
        value, lineno = header.pop(key)
        try:
            return conv(value)
        except ValueError as exc:
            raise ScenarioSyntaxError(f"bad {key}: {exc}", lineno) from None

    name = head("name", str, default_name)
    duration = head("duration", parse_duration, None)
    if duration is None or duration <= 0:
        raise ScenarioSyntaxError("[scenario] needs a positive duration")
    seed = head("seed", int, 0)
    mode = head("mode", Mode, Mode.BOTH)
    if header:
        key, (_, lineno) = next(iter(header.items()))
        raise ScenarioSyntaxError(f"unknown scenario key {key!r}", lineno)

    def net(key, conv, default):
        if key not in network:
            return default
        value, lineno = network.pop(key)
        try:
            return conv(value)
        except ValueError as exc:
            raise ScenarioSyntaxError(f"bad {key}: {exc}", lineno) from None

    period = net("period", parse_duration, 1)
    retention = net("retention", parse_duration, 600)
    initiator = net("initiator", str, None)
    delivery = Perfect()
    if "delivery" in network:
        value, lineno = network.pop("delivery")
        delivery = _parse_delivery(value, lineno)
    if network:
        key, (_, lineno) = next(iter(network.items()))
        raise ScenarioSyntaxError(f"unknown network key {key!r}", lineno)
    if initiator is not None and initiator not in known:
        raise UnknownDevice(f"initiator {initiator!r} is not a device")
    try:
        cfg = RoundConfig(period, initiator, delivery, retention)
    except HanError as exc:
        raise ScenarioSyntaxError(str(exc)) from None
    return Scenario(name, duration, tuple(devices), tuple(arrivals), cfg, seed, mode)


def load_scenario(path) -> Scenario:
    from pathlib import Path

    path = Path(path)
    return parse_scenario(path.read_text(), default_name=path.stem)


# --- rendering ---------------------------------------------------------------

def _render_process(proc) -> str:
    target = ",".join(proc.target) if proc.target else "*"
    extra = ""
    if proc.start_s:
        extra += f" start={proc.start_s}s"
    if proc.stop_s is not None:
        extra += f" stop={proc.stop_s}s"
    if isinstance(proc, Poisson):
        body = f"poisson rate={proc.rate_per_h!r}/h per={proc.per}"
    elif isinstance(proc, Periodic):
        body = f"periodic interval={proc.interval_s}s phase={proc.phase_s}s"
        if proc.hold_s is not None:
            body += f" hold={proc.hold_s}s"
    elif isinstance(proc, Explicit):
        body = "explicit " + " ".join(f"{a.value}@{t}s" for t, a in proc.events)
    else:
        body = f"toggle on={int(proc.mean_on_s)}s off={int(proc.mean_off_s)}s"
    return f"{target} = {body.rstrip()}{extra}"


def render_scenario(scenario: Scenario) -> str:
    lines = [
        "[scenario]",
        f"name = {scenario.name}",
        f"duration = {scenario.duration_s}s",
        f"seed = {scenario.seed}",
        f"mode = {scenario.mode.value}",
        "",
        "[devices]",
    ]
    for d in scenario.devices:
        line = f"{d.id} = {d.kind.value} power={d.power_kw!r}"
        if d.kind is Kind.TYPE2:
            line += f" min_dcd={d.min_dcd_s}s max_dcp={d.max_dcp_s}s"
        lines.append(line)
    lines += ["", "[arrivals]"]
    lines += [_render_process(p) for p in scenario.arrivals if p.target]
    cfg = scenario.round_cfg
    lines += ["", "[network]", f"period = {cfg.period_s}s", f"retention = {cfg.retention_s}s"]
    if cfg.initiator is not None:
        lines.append(f"initiator = {cfg.initiator}")
    lines.append(f"delivery = {cfg.delivery.render()}")
    return "\n".join(lines) + "\n"


# --- sweep transforms --------------------------------------------------------

def _retime(scenario, fn):
    devices = tuple(
        replace(d, min_dcd_s=fn(d)) if d.kind is Kind.TYPE2 else d for d in scenario.devices
    )
    for d in devices:
        try:
            validate_appliance(d)
        except MinExceedsMax as exc:
            raise InvalidDutyCycle(str(exc)) from None
    return replace(scenario, devices=devices)


def with_min_dcd(scenario: Scenario, min_dcd_s) -> Scenario:
    return _retime(scenario, lambda d: int(min_dcd_s))


def with_ratio(scenario: Scenario, r) -> Scenario:
    """Set ``min_dcd = r * max_dcp`` (rounded to whole seconds) on every Type-2 device."""
    r = Fraction(r)
    return _retime(scenario, lambda d: int(round(r * d.max_dcp_s)))


def with_delivery_p(scenario: Scenario, p) -> Scenario:
    return replace(scenario, round_cfg=replace(scenario.round_cfg, delivery=IidLoss(float(p))))


def with_contenders(scenario: Scenario, count) -> Scenario:
    """Keep the first ``count`` Type-2 devices (by id) and every Type-1 device."""
    count = int(count)
    type2 = sorted(d.id for d in scenario.devices if d.kind is Kind.TYPE2)
    if count > len(type2):
        raise ScenarioError(f"scenario has only {len(type2)} Type-2 devices, asked for {count}")
    keep = set(type2[:count]) | {d.id for d in scenario.devices if d.kind is Kind.TYPE1}
    devices = tuple(d for d in scenario.devices if d.id in keep)
    arrivals = []
    for proc in scenario.arrivals:
        target = tuple(t for t in proc.target if t in keep)
        if target:
            arrivals.append(replace(proc, target=target))
    cfg = scenario.round_cfg
    if cfg.initiator is not None and cfg.initiator not in keep:
        cfg = replace(cfg, initiator=None)
    return replace(scenario, devices=devices, arrivals=tuple(arrivals), round_cfg=cfg)


SWEEP_PARAMETERS = {
    "min_dcd_s": with_min_dcd,
    "r": with_ratio,
    "delivery_p": with_delivery_p,
    "contenders": with_contenders,
}


def apply_parameter(scenario: Scenario, name: str, value) -> Scenario:
    try:
        fn = SWEEP_PARAMETERS[name]
    except KeyError:
        raise ScenarioError(
            f"unknown sweep parameter {name!r}; choose from {', '.join(SWEEP_PARAMETERS)}"
        ) from None
    return fn(scenario, value)
