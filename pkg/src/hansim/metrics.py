"""Load and delay metrics over simulation traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import HanError


class EmptyTrace(HanError):
    pass


class NoRecords(HanError):
    pass


class LengthMismatch(HanError):
    pass


@dataclass
class LoadTrace:
    label: str
    samples: np.ndarray
    tick_s: int = 1

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1:
            raise ValueError("load trace must be one-dimensional")
        if np.any(self.samples < 0):
            raise ValueError(f"trace {self.label!r} has negative load")

    def __len__(self):
        return len(self.samples)

    def window(self, skip_s: int = 0) -> "LoadTrace":
        return LoadTrace(self.label, self.samples[skip_s // self.tick_s:], self.tick_s)


def _samples(trace):
    s = trace.samples if isinstance(trace, LoadTrace) else np.asarray(trace, dtype=float)
    if s.size == 0:
        raise EmptyTrace("metric of an empty trace")
    return s


def peak_load(trace) -> float:
    return float(np.max(_samples(trace)))


def load_stats(trace) -> tuple[float, float]:
    """Mean and population standard deviation of the samples, in kW."""
    s = _samples(trace)
    return float(np.mean(s)), float(np.std(s))


def avg_delay(records) -> float:
    """Mean wait of the served requests (records without a first ON are skipped)."""
    delays = [r.delay_s if hasattr(r, "delay_s") else r for r in records]
    delays = [d for d in delays if d is not None]
    if not delays:
        raise NoRecords("no served requests to average")
    return float(np.mean(delays))


def aggregate(traces, label: str = "total") -> LoadTrace:
    traces = list(traces)
    if not traces:
        raise EmptyTrace("nothing to aggregate")
    n, tick = len(traces[0]), traces[0].tick_s
    for t in traces[1:]:
        if len(t) != n or t.tick_s != tick:
            raise LengthMismatch(f"trace {t.label!r} does not line up with {traces[0].label!r}")
    return LoadTrace(label, np.sum([t.samples for t in traces], axis=0), tick)


@dataclass
class StatLine:
    peak_kw: float
    mean_kw: float
    std_kw: float

    @classmethod
    def of(cls, trace):
        mean, std = load_stats(trace)
        return cls(peak_load(trace), mean, std)


@dataclass
class Summary:
    peak_kw: float
    mean_kw: float
    std_kw: float
    avg_delay_s: Optional[float]
    streams: dict = field(default_factory=dict)


def summarize(total: LoadTrace, streams: dict, delays, skip_s: int = 0) -> Summary:
    """Summary over the trace after dropping the first ``skip_s`` seconds."""
    overall = StatLine.of(total.window(skip_s))
    try:
        delay = avg_delay(delays)
    except NoRecords:
        delay = None
    per_stream = {label: StatLine.of(tr.window(skip_s)) for label, tr in streams.items()}
    return Summary(overall.peak_kw, overall.mean_kw, overall.std_kw, delay, per_stream)


def reduction(baseline: float, coordinated: float) -> Optional[float]:
    """Relative reduction ``(baseline - coordinated) / baseline``; None when baseline is 0."""
    if baseline <= 0:
        return None
    return (baseline - coordinated) / baseline
