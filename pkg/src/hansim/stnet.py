"""Round-based all-to-all request sharing between device-interfaces.

Each round floods the union of every node's known requests; whether a node
receives the round is decided by a delivery model. Packet-level timing and
radio physics are not modelled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import HanError, RequestEvent, UnknownDevice


class NoNodes(HanError):
    pass


class InitiatorDown(HanError):
    pass


@dataclass(frozen=True)
class Perfect:
    def delivered(self, round_index, n, rng):
        return np.ones(n, dtype=bool)

    def render(self):
        return "perfect"


@dataclass(frozen=True)
class IidLoss:
    """Each node receives each round independently with probability ``p``."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise HanError(f"delivery probability must be in [0, 1], got {self.p}")

    def delivered(self, round_index, n, rng):
        return rng.random(n) < self.p

    def render(self):
        return f"iid p={self.p!r}"


@dataclass(frozen=True)
class Blackout:
    """No node receives during the listed inclusive round ranges."""

    ranges: tuple = ()

    def delivered(self, round_index, n, rng):
        dark = any(lo <= round_index <= hi for lo, hi in self.ranges)
        return np.full(n, not dark, dtype=bool)

    def render(self):
        spans = ",".join(f"{lo}-{hi}" for lo, hi in self.ranges)
        return f"blackout {spans}" if spans else "blackout"


@dataclass(frozen=True)
class RoundConfig:
    period_s: int = 1
    initiator: Optional[str] = None
    delivery: object = Perfect()
    # events older than this are forgotten by every node
    retention_s: int = 600

    def __post_init__(self):
        if self.period_s < 1:
            raise HanError(f"round period must be >= 1 s, got {self.period_s}")
        if self.retention_s < self.period_s:
            raise HanError("retention must cover at least one round period")


@dataclass
class NodeView:
    node: str
    known_requests: set = field(default_factory=set)
    consumed: set = field(default_factory=set)
    # known but not yet consumed; kept so consumption never rescans the full view
    pending: set = field(default_factory=set)
    last_round_received: int = -1
    status_replica: dict = field(default_factory=dict)


def make_views(nodes) -> dict:
    return {n: NodeView(n) for n in sorted(nodes)}


def raise_request(views: dict, event: RequestEvent) -> None:
    """A device-interface always knows its own user's request."""
    try:
        view = views[event.device]
    except KeyError:
        raise UnknownDevice(f"request for unknown device {event.device!r}") from None
    if event not in view.known_requests:
        view.known_requests.add(event)
        view.pending.add(event)


def run_round(views: dict, new_requests, cfg: RoundConfig, rng, round_index: int) -> dict:
    """Run one dissemination round in place and return ``views``.

    Nodes that miss the round keep their stale view. Returns the same mapping
    for chaining.
    """
    if not views:
        raise NoNodes("a round needs at least one node")
    if cfg.initiator is not None and cfg.initiator not in views:
        raise InitiatorDown(f"initiator {cfg.initiator!r} is not a live node")
    for event in new_requests:
        raise_request(views, event)

    payload = set().union(*(v.known_requests for v in views.values()))
    horizon = round_index * cfg.period_s - cfg.retention_s
    if horizon > 0:
        stale = {e for e in payload if e.time_s < horizon}
        if stale:
            for view in views.values():
                _forget(view, stale)
            payload -= stale

    mask = cfg.delivery.delivered(round_index, len(views), rng)
    for got, view in zip(mask, views.values()):
        if got:
            new = payload - view.known_requests
            view.known_requests |= new
            view.pending |= new
            view.last_round_received = round_index
    return views


def _forget(view: NodeView, stale: set) -> None:
    view.known_requests -= stale
    view.consumed -= stale
    view.pending -= stale


def consume_requests(view: NodeView, upto_s: int):
    """Hand every not-yet-consumed request with ``time_s <= upto_s`` to the scheduler."""
    fresh = sorted((e for e in view.pending if e.time_s <= upto_s), key=RequestEvent.sort_key)
    view.pending.difference_update(fresh)
    view.consumed.update(fresh)
    return fresh, view


def views_agree(views: dict) -> bool:
    it = iter(views.values())
    first = next(it, None)
    return first is None or all(v.known_requests == first.known_requests for v in it)
