"""Pure-Python replica kernel, built on :mod:`hansim.scheduler`.

Selected at import time when the compiled ``_ckernel`` extension is not
available, or when ``HANSIM_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import numpy as np

from .domain import Action, StreamKey
from .scheduler import SchedulerState, next_wakeup, step


def run_replica(n, min_dcd, max_dcp, horizon, ev_tick, ev_dev, ev_act,
                literal=False, digests=False, skip_idle=True):
    """Run one scheduler replica over ``horizon`` ticks.

    Events are given as parallel arrays sorted by consumption tick; ``ev_act``
    holds 1 for ON and 0 for OFF. Returns the ``(horizon, n)`` status matrix
    (``DeviceStatus`` codes after each tick) and, when ``digests`` is set,
    the per-tick state digest.
    """
    status = np.zeros((horizon, n), dtype=np.uint8)
    digest = np.zeros(horizon, dtype=np.uint64) if digests else None
    state = SchedulerState.new(StreamKey(min_dcd, max_dcp), range(n), literal=literal)
    row = np.zeros(n, dtype=np.uint8)
    cur_digest = state.digest() if digests else 0

    ev_tick = np.asarray(ev_tick, dtype=np.int64)
    n_ev = len(ev_tick)
    k = 0
    t = 0
    wake = None
    while t < horizon:
        requests = []
        while k < n_ev and ev_tick[k] == t:
            requests.append((int(ev_dev[k]), Action.ON if ev_act[k] else Action.OFF))
            k += 1
        if requests or not skip_idle or (wake is not None and t >= wake):
            _, decision = step(state, requests, t)
            if requests or not decision.empty:
                for d, s in state.status.items():
                    row[d] = s
                if digests:
                    cur_digest = state.digest()
            wake = next_wakeup(state, t)
        status[t] = row
        if digests:
            digest[t] = cur_digest
        # jump to the next tick at which anything can happen
        nxt = horizon
        if k < n_ev:
            nxt = min(nxt, int(ev_tick[k]))
        if wake is not None:
            nxt = min(nxt, wake)
        if not skip_idle:
            nxt = t + 1
        if nxt > t + 1:
            status[t + 1:nxt] = row
            if digests:
                digest[t + 1:nxt] = cur_digest
        t = max(nxt, t + 1)
    return status, digest
