# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled replica kernel; same contract as ``hansim._pykernel.run_replica``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint8_t, uint64_t

cnp.import_array()

cdef uint64_t FNV_OFFSET = 0xCBF29CE484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001B3ULL

cdef enum:
    OFF = 0
    WAIT = 1
    ON = 2


cdef inline uint64_t _mix(uint64_t h, uint64_t v) nogil:
    return (h ^ v) * FNV_PRIME


cdef uint64_t _digest(int n, uint8_t[:] st, int64_t[:] wl, int wl_len,
                      int64_t[:] rl, int rl_len, int64_t[:] wait_time,
                      int64_t[:] start_time) nogil:
    cdef uint64_t h = FNV_OFFSET
    cdef int i
    for i in range(n):
        h = _mix(h, st[i])
    h = _mix(h, 0xFF)
    for i in range(wl_len):
        h = _mix(h, <uint64_t>wl[i])
        h = _mix(h, <uint64_t>wait_time[wl[i]])
    h = _mix(h, 0xFE)
    for i in range(rl_len):
        h = _mix(h, <uint64_t>rl[i])
        h = _mix(h, <uint64_t>start_time[rl[i]])
    return h


cdef int _remove(int64_t[:] arr, int length, int64_t value) nogil:
    cdef int i, j
    for i in range(length):
        if arr[i] == value:
            for j in range(i, length - 1):
                arr[j] = arr[j + 1]
            return length - 1
    return length


def run_replica(int n, int64_t min_dcd, int64_t max_dcp, int horizon,
                ev_tick, ev_dev, ev_act, bint literal=False, bint digests=False,
                bint skip_idle=True):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] status_np = np.zeros((horizon, n), dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] digest_np = np.zeros(horizon if digests else 0,
                                                                 dtype=np.uint64)
    cdef int64_t[:] e_tick = np.ascontiguousarray(ev_tick, dtype=np.int64)
    cdef int64_t[:] e_dev = np.ascontiguousarray(ev_dev, dtype=np.int64)
    cdef int64_t[:] e_act = np.ascontiguousarray(ev_act, dtype=np.int64)
    cdef uint8_t[:, :] status = status_np
    cdef uint64_t[:] digest = digest_np

    cdef uint8_t[:] st = np.zeros(n, dtype=np.uint8)
    cdef int64_t[:] wait_time = np.zeros(n, dtype=np.int64)
    cdef int64_t[:] start_time = np.zeros(n, dtype=np.int64)
    cdef int64_t[:] wl = np.zeros(n, dtype=np.int64)
    cdef int64_t[:] rl = np.zeros(n, dtype=np.int64)
    cdef int64_t[:] buf = np.zeros(n, dtype=np.int64)
    cdef int wl_len = 0, rl_len = 0, keep, i, d, k = 0, n_ev = e_tick.shape[0]
    cdef int64_t t, max_w, span, quota, size
    cdef bint changed, fire, due
    cdef uint64_t cur = 0

    with nogil:
        if digests:
            cur = _digest(n, st, wl, 0, rl, 0, wait_time, start_time)
        for t in range(horizon):
            changed = False
            # request collection
            while k < n_ev and e_tick[k] == t:
                d = <int>e_dev[k]
                if e_act[k]:
                    if st[d] == OFF:
                        st[d] = WAIT
                        wl[wl_len] = d
                        wl_len += 1
                        wait_time[d] = t + max_dcp
                        changed = True
                else:
                    if st[d] == ON:
                        rl_len = _remove(rl, rl_len, d)
                        changed = True
                    elif st[d] == WAIT:
                        wl_len = _remove(wl, wl_len, d)
                        changed = True
                    st[d] = OFF
                k += 1
            # tracking
            keep = 0
            for i in range(rl_len):
                d = <int>rl[i]
                if (t - start_time[d] > min_dcd) if literal else (t - start_time[d] >= min_dcd):
                    st[d] = WAIT
                    wl[wl_len] = d
                    wl_len += 1
                    wait_time[d] = t + max_dcp
                    changed = True
                else:
                    rl[keep] = d
                    keep += 1
            rl_len = keep
            # scheduling
            if wl_len > 0:
                fire = literal or (t % min_dcd == 0)
                max_w = wait_time[wl[0]]
                for i in range(wl_len):
                    if wait_time[wl[i]] <= t:
                        fire = True
                    if wait_time[wl[i]] > max_w:
                        max_w = wait_time[wl[i]]
                if fire:
                    size = wl_len
                    span = max_w - t
                    if span <= min_dcd:
                        quota = size
                    elif literal:
                        quota = size * min_dcd // span + 1
                    else:
                        quota = (size * min_dcd + span - 1) // span
                    keep = 0
                    for i in range(wl_len):
                        d = <int>wl[i]
                        due = wait_time[d] <= t
                        if quota > 0 or due:
                            if quota > 0 or literal:
                                quota -= 1
                            st[d] = ON
                            start_time[d] = t
                            rl[rl_len] = d
                            rl_len += 1
                            changed = True
                        else:
                            buf[keep] = d
                            keep += 1
                    for i in range(keep):
                        wl[i] = buf[i]
                    wl_len = keep
            for i in range(n):
                status[t, i] = st[i]
            if digests:
                if changed:
                    cur = _digest(n, st, wl, wl_len, rl, rl_len, wait_time, start_time)
                digest[t] = cur
    return status_np, (digest_np if digests else None)
