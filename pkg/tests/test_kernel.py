import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hansim import kernel
from hansim._pykernel import run_replica as py_run

ckernel = pytest.importorskip("hansim._ckernel")


@st.composite
def replicas(draw):
    min_dcd = draw(st.integers(1, 30))
    max_dcp = draw(st.integers(min_dcd, 90))
    n = draw(st.integers(1, 8))
    horizon = draw(st.integers(0, 300))
    k = draw(st.integers(0, 30)) if horizon else 0
    ticks = sorted(draw(st.lists(st.integers(0, max(horizon - 1, 0)), min_size=k, max_size=k)))
    devs = draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k))
    acts = draw(st.lists(st.integers(0, 1), min_size=k, max_size=k))
    arrays = [np.array(x, dtype=np.int64) for x in (ticks, devs, acts)]
    return (n, min_dcd, max_dcp, horizon, *arrays)


@settings(max_examples=200, deadline=None)
@given(replicas(), st.booleans())
def test_backends_agree(case, literal):
    a_status, a_dig = py_run(*case, literal=literal, digests=True)
    b_status, b_dig = ckernel.run_replica(*case, literal=literal, digests=True)
    assert a_status.dtype == b_status.dtype == np.uint8
    assert np.array_equal(a_status, b_status)
    assert np.array_equal(a_dig, b_dig)


@settings(max_examples=100, deadline=None)
@given(replicas())
def test_idle_skipping_is_invisible(case):
    fast, fast_dig = py_run(*case, digests=True, skip_idle=True)
    slow, slow_dig = py_run(*case, digests=True, skip_idle=False)
    assert np.array_equal(fast, slow)
    assert np.array_equal(fast_dig, slow_dig)


def test_shape_and_no_digests():
    e = np.array([0, 0], dtype=np.int64)
    status, digest = kernel.run_replica(2, 10, 20, 50, e, np.array([0, 1]), np.array([1, 1]))
    assert status.shape == (50, 2) and digest is None


def test_backend_flag():
    assert kernel.BACKEND in ("cython", "python")
