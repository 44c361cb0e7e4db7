"""The compiled HZ pair kernel and its NumPy fallback must agree."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlgraph import _hzcore_py, _kernels
from nlgraph.screening import _standardized_rows, hz_beta

needs_ext = pytest.mark.skipif(_kernels._compiled is None, reason="compiled extension not built")


def _inputs(seed, n, p):
    g = np.random.default_rng(seed)
    v = g.normal(size=(n, p))
    v[:, -1] = np.tanh(v[:, 0]) + 0.5 * v[:, -1]
    zs, _ = _standardized_rows(v)
    iu, ju = np.triu_indices(p, 1)
    return zs, np.ascontiguousarray(np.column_stack([iu, ju]).astype(np.intp)), hz_beta(n, 2)


def test_backend_name():
    assert _kernels.BACKEND in ("cython", "python")


@needs_ext
@given(st.integers(0, 2**32 - 1), st.integers(5, 60), st.integers(2, 6), st.booleans())
def test_compiled_matches_fallback(seed, n, p, wh):
    zs, pairs, beta = _inputs(seed, n, p)
    a = _kernels.hz_pair_scores(zs, pairs, beta, backend="cython", whiten=wh)
    b = _kernels.hz_pair_scores(zs, pairs, beta, backend="python", whiten=wh)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


@needs_ext
def test_thread_count_does_not_change_scores():
    zs, pairs, beta = _inputs(3, 200, 8)
    a = _kernels.hz_pair_scores(zs, pairs, beta, num_threads=1)
    b = _kernels.hz_pair_scores(zs, pairs, beta, num_threads=4)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_ext)])
def test_collinear_pair_scored_unwhitened(backend):
    zs, _, beta = _inputs(0, 40, 3)
    zs = np.ascontiguousarray(np.vstack([zs[0], zs[0]]))
    pair = np.array([[0, 1]], dtype=np.intp)
    out = _kernels.hz_pair_scores(zs, pair, beta, backend=backend)
    raw = _kernels.hz_pair_scores(zs, pair, beta, backend=backend, whiten=False)
    assert np.isfinite(out[0]) and out[0] == pytest.approx(raw[0], rel=1e-12)


def test_fallback_direct_call():
    zs, pairs, beta = _inputs(1, 30, 3)
    np.testing.assert_allclose(
        _hzcore_py.hz_pair_scores(zs, pairs, beta),
        _kernels.hz_pair_scores(zs, pairs, beta, backend="python"),
    )
