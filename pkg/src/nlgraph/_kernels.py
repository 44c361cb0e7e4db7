"""Backend selection for the hot kernels.

The compiled Cython extension is used when it imports; otherwise the NumPy
fallback is used. Set ``NLGRAPH_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _hzcore_py

try:
    if os.environ.get("NLGRAPH_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from . import _hzcore as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def hz_pair_scores(zs, pairs, beta, num_threads=1, backend=None, whiten=True):
    """Dispatch to the selected backend. ``backend`` overrides the default."""
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled extension is not available")
        return _compiled.hz_pair_scores(zs, pairs, float(beta), int(num_threads), 1e-10, bool(whiten))
    return _hzcore_py.hz_pair_scores(zs, pairs, beta, num_threads, whiten=whiten)
