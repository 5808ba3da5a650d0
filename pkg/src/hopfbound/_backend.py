"""Kernel backend selection and the chunked/threaded batch driver.

The compiled extension is used when importable; set HOPFBOUND_PURE_PYTHON=1
to force the numpy fallback. Per-node results are independent of chunking
and thread count, and reductions elsewhere use compensated summation, so
outputs are reproducible for a fixed backend regardless of --threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels_py

if os.environ.get("HOPFBOUND_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

DEFAULT_CHUNK = 4096


def get_backend():
    return _impl


def backend_name() -> str:
    return _impl.BACKEND


def have_compiled() -> bool:
    return _impl.BACKEND == "compiled"


def available_backends():
    """All importable backend modules, for parity tests and benchmarks."""
    out = {"pure-python": _kernels_py}
    try:
        from . import _kernels
        out["compiled"] = _kernels
    except ImportError:
        pass
    return out


def map_chunked(fn, X, threads=1, chunk=DEFAULT_CHUNK):
    """Apply ``fn`` to row-chunks of X and concatenate the results in order.

    ``fn`` returns an array or a tuple of arrays whose leading axis matches
    the chunk. Chunks are fixed-size, so the output does not depend on the
    number of worker threads.
    """
    X = np.ascontiguousarray(X, dtype=float)
    n_rows = X.shape[0]
    slices = [slice(i, min(i + chunk, n_rows)) for i in range(0, n_rows, chunk)]
    if not slices:
        slices = [slice(0, 0)]
    if threads <= 1 or len(slices) == 1:
        parts = [fn(X[s]) for s in slices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: fn(X[s]), slices))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)
