"""Hot kernels for truncated-polynomial coefficient arithmetic.

Two interchangeable backends compute the scatter-accumulate at the core of
jet multiplication:

* ``numba`` - an ``@njit`` loop over the precomputed index table (default
  when numba imports cleanly),
* ``numpy`` - a vectorized gather / ``add.reduceat`` over the same table.

Set the environment variable ``LIEJET_NO_NUMBA=1`` before import to force
the pure-numpy path, or call :func:`select_backend` at runtime (used by the
benchmark in ``benchmarks/bench_kernels.py``).
"""

from __future__ import annotations

import os

import numpy as np

_HAS_NUMBA = False
_mul_numba = None

if not os.environ.get("LIEJET_NO_NUMBA"):
    try:
        from numba import njit

        @njit(cache=True)
        def _mul_numba(out, a, b, ii, jj, oo):  # pragma: no cover - compiled
            for n in range(ii.size):
                i = ii[n]
                j = jj[n]
                o = oo[n]
                for lane in range(a.shape[0]):
                    out[lane, o] += a[lane, i] * b[lane, j]

        _HAS_NUMBA = True
    except ImportError:
        _HAS_NUMBA = False


def _mul_numpy(out, a, b, table):
    contrib = a[:, table.ii] * b[:, table.jj]
    reduced = np.add.reduceat(contrib, table.seg_starts, axis=1)
    out[:, table.seg_out] += reduced


def mul_into_numpy(out, a, b, table):
    _mul_numpy(out, a, b, table)


def mul_into_numba(out, a, b, table):
    _mul_numba(out, a, b, table.ii, table.jj, table.oo)


_ACTIVE = mul_into_numba if _HAS_NUMBA else mul_into_numpy


def mul_into(out, a, b, table):
    """out[:, oo] += a[:, ii] * b[:, jj] over the multiplication table."""
    _ACTIVE(out, a, b, table)


def current_backend() -> str:
    return "numba" if _ACTIVE is mul_into_numba else "numpy"


def select_backend(name: str) -> str:
    """Switch the multiply kernel; returns the backend actually in effect."""
    global _ACTIVE
    if name == "numba":
        if not _HAS_NUMBA:
            raise RuntimeError("numba backend unavailable (not importable or disabled)")
        _ACTIVE = mul_into_numba
    elif name == "numpy":
        _ACTIVE = mul_into_numpy
    else:
        raise ValueError(f"unknown backend {name!r}")
    return current_backend()
