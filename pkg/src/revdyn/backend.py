"""Kernel backend selection.

The env flag ``REVDYN_BACKEND`` picks the recurrence kernels: ``numba``
(default when importable) or ``numpy`` for the pure-numpy fallback.  The
two paths agree to float tolerance, not bit-for-bit; within one path runs
are bit-reproducible.  ``benchmarks/bench_kernels.py`` compares them.
"""

from __future__ import annotations

import os

from . import kernels_numpy

_FLAG = "REVDYN_BACKEND"


def _resolve(name: str | None):
    name = (name or "").lower()
    if name not in ("", "numba", "numpy"):
        raise ValueError(f"{_FLAG} must be 'numba' or 'numpy', got {name!r}")
    if name == "numpy":
        return "numpy", kernels_numpy
    try:
        from . import kernels_numba
        return "numba", kernels_numba
    except ImportError:
        if name == "numba":
            raise
        return "numpy", kernels_numpy


BACKEND_NAME, _kernels = _resolve(os.environ.get(_FLAG))

lstm_core_forward = _kernels.lstm_core_forward
lstm_core_backward = _kernels.lstm_core_backward


def use(name: str) -> None:
    """Switch kernels at runtime (used by tests and the benchmark)."""
    global BACKEND_NAME, _kernels, lstm_core_forward, lstm_core_backward
    BACKEND_NAME, _kernels = _resolve(name)
    lstm_core_forward = _kernels.lstm_core_forward
    lstm_core_backward = _kernels.lstm_core_backward
