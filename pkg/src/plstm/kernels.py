"""Backend selection for the grid recurrence kernels.

The compiled ``plstm._ext`` module is used when it imports; otherwise the
numpy implementation in ``plstm._kernels_py``. Set ``PLSTM_BACKEND=python`` to
force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_native = None
if os.environ.get("PLSTM_BACKEND", "").lower() != "python":
    try:
        from . import _ext as _native
    except ImportError:  # extension not built
        _native = None

BACKEND = "cython" if _native is not None else "python"

__all__ = ["BACKEND", "available_backends", "grid_forward", "grid_backward"]


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _native is not None else [])


def _impl(backend: str | None):
    backend = backend or BACKEND
    if backend == "cython":
        if _native is None:
            raise RuntimeError("compiled backend requested but plstm._ext is not built")
        return _native
    if backend == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {backend!r}")


def _prep(arrays):
    return [np.ascontiguousarray(a, dtype=np.float64) for a in arrays]


def grid_forward(s_r, s_d, t_rr, t_dr, t_rd, t_dd, m_r, m_d, x, backend: str | None = None):
    """Run the down-right grid recurrence; returns ``(out, cell_r, cell_d)``."""
    args = _prep((s_r, s_d, t_rr, t_dr, t_rd, t_dd, m_r, m_d, x))
    return _impl(backend).grid_forward(*args)


def grid_backward(s_r, s_d, t_rr, t_dr, t_rd, t_dd, m_r, m_d, x, cell_r, cell_d, gout, backend: str | None = None):
    args = _prep((s_r, s_d, t_rr, t_dr, t_rd, t_dd, m_r, m_d, x, cell_r, cell_d, gout))
    return _impl(backend).grid_backward(*args)
