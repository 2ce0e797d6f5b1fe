"""Reference grid recurrence in numpy; the fallback when ``plstm._ext`` is unavailable.

All gate arrays are ``(B, NX, NY)`` and payloads ``(B, NX, NY, P)``, float64.
For node ``(x, y)`` with ``in_r`` the cell arriving from the left and ``in_d``
the cell arriving from above::

    cell_r = t_rr * in_r + t_dr * in_d + s_r * x
    cell_d = t_rd * in_r + t_dd * in_d + s_d * x
    out    = m_r * in_r + m_d * in_d
"""
import numpy as np


def grid_forward(s_r, s_d, t_rr, t_dr, t_rd, t_dd, m_r, m_d, x):
    b, nx, ny, p = x.shape
    out = np.zeros_like(x)
    cell_r = np.zeros_like(x)
    cell_d = np.zeros_like(x)
    zero = np.zeros((b, p))
    for j in range(ny):
        for i in range(nx):
            in_r = cell_r[:, i - 1, j] if i > 0 else zero
            in_d = cell_d[:, i, j - 1] if j > 0 else zero
            xi = x[:, i, j]
            cell_r[:, i, j] = t_rr[:, i, j, None] * in_r + t_dr[:, i, j, None] * in_d + s_r[:, i, j, None] * xi
            cell_d[:, i, j] = t_rd[:, i, j, None] * in_r + t_dd[:, i, j, None] * in_d + s_d[:, i, j, None] * xi
            out[:, i, j] = m_r[:, i, j, None] * in_r + m_d[:, i, j, None] * in_d
    return out, cell_r, cell_d


def grid_backward(s_r, s_d, t_rr, t_dr, t_rd, t_dd, m_r, m_d, x, cell_r, cell_d, gout):
    """Cotangents of :func:`grid_forward` given ``gout = dL/dout``.

    Returns ``(ds_r, ds_d, dt_rr, dt_dr, dt_rd, dt_dd, dm_r, dm_d, dx)``.
    """
    b, nx, ny, p = x.shape
    g = {k: np.zeros((b, nx, ny)) for k in ("s_r", "s_d", "t_rr", "t_dr", "t_rd", "t_dd", "m_r", "m_d")}
    dx = np.zeros_like(x)
    dc_r = np.zeros_like(x)
    dc_d = np.zeros_like(x)
    zero = np.zeros((b, p))
    for j in range(ny - 1, -1, -1):
        for i in range(nx - 1, -1, -1):
            in_r = cell_r[:, i - 1, j] if i > 0 else zero
            in_d = cell_d[:, i, j - 1] if j > 0 else zero
            dr, dd, go = dc_r[:, i, j], dc_d[:, i, j], gout[:, i, j]
            xi = x[:, i, j]
            g["s_r"][:, i, j] = np.sum(dr * xi, axis=-1)
            g["s_d"][:, i, j] = np.sum(dd * xi, axis=-1)
            dx[:, i, j] = s_r[:, i, j, None] * dr + s_d[:, i, j, None] * dd
            g["t_rr"][:, i, j] = np.sum(dr * in_r, axis=-1)
            g["t_dr"][:, i, j] = np.sum(dr * in_d, axis=-1)
            g["t_rd"][:, i, j] = np.sum(dd * in_r, axis=-1)
            g["t_dd"][:, i, j] = np.sum(dd * in_d, axis=-1)
            g["m_r"][:, i, j] = np.sum(go * in_r, axis=-1)
            g["m_d"][:, i, j] = np.sum(go * in_d, axis=-1)
            if i > 0:
                dc_r[:, i - 1, j] += t_rr[:, i, j, None] * dr + t_rd[:, i, j, None] * dd + m_r[:, i, j, None] * go
            if j > 0:
                dc_d[:, i, j - 1] += t_dr[:, i, j, None] * dr + t_dd[:, i, j, None] * dd + m_d[:, i, j, None] * go
    return (g["s_r"], g["s_d"], g["t_rr"], g["t_dr"], g["t_rd"], g["t_dd"], g["m_r"], g["m_d"], dx)
