# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled grid recurrence; same contract as ``plstm._kernels_py``."""
import numpy as np

ctypedef double f64


def grid_forward(const f64[:, :, ::1] s_r, const f64[:, :, ::1] s_d,
                 const f64[:, :, ::1] t_rr, const f64[:, :, ::1] t_dr,
                 const f64[:, :, ::1] t_rd, const f64[:, :, ::1] t_dd,
                 const f64[:, :, ::1] m_r, const f64[:, :, ::1] m_d,
                 const f64[:, :, :, ::1] x):
    cdef Py_ssize_t nb = x.shape[0], nx = x.shape[1], ny = x.shape[2], npay = x.shape[3]
    out_a = np.zeros((nb, nx, ny, npay))
    cr_a = np.zeros((nb, nx, ny, npay))
    cd_a = np.zeros((nb, nx, ny, npay))
    cdef f64[:, :, :, ::1] out = out_a
    cdef f64[:, :, :, ::1] cr = cr_a
    cdef f64[:, :, :, ::1] cd = cd_a
    cdef Py_ssize_t b, i, j, k
    cdef f64 ir, idn, xv
    with nogil:
        for b in range(nb):
            for j in range(ny):
                for i in range(nx):
                    for k in range(npay):
                        ir = cr[b, i - 1, j, k] if i > 0 else 0.0
                        idn = cd[b, i, j - 1, k] if j > 0 else 0.0
                        xv = x[b, i, j, k]
                        cr[b, i, j, k] = t_rr[b, i, j] * ir + t_dr[b, i, j] * idn + s_r[b, i, j] * xv
                        cd[b, i, j, k] = t_rd[b, i, j] * ir + t_dd[b, i, j] * idn + s_d[b, i, j] * xv
                        out[b, i, j, k] = m_r[b, i, j] * ir + m_d[b, i, j] * idn
    return out_a, cr_a, cd_a


def grid_backward(const f64[:, :, ::1] s_r, const f64[:, :, ::1] s_d,
                  const f64[:, :, ::1] t_rr, const f64[:, :, ::1] t_dr,
                  const f64[:, :, ::1] t_rd, const f64[:, :, ::1] t_dd,
                  const f64[:, :, ::1] m_r, const f64[:, :, ::1] m_d,
                  const f64[:, :, :, ::1] x, const f64[:, :, :, ::1] cr,
                  const f64[:, :, :, ::1] cd, const f64[:, :, :, ::1] gout):
    cdef Py_ssize_t nb = x.shape[0], nx = x.shape[1], ny = x.shape[2], npay = x.shape[3]
    grads = [np.zeros((nb, nx, ny)) for _ in range(8)]
    cdef f64[:, :, ::1] gsr = grads[0], gsd = grads[1], gtrr = grads[2], gtdr = grads[3]
    cdef f64[:, :, ::1] gtrd = grads[4], gtdd = grads[5], gmr = grads[6], gmd = grads[7]
    dx_a = np.zeros((nb, nx, ny, npay))
    dcr_a = np.zeros((nb, nx, ny, npay))
    dcd_a = np.zeros((nb, nx, ny, npay))
    cdef f64[:, :, :, ::1] dx = dx_a
    cdef f64[:, :, :, ::1] dcr = dcr_a
    cdef f64[:, :, :, ::1] dcd = dcd_a
    cdef Py_ssize_t b, i, j, k
    cdef f64 ir, idn, xv, dr, dd, go
    cdef f64 a_sr, a_sd, a_rr, a_dr, a_rd, a_dd, a_mr, a_md
    with nogil:
        for b in range(nb):
            for j in range(ny - 1, -1, -1):
                for i in range(nx - 1, -1, -1):
                    a_sr = 0.0; a_sd = 0.0; a_rr = 0.0; a_dr = 0.0
                    a_rd = 0.0; a_dd = 0.0; a_mr = 0.0; a_md = 0.0
                    for k in range(npay):
                        ir = cr[b, i - 1, j, k] if i > 0 else 0.0
                        idn = cd[b, i, j - 1, k] if j > 0 else 0.0
                        xv = x[b, i, j, k]
                        dr = dcr[b, i, j, k]
                        dd = dcd[b, i, j, k]
                        go = gout[b, i, j, k]
                        a_sr += dr * xv
                        a_sd += dd * xv
                        dx[b, i, j, k] = s_r[b, i, j] * dr + s_d[b, i, j] * dd
                        a_rr += dr * ir
                        a_dr += dr * idn
                        a_rd += dd * ir
                        a_dd += dd * idn
                        a_mr += go * ir
                        a_md += go * idn
                        if i > 0:
                            dcr[b, i - 1, j, k] += t_rr[b, i, j] * dr + t_rd[b, i, j] * dd + m_r[b, i, j] * go
                        if j > 0:
                            dcd[b, i, j - 1, k] += t_dr[b, i, j] * dr + t_dd[b, i, j] * dd + m_d[b, i, j] * go
                    gsr[b, i, j] = a_sr
                    gsd[b, i, j] = a_sd
                    gtrr[b, i, j] = a_rr
                    gtdr[b, i, j] = a_dr
                    gtrd[b, i, j] = a_rd
                    gtdd[b, i, j] = a_dd
                    gmr[b, i, j] = a_mr
                    gmd[b, i, j] = a_md
    return (*grads, dx_a)
