# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled RK4 propagator for Y' = [[0, I], [M0(r) + lam diag(1, -1), 0]] Y + forcing."""

import numpy as np


cdef inline void _f(double complex m00, double complex m01, double complex m10,
                    double complex m11, double complex f0, double complex f1,
                    double complex y0, double complex y1, double complex y2, double complex y3,
                    double complex* d) noexcept nogil:
    d[0] = y2
    d[1] = y3
    d[2] = m00 * y0 + m01 * y1 + f0
    d[3] = m10 * y0 + m11 * y1 + f1


def propagate(double[::1] r, double complex[:, :, ::1] m_nodes, double complex[:, :, ::1] m_mid,
              double complex[::1] lam, double complex[:, :, ::1] y0, long[::1] out_idx,
              double complex[:, ::1] f_nodes=None, double complex[:, ::1] f_mid=None,
              long[::1] forced=None):
    cdef Py_ssize_t n = r.shape[0] - 1
    cdef Py_ssize_t nl = lam.shape[0]
    cdef Py_ssize_t nk = y0.shape[2]
    cdef Py_ssize_t nout = out_idx.shape[0]
    out = np.zeros((nout, nl, 4, nk), dtype=complex)
    cdef double complex[:, :, :, ::1] ov = out
    cdef Py_ssize_t l, k, i, j, o
    cdef double h
    cdef double complex lm, a00, a11, b00, b11, c00, c11
    cdef double complex fa0, fa1, fb0, fb1, fc0, fc1
    cdef double complex y[4]
    cdef double complex t[4]
    cdef double complex k1[4]
    cdef double complex k2[4]
    cdef double complex k3[4]
    cdef double complex k4[4]
    cdef bint has_f = f_nodes is not None
    cdef bint use_f
    with nogil:
        for l in range(nl):
            lm = lam[l]
            for k in range(nk):
                use_f = has_f and forced[k] != 0
                fa0 = 0
                fa1 = 0
                fb0 = 0
                fb1 = 0
                fc0 = 0
                fc1 = 0
                for j in range(4):
                    y[j] = y0[l, j, k]
                o = 0
                if nout > 0 and out_idx[0] == 0:
                    for j in range(4):
                        ov[0, l, j, k] = y[j]
                    o = 1
                for i in range(n):
                    h = r[i + 1] - r[i]
                    a00 = m_nodes[i, 0, 0] + lm
                    a11 = m_nodes[i, 1, 1] - lm
                    b00 = m_mid[i, 0, 0] + lm
                    b11 = m_mid[i, 1, 1] - lm
                    c00 = m_nodes[i + 1, 0, 0] + lm
                    c11 = m_nodes[i + 1, 1, 1] - lm
                    if use_f:
                        fa0 = f_nodes[i, 0]
                        fa1 = f_nodes[i, 1]
                        fb0 = f_mid[i, 0]
                        fb1 = f_mid[i, 1]
                        fc0 = f_nodes[i + 1, 0]
                        fc1 = f_nodes[i + 1, 1]
                    _f(a00, m_nodes[i, 0, 1], m_nodes[i, 1, 0], a11, fa0, fa1,
                       y[0], y[1], y[2], y[3], k1)
                    for j in range(4):
                        t[j] = y[j] + 0.5 * h * k1[j]
                    _f(b00, m_mid[i, 0, 1], m_mid[i, 1, 0], b11, fb0, fb1, t[0], t[1], t[2], t[3], k2)
                    for j in range(4):
                        t[j] = y[j] + 0.5 * h * k2[j]
                    _f(b00, m_mid[i, 0, 1], m_mid[i, 1, 0], b11, fb0, fb1, t[0], t[1], t[2], t[3], k3)
                    for j in range(4):
                        t[j] = y[j] + h * k3[j]
                    _f(c00, m_nodes[i + 1, 0, 1], m_nodes[i + 1, 1, 0], c11, fc0, fc1,
                       t[0], t[1], t[2], t[3], k4)
                    for j in range(4):
                        y[j] = y[j] + h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j])
                    if o < nout and out_idx[o] == i + 1:
                        for j in range(4):
                            ov[o, l, j, k] = y[j]
                        o += 1
    return out
