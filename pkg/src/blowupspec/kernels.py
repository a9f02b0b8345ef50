"""RK4 propagator backend: the compiled kernel when importable, numpy otherwise.

Set BLOWUPSPEC_PURE=1 to force the numpy path.
"""

from __future__ import annotations

import os

import numpy as np


def propagate_numpy(r, m_nodes, m_mid, lam, y0, out_idx, f_nodes=None, f_mid=None, forced=None):
    """Reference implementation with the same signature and output as the compiled kernel."""
    lam = np.asarray(lam, dtype=complex)
    y = np.array(y0, dtype=complex)
    nl, _, nk = y.shape
    out_idx = np.asarray(out_idx)
    out = np.zeros((out_idx.size, nl, 4, nk), dtype=complex)
    if f_nodes is not None:
        mask = np.asarray(forced, dtype=bool)[None, None, :]

    def mat(m):
        full = np.broadcast_to(m, (nl, 2, 2)).copy()
        full[:, 0, 0] += lam
        full[:, 1, 1] -= lam
        return full

    def rhs(mm, ff, z):
        acc = mm @ z[:, :2, :]
        if ff is not None:
            acc = acc + np.where(mask, ff[None, :, None], 0)
        return np.concatenate([z[:, 2:, :], acc], axis=1)

    o = 0
    if out_idx.size and out_idx[0] == 0:
        out[0] = y
        o = 1
    for i in range(r.size - 1):
        h = r[i + 1] - r[i]
        ma, mb, mc = mat(m_nodes[i]), mat(m_mid[i]), mat(m_nodes[i + 1])
        fa = fb = fc = None
        if f_nodes is not None:
            fa, fb, fc = f_nodes[i], f_mid[i], f_nodes[i + 1]
        k1 = rhs(ma, fa, y)
        k2 = rhs(mb, fb, y + 0.5 * h * k1)
        k3 = rhs(mb, fb, y + 0.5 * h * k2)
        k4 = rhs(mc, fc, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if o < out_idx.size and out_idx[o] == i + 1:
            out[o] = y
            o += 1
    return out


try:
    if os.environ.get("BLOWUPSPEC_PURE"):
        raise ImportError("pure backend requested")
    from ._kernels import propagate as _compiled

    BACKEND = "cython"
except ImportError:
    _compiled = None
    BACKEND = "numpy"


def propagate(r, m_nodes, m_mid, lam, y0, out_idx, f_nodes=None, f_mid=None, forced=None):
    """Integrate Y' = [[0, I], [M0 + lam diag(1,-1), 0]] Y (+ forcing on masked columns).

    Y has shape (n_lambda, 4, n_columns) with rows (phi1, phi2, phi1', phi2').
    Returns the state at node indices ``out_idx`` (increasing), shape (n_out, n_lambda, 4, n_cols).
    """
    args = [np.ascontiguousarray(r, dtype=float),
            np.ascontiguousarray(m_nodes, dtype=complex),
            np.ascontiguousarray(m_mid, dtype=complex),
            np.ascontiguousarray(np.atleast_1d(lam), dtype=complex),
            np.ascontiguousarray(y0, dtype=complex),
            np.ascontiguousarray(out_idx, dtype=np.int64)]
    if f_nodes is not None:
        extra = [np.ascontiguousarray(f_nodes, dtype=complex), np.ascontiguousarray(f_mid, dtype=complex),
                 np.ascontiguousarray(forced, dtype=np.int64)]
    else:
        extra = [None, None, None]
    if _compiled is not None:
        return _compiled(*args, *extra)
    return propagate_numpy(*args, *extra)
