"""Complex-Airy WKB basis for  psi'' + (b^2 r^2/4 - E - (nu^2 - 1/4)/r^2) psi = h psi.

The Langer map zeta(s), s = b r / (2 sqrt E), solves
zeta zeta_s^2 = s^2 - 1 - alpha s^{-2} with zeta(s0) = 0.  It is evaluated in the
branch-free form

    zeta(s) = (s - s0) * ((3/2) J(s))^{2/3},
    J(s) = int_0^1 sqrt(u) g(s0 + (s - s0) u) du,
    g(w) = sqrt(w + s0) sqrt(w^2 - t_-) / w,

which is analytic through the turning point and needs principal powers only.
Derivatives of zeta come from differentiating under the integral sign, so the
correction h = -(b^2/8E) {zeta, s} is free of turning-point cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_jacobi, roots_legendre

from . import specfun
from .errors import DomainError, RangeError

OMEGA = np.exp(2j * np.pi / 3)
N_JACOBI = 48
N_LEGENDRE = 24
GRADE = 0.3


@dataclass(frozen=True)
class SpectralEnergy:
    b: float
    e: complex
    nu: float | None = None

    def __post_init__(self):
        if self.b <= 0:
            raise DomainError("b must be positive")
        if abs(self.e - 1) > 0.5:
            raise DomainError(f"E={self.e} outside |E - 1| <= 1/2")
        if self.nu is not None and self.nu < 1:
            raise DomainError("high-class basis needs nu >= 1")

    @property
    def alpha(self) -> complex:
        if self.nu is None:
            return 0j
        return self.b ** 2 * (4 * self.nu ** 2 - 1) / (16 * complex(self.e) ** 2)

    @property
    def mu43(self) -> complex:
        return np.exp(1j * np.pi / 3) * (2 * complex(self.e) / self.b) ** (2.0 / 3.0)


@dataclass(frozen=True)
class TurningData:
    r_star: float
    s0: complex
    t_plus: complex
    t_minus: complex
    alpha: complex


@dataclass(frozen=True)
class WkbEval:
    r: float
    psi: tuple
    dpsi: tuple
    eta: complex
    omega_plus: float
    omega_minus: float
    h: complex
    kappa_plus: complex
    kappa_minus: complex


def roots_t(alpha: complex) -> tuple[complex, complex, complex]:
    """t_+, t_- and s0 = sqrt(t_+)."""
    root = np.sqrt(1 + 4 * complex(alpha))
    tp, tm = (1 + root) / 2, (1 - root) / 2
    return tp, tm, np.sqrt(tp)


@lru_cache(maxsize=None)
def _rules():
    x, w = roots_jacobi(N_JACOBI, 0.0, 0.5)
    # int_0^{1/2} sqrt(u) f(u) du with u = (1 + x)/4
    uj = (1 + x) / 4
    wj = w / 8
    xl, wl = roots_legendre(N_LEGENDRE)
    return uj, wj, xl, wl


def _nodes(dist: float):
    """Quadrature on [0,1] for sqrt(u) f(u), panels graded toward u = 1.

    ``dist`` is the distance of the nearest singularity of f beyond u = 1.
    """
    uj, wj, xl, wl = _rules()
    edges = [0.5]
    while 1 - edges[-1] > dist and len(edges) < 60:
        edges.append(1 - (1 - edges[-1]) * GRADE)
    edges.append(1.0)
    us, ws = [uj], [wj]
    for lo, hi in zip(edges[:-1], edges[1:]):
        u = lo + (hi - lo) * (xl + 1) / 2
        us.append(u)
        ws.append(wl * (hi - lo) / 2 * np.sqrt(u))
    return np.concatenate(us), np.concatenate(ws)


def _log_g_derivs(w, s0, tm):
    """g and the first three derivatives of log g."""
    q = w * w - tm
    g = np.sqrt(w + s0) * np.sqrt(q) / w
    l1 = 0.5 / (w + s0) + w / q - 1 / w
    l2 = -0.5 / (w + s0) ** 2 - (w * w + tm) / q ** 2 + 1 / w ** 2
    l3 = 1 / (w + s0) ** 3 + (2 * w ** 3 + 6 * w * tm) / q ** 3 - 2 / w ** 3
    return g, l1, l2, l3


def zeta_derivs(s, alpha: complex = 0j):
    """zeta, zeta_s, zeta_ss, zeta_sss at points s in the cone |arg s| <= pi/4."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.any(np.abs(np.angle(s)) > np.pi / 4 + 1e-12) or np.any(s == 0):
        raise DomainError("s must lie in the cone |arg s| <= pi/4, s != 0")
    _, tm, s0 = roots_t(alpha)
    out = np.empty((4, s.size), dtype=complex)
    for i, si in enumerate(s):
        t = si - s0
        if t == 0:
            dist = np.inf
        else:
            # nearest singularity of g on the extension of the segment past u = 1
            sing = [0.0, -s0, np.sqrt(tm), -np.sqrt(tm)] if tm != 0 else [0.0, -s0]
            dist = min(abs(si - z) for z in sing) / abs(t)
        u, wq = _nodes(dist)
        w = s0 + t * u
        g, l1, l2, l3 = _log_g_derivs(w, s0, tm)
        if tm == 0:
            # removable: sqrt(w^2)/w = 1 on the right half plane
            g = np.sqrt(w + s0)
        j0 = np.sum(wq * g)
        j1 = np.sum(wq * u * g * l1)
        j2 = np.sum(wq * u ** 2 * g * (l2 + l1 ** 2))
        j3 = np.sum(wq * u ** 3 * g * (l3 + 3 * l1 * l2 + l1 ** 3))
        a0, a1, a2, a3 = 1.5 * j0, 1.5 * j1, 1.5 * j2, 1.5 * j3
        k0 = a0 ** (2.0 / 3.0)
        am13 = a0 ** (-1.0 / 3.0)
        k1 = (2.0 / 3.0) * am13 * a1
        k2 = (2.0 / 3.0) * am13 * a2 - (2.0 / 9.0) * am13 ** 4 * a1 ** 2
        k3 = ((2.0 / 3.0) * am13 * a3 - (2.0 / 3.0) * am13 ** 4 * a1 * a2
              + (8.0 / 27.0) * am13 ** 7 * a1 ** 3)
        out[0, i] = t * k0
        out[1, i] = k0 + t * k1
        out[2, i] = 2 * k1 + t * k2
        out[3, i] = 3 * k2 + t * k3
    return out


def zeta_map(s, alpha: complex | None = None):
    """(zeta, zeta_s) at s; alpha = None selects the low-class map."""
    z = zeta_derivs(s, 0j if alpha is None else alpha)
    if np.ndim(s) == 0:
        return complex(z[0, 0]), complex(z[1, 0])
    return z[0], z[1]


def zeta_low_closed_form(s):
    """(2/3) zeta^{3/2} for real s > 1, elementary form used as an oracle."""
    s = np.asarray(s, dtype=float)
    root = np.sqrt(s * s - 1)
    return 0.5 * s * root - 0.5 * np.log(s + root)


def _s_of_r(se: SpectralEnergy, r):
    return se.b * np.asarray(r, dtype=float) / (2 * np.sqrt(complex(se.e)))


def eta(se: SpectralEnergy, r):
    zeta = zeta_derivs(_s_of_r(se, r), se.alpha)[0]
    return _eta_from_zeta(se, zeta)


def _eta_from_zeta(se, zeta):
    x = se.mu43 * zeta / OMEGA
    return (2.0 / 3.0) * x ** 1.5


def _weight_arg(se: SpectralEnergy, r):
    r = np.asarray(r, dtype=float)
    e = complex(se.e)
    x = se.b ** 2 * r ** 2 - 4 * e
    if se.nu is not None:
        x = x - (4 * se.nu ** 2 - 1) * e / r ** 2
    return se.b ** (-2.0 / 3.0) * x


def weights(se: SpectralEnergy, r, eta_val):
    bracket = np.sqrt(1 + np.abs(_weight_arg(se, r)) ** 2)
    env = bracket ** -0.25
    return env * np.exp(np.real(eta_val)), env * np.exp(-np.real(eta_val))


def _turning_sign(se: SpectralEnergy, r: float) -> float:
    zeta = zeta_derivs(_s_of_r(se, r), se.alpha)[0, 0]
    if np.imag(se.e) >= 0:
        return float(np.imag(se.mu43 * zeta / OMEGA))
    return float(np.imag(-se.mu43 * zeta))


def turning_data(se: SpectralEnergy) -> TurningData:
    tp, tm, s0 = roots_t(se.alpha)
    e = complex(se.e)
    if np.imag(e) == 0:
        # zeta is real on the real axis and vanishes at s = s0 exactly
        r_star = float(np.real(2 * np.sqrt(e) * s0 / se.b))
    else:
        guess = float(np.real(2 * np.sqrt(e) * s0) / se.b)
        lo, hi = 0.5 * guess, 1.5 * guess
        if not (_turning_sign(se, lo) > 0 > _turning_sign(se, hi)):
            raise DomainError(f"no turning point bracket for E={e}")
        r_star = brentq(lambda r: _turning_sign(se, r), lo, hi, xtol=1e-14 * guess, rtol=1e-15)
    return TurningData(r_star=r_star, s0=s0, t_plus=tp, t_minus=tm, alpha=se.alpha)


def turning_eta(se: SpectralEnergy, r):
    """Turning data, eta(r) and the weights omega_+, omega_- at r."""
    td = turning_data(se)
    et = eta(se, r)
    wp, wm = weights(se, r, et)
    if np.ndim(r) == 0:
        return td, complex(et[0]), (float(wp[0]), float(wm[0]))
    return td, et, (wp, wm)


def kappa_pm(se: SpectralEnergy) -> tuple[complex, complex]:
    e = complex(se.e)
    base = se.b ** (1 / 6) / (2 ** (7 / 6) * np.sqrt(np.pi) * e ** (1 / 6))
    return 1 / (base * np.exp(-np.pi * e / (2 * se.b))), 1 / (base * np.exp(np.pi * e / (2 * se.b)))


def wronskian_42(se: SpectralEnergy) -> complex:
    return se.b ** (1 / 3) * complex(se.e) ** (1 / 6) / (2 ** (4 / 3) * np.pi)


def wronskian_13(se: SpectralEnergy) -> complex:
    return -1j * wronskian_42(se)


def basis_arrays(se: SpectralEnergy, r):
    """Vectorized basis: dict with psi (4,n), dpsi (4,n), eta, h, zeta, zeta_s."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    s = _s_of_r(se, r)
    z0, z1, z2, z3 = zeta_derivs(s, se.alpha)
    dsdr = se.b / (2 * np.sqrt(complex(se.e)))
    m = se.mu43
    args = (m * z0 / OMEGA, m * z0 * OMEGA, m * z0)
    pre = z1 ** -0.5
    psi = np.empty((4, r.size), dtype=complex)
    dpsi = np.empty((4, r.size), dtype=complex)
    rot = (m / OMEGA, m * OMEGA, m)
    for j, (x, c) in enumerate(zip(args, rot)):
        a, ap = specfun.ai(x)
        psi[j] = pre * a
        dpsi[j] = dsdr * (-0.5 * z1 ** -1.5 * z2 * a + z1 ** 0.5 * c * ap)
    psi[3] = 0.5 * (np.exp(1j * np.pi / 6) * psi[0] + np.exp(-1j * np.pi / 6) * psi[2])
    dpsi[3] = 0.5 * (np.exp(1j * np.pi / 6) * dpsi[0] + np.exp(-1j * np.pi / 6) * dpsi[2])
    if not np.all(np.isfinite(psi)) or not np.all(np.isfinite(dpsi)):
        raise RangeError("WKB basis overflows at the requested radii")
    schwarz = z3 / z1 - 1.5 * (z2 / z1) ** 2
    h = -se.b ** 2 / (8 * complex(se.e)) * schwarz
    return {"r": r, "s": s, "psi": psi, "dpsi": dpsi, "eta": _eta_from_zeta(se, z0), "h": h,
            "zeta": z0, "zeta_s": z1}


def h_closed_form(se: SpectralEnergy, r):
    """The explicit rational-plus-zeta form of the correction (cross-check)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    s = _s_of_r(se, r)
    a = se.alpha
    z = zeta_derivs(s, a)[0]
    q = s ** 2 - 1 - a / s ** 2
    num = 3 * s ** 2 + 2 + 18 * a / s ** 2 - 6 * a / s ** 4 - a ** 2 / s ** 6
    return -se.b ** 2 / (4 * complex(se.e)) * (5 * q / (16 * z ** 3) - num / (4 * q ** 2))


def wkb_basis(se: SpectralEnergy, r: float) -> WkbEval:
    d = basis_arrays(se, r)
    et = d["eta"][0]
    wp, wm = weights(se, r, et)
    kp, km = kappa_pm(se)
    return WkbEval(r=float(r), psi=tuple(complex(v) for v in d["psi"][:, 0]),
                   dpsi=tuple(complex(v) for v in d["dpsi"][:, 0]), eta=complex(et),
                   omega_plus=float(wp), omega_minus=float(wm), h=complex(d["h"][0]),
                   kappa_plus=kp, kappa_minus=km)


def contract_check(b: float, nu: float | None = None, energy: complex = 1.0, n: int = 41) -> dict:
    """Identity residuals of the basis on [0.3 r*, 2 r*]: corrected equation (4th-order FD),
    Airy connection psi_3 + w psi_2 + w^2 psi_1 = 0, Wronskian W(psi_4, psi_2), and at real E
    the imaginary parts of psi_2, psi_4, h for r <= 2/b.
    """
    se = SpectralEnergy(b, energy, nu)
    rs = turning_data(se).r_star
    r = np.linspace(0.3 * rs, 2.0 * rs, n)
    step = 1e-3 * rs
    rows = [basis_arrays(se, r + k * step) for k in (-2, -1, 0, 1, 2)]
    psi = [row["psi"] for row in rows]
    d2 = (-psi[0] + 16 * psi[1] - 30 * psi[2] + 16 * psi[3] - psi[4]) / (12 * step * step)
    mid = rows[2]
    pot = -complex(energy) + b * b * r * r / 4
    if nu is not None:
        pot = pot - (nu * nu - 0.25) / r ** 2
    fd = np.abs(d2 + pot * mid["psi"] - mid["h"] * mid["psi"]) / (np.abs(d2) + np.abs(pot * mid["psi"]))
    p = mid["psi"]
    conn = np.abs(p[2] + OMEGA * p[1] + OMEGA ** 2 * p[0]) / np.abs(p[:3]).max(axis=0)
    w42 = p[3] * mid["dpsi"][1] - mid["dpsi"][3] * p[1]
    out = {"b": b, "nu": nu, "energy": complex(energy), "r_star": rs,
           "fd_residual": float(fd.max()), "connection_residual": float(conn.max()),
           "wronskian_residual": float(np.abs(w42 / wronskian_42(se) - 1).max())}
    if complex(energy).imag == 0:
        rr = r[r <= 2 / b]
        sub = basis_arrays(se, rr)
        scale = np.abs(sub["psi"][[1, 3]]).max()
        out["reality_residual"] = float(max(np.abs(sub["psi"][[1, 3]].imag).max() / scale,
                                            np.abs(sub["h"].imag).max() / np.abs(sub["h"]).max()))
    return out
