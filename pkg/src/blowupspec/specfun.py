"""Complex Airy and modified Bessel functions with identity self-checks.

Production values come from the AMOS routines wrapped by ``scipy.special``.
Two independent evaluators (Maclaurin series and the large-argument
asymptotic series) are kept alongside for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, RangeError

AIRY_GUARD = 1e3
OMEGA = np.exp(2j * np.pi / 3)
AI0 = 0.355028053887817239
AIP0 = -0.258819403792806798


@dataclass(frozen=True)
class AiryEval:
    z: complex
    ai: complex
    ai_prime: complex
    bi: complex
    bi_prime: complex


@dataclass(frozen=True)
class BesselEval:
    nu: float
    z: complex
    i_val: complex
    k_val: complex
    i_prime: complex
    k_prime: complex


def ai(z):
    """Ai(z) and Ai'(z) for complex array input."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > AIRY_GUARD):
        raise RangeError(f"|z| exceeds the Airy guard {AIRY_GUARD:g}")
    a, ap, _, _ = special.airy(z)
    return a, ap


def ai_scaled(z):
    """e^{zeta} Ai(z) and e^{zeta} Ai'(z) with zeta = (2/3) z^{3/2} (principal)."""
    z = np.asarray(z, dtype=complex)
    a, ap, _, _ = special.airye(z)
    return a, ap


def bi(z):
    """Bi built from rotated Ai values, so the rotation identity holds by construction."""
    z = np.asarray(z, dtype=complex)
    am, apm = ai(z / OMEGA)
    ap_, app = ai(z * OMEGA)
    em, ep = np.exp(-1j * np.pi / 6), np.exp(1j * np.pi / 6)
    val = em * am + ep * ap_
    der = em * apm / OMEGA + ep * app * OMEGA
    return val, der


def airy_eval(z: complex) -> AiryEval:
    a, ap = ai(z)
    b, bp = bi(z)
    out = AiryEval(complex(z), complex(a), complex(ap), complex(b), complex(bp))
    if not all(np.isfinite(v) for v in (out.ai, out.ai_prime, out.bi, out.bi_prime)):
        raise RangeError(f"Airy values overflow at z={z}")
    return out


def airy_maclaurin(z, terms: int = 120):
    """Ai and Ai' from the power series at 0; accurate for |z| <~ 3."""
    z = np.asarray(z, dtype=complex)
    f = np.ones_like(z)
    g = z.copy()
    sf, sg = f.copy(), g.copy()
    df, dg = np.zeros_like(z), np.ones_like(z)
    z3 = z ** 3
    for k in range(1, terms):
        f = f * z3 / ((3 * k - 1) * (3 * k))
        g = g * z3 / ((3 * k) * (3 * k + 1))
        sf = sf + f
        sg = sg + g
        df = df + f * 3 * k / np.where(z == 0, 1, z)
        dg = dg + g * (3 * k + 1) / np.where(z == 0, 1, z)
    return AI0 * sf + AIP0 * sg, AI0 * df + AIP0 * dg


def airy_asymptotic(z, terms: int = 30):
    """Leading-sector asymptotic series for Ai, Ai'; valid for |arg z| < pi, |z| large."""
    z = np.asarray(z, dtype=complex)
    zeta = 2.0 / 3.0 * z ** 1.5
    u = [1.0]
    v = [1.0]
    for k in range(1, terms):
        uk = u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k)
        u.append(uk)
        v.append(-uk * (6 * k + 1) / (6 * k - 1))
    su = np.zeros_like(z)
    sv = np.zeros_like(z)
    for k in range(terms):
        su = su + (-1) ** k * u[k] / zeta ** k
        sv = sv + (-1) ** k * v[k] / zeta ** k
    pre = np.exp(-zeta) / (2 * np.sqrt(np.pi))
    return pre * z ** -0.25 * su, -pre * z ** 0.25 * sv


def _check_sector(nu, z):
    z = np.asarray(z, dtype=complex)
    if np.any(nu < -0.5):
        raise DomainError("order must be >= -1/2")
    if np.any(z == 0):
        raise DomainError("z = 0 is excluded")
    if np.any(np.abs(np.angle(z)) > np.pi / 4 + 1e-12):
        raise DomainError("argument outside the sector |arg z| <= pi/4")
    return z


def bessel_ik(nu, z, scaled: bool = False):
    """I_nu, K_nu and derivatives on |arg z| <= pi/4.

    With ``scaled`` the pair is returned as e^{-z} I and e^{z} K.
    """
    z = _check_sector(nu, z)
    nu = np.asarray(nu, dtype=float)
    # AMOS returns nan for subnormal orders; the functions are flat in nu there
    nu = np.where(np.abs(nu) < np.finfo(float).tiny, 0.0, nu)
    # ive scales by e^{-|Re z|}; rotate to the e^{-z} scaling
    rot = np.exp(-1j * z.imag)
    ie = special.ive(nu, z) * rot
    ke = special.kve(nu, z)
    ie1 = special.ive(nu + 1, z) * rot
    ke1 = special.kve(nu + 1, z)
    ip = ie1 + nu / z * ie
    kp = -ke1 + nu / z * ke
    if scaled:
        return ie, ke, ip, kp
    ez = np.exp(z)
    return ie * ez, ke / ez, ip * ez, kp / ez


def bessel_eval(nu: float, z: complex) -> BesselEval:
    i, k, ip, kp = bessel_ik(nu, z)
    return BesselEval(float(nu), complex(z), complex(i), complex(k), complex(ip), complex(kp))


def turan_phi(nu, z):
    """1 + nu^2/z^2 - (I_nu'/I_nu)^2, bounded by 1/(nu+1) near the real axis."""
    i, _, ip, _ = bessel_ik(nu, z, scaled=True)
    return 1 + nu ** 2 / z ** 2 - (ip / i) ** 2


def gamma(x):
    return special.gamma(x)


def tilde_i(nu, energy, r):
    """(sqrt(E) r)^{1/2} I_nu(sqrt(E) r): the free regular solution of u'' = (E + (nu^2-1/4)/r^2) u."""
    z = np.sqrt(np.asarray(energy, dtype=complex)) * np.asarray(r)
    i, _, ip, _ = bessel_ik(nu, z)
    se = np.sqrt(np.asarray(energy, dtype=complex))
    val = np.sqrt(z) * i
    der = se * (0.5 / np.sqrt(z) * i + np.sqrt(z) * ip)
    return val, der


def tilde_k(nu, energy, r):
    """(sqrt(E) r)^{1/2} K_nu(sqrt(E) r) and its r-derivative."""
    z = np.sqrt(np.asarray(energy, dtype=complex)) * np.asarray(r)
    _, k, _, kp = bessel_ik(nu, z)
    se = np.sqrt(np.asarray(energy, dtype=complex))
    val = np.sqrt(z) * k
    der = se * (0.5 / np.sqrt(z) * k + np.sqrt(z) * kp)
    return val, der


def selftest(n: int = 200, seed: int = 0) -> dict:
    """Identity residuals on pseudo-random samples; used by the CLI self-test."""
    rng = np.random.default_rng(seed)
    rad = 8 * np.sqrt(rng.random(n))
    ang = (2 * rng.random(n) - 1) * 5 * np.pi / 6
    z = rad * np.exp(1j * ang)
    a0, a0p = ai(z)
    am, amp = ai(z / OMEGA)
    ap_, app = ai(z * OMEGA)
    conn = a0 + am / OMEGA + ap_ * OMEGA
    scale = np.maximum.reduce([np.abs(a0), np.abs(am), np.abs(ap_)])
    # W(Ai, Ai(. e^{-+2 pi i/3})) = e^{+-i pi/6} / (2 pi)
    w_minus = a0 * amp / OMEGA - a0p * am
    w_plus = a0 * app * OMEGA - a0p * ap_
    # relative to the size of the products, which carry the rounding error
    wr = np.maximum(np.abs(w_minus - np.exp(1j * np.pi / 6) / (2 * np.pi))
                    / (np.abs(a0 * amp) + np.abs(a0p * am)),
                    np.abs(w_plus - np.exp(-1j * np.pi / 6) / (2 * np.pi))
                    / (np.abs(a0 * app) + np.abs(a0p * ap_)))
    nu = rng.uniform(-0.5, 20, n)
    bz = rng.uniform(0.05, 20, n) * np.exp(1j * rng.uniform(-np.pi / 4, np.pi / 4, n))
    i, k, ip, kp = bessel_ik(nu, bz, scaled=True)
    bw = np.abs((i * kp - ip * k) * bz + 1) / (np.abs(i * kp * bz) + np.abs(ip * k * bz))
    nu3 = rng.uniform(3, 50, n)
    tz = rng.uniform(0.05, 30, n) * np.exp(1j * rng.uniform(-np.pi / 16, np.pi / 16, n))
    phi = np.abs(turan_phi(nu3, tz))
    out = {
        "airy_connection": float(np.max(np.abs(conn) / scale)),
        "airy_wronskian": float(np.max(wr)),
        "bessel_wronskian": float(np.max(bw)),
        "turan_ratio": float(np.max(phi * (nu3 + 1))),
        "turan_violation": float(np.max(np.maximum(phi - 1 / (nu3 + 1), 0))),
        "samples": n,
    }
    out["pass"] = bool(out["airy_connection"] <= 1e-9 and out["turan_violation"] <= 1e-9
                       and out["airy_wronskian"] <= 1e-10 and out["bessel_wronskian"] <= 1e-10)
    return out
