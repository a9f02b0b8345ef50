"""Formal large-r solutions of  u'' + (b^2 r^2/4 - E - kappa/r^2) u = 0.

Two branches exist, carrying the quadratic phases e^{+i b r^2/4} and
e^{-i b r^2/4}.  Each is a convergent-looking but asymptotic series

    u = e^{s i b r^2/4} r^{a} sum_k c_k r^{-2k},    a = -1/2 - s i E / b,

truncated at its smallest term.  At the radii used here (b r^2 >~ 50) the
optimal truncation error is far below double precision.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

MAX_TERMS = 400


def series_coefficients(b: float, energy: complex, kappa: complex, sign: int, r: float,
                        rtol: float = 1e-18) -> tuple[complex, np.ndarray]:
    """Exponent a and coefficients c_k, truncated at r by the smallest-term rule."""
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    a = -0.5 - sign * 1j * energy / b
    coeffs = [1.0 + 0j]
    inv_r2 = 1.0 / (r * r)
    last = 1.0
    for k in range(1, MAX_TERMS):
        m = a - 2 * (k - 1)
        c = coeffs[-1] * (m * (m - 1) - kappa) / (sign * 2j * b * k)
        size = abs(c) * inv_r2 ** k
        if size > last:
            break
        coeffs.append(c)
        last = size
        if size < rtol:
            break
    else:
        raise DomainError("far-field series did not reach the requested accuracy")
    if last > 1e-13:
        raise DomainError(f"far-field series too coarse at r={r:.3g} (smallest term {last:.2e})")
    return a, np.asarray(coeffs)


def branch(b: float, energy: complex, kappa: complex, sign: int, r: float,
           log_scale: bool = False):
    """Value and r-derivative of the branch with phase e^{sign i b r^2/4} at radius r.

    With log_scale the common factor e^{sign i b r^2/4} r^a is returned separately
    as its logarithm, so the caller can normalize without overflow.
    """
    a, c = series_coefficients(b, energy, kappa, sign, r)
    k = np.arange(c.size)
    pw = r ** (-2.0 * k)
    g = np.sum(c * pw)
    dg = np.sum(c * (-2.0 * k) * pw) / r
    # u = F g with F = e^{sign i b r^2/4} r^a, F'/F = sign i b r/2 + a/r
    ratio = sign * 0.5j * b * r + a / r
    val = g
    der = dg + ratio * g
    log_f = sign * 0.25j * b * r * r + a * np.log(r)
    if log_scale:
        return val, der, log_f
    f = np.exp(log_f)
    return f * val, f * der
