"""Flat (b = 0) linearized structure around the ground state Q at p0 = 1 + 4/d.

Scalar operators (radial class l, Delta_l = d^2/dr^2 + (d-1)/r d/dr - l(l+d-2)/r^2):

    L+ = -Delta + 1 - p Q^{p-1},    L- = -Delta + 1 - Q^{p-1},

with fundamental solutions A (regular, A(0) = 1), D (decaying) and
E(r) = Q(r) int_1^r Q^{-2} s^{1-d} ds, normalized so that AD' - DA' = QE' - EQ' = r^{1-d}.
The matrix operator is H0 = diag(Delta - 1, -Delta + 1) + [[W1, W2], [-W2, -W1]], so that
H0 (f, f) = (-L+ f, L+ f) and H0 (g, -g) = -(L- g)(1, 1).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.special import gamma

from .errors import ConvergenceError, DomainError
from .groundstate import R_SEED, GroundState, SmoothQ, _decaying

H_GRID = 0.005
RTOL = 1e-13
WRONSKIAN_FAIL = 1e-4
TAIL_TOL = 1e-8


def sphere_area(d: int) -> float:
    return 2 * np.pi ** (d / 2) / gamma(d / 2)


def _check_gs(gs: GroundState) -> None:
    if abs(gs.p - (1 + 4 / gs.d)) > 1e-12:
        raise DomainError(f"ground state has p={gs.p}, expected the mass-critical 1 + 4/d")


@dataclass
class LpmBasis:
    gs: GroundState
    qf: SmoothQ
    r: np.ndarray
    q: np.ndarray
    q_prime: np.ndarray
    a: np.ndarray
    a_prime: np.ndarray
    d_sol: np.ndarray
    d_prime: np.ndarray
    e_sol: np.ndarray
    e_prime: np.ndarray
    kappa_a: float
    c_a: float
    c_d: float
    c_e: float
    kappa_e: float
    wronskian_drift: float

    @property
    def d(self) -> int:
        return self.gs.d

    @property
    def p(self) -> float:
        return self.gs.p

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    def v_plus(self, r=None):
        q = self.q if r is None else self.qf(r)[0]
        return 1 - self.p * q ** (self.p - 1)

    def v_minus(self, r=None):
        q = self.q if r is None else self.qf(r)[0]
        return 1 - q ** (self.p - 1)

    def weight(self) -> np.ndarray:
        return self.r ** (self.d - 1)


def _linear_rhs(gs: GroundState, coef: float, forcing=None, sign: float = 1.0):
    """u'' = -(d-1)/r u' + (1 - coef Q^{p-1}) u, plus an accumulated integral sign*f*u*r^{d-1}."""
    d, p = gs.d, gs.p

    def rhs(r, y):
        q = gs(np.array([r]))[0][0]
        acc = (1 - coef * q ** (p - 1)) * y[0]
        if d > 1:
            acc -= (d - 1) / r * y[1]
        if forcing is None:
            return [y[1], acc]
        return [y[1], acc, sign * forcing(r) * y[0] * r ** (d - 1)]

    return rhs


def _regular_seed(gs: GroundState, coef: float) -> list:
    a2 = (1 - coef * gs.q0 ** (gs.p - 1)) / (2 * gs.d)
    return [1 + a2 * R_SEED ** 2, 2 * a2 * R_SEED]


def _outward(gs, coef, r, forcing=None):
    y0 = _regular_seed(gs, coef)
    if forcing is not None:
        y0 = y0 + [forcing(R_SEED) * R_SEED ** gs.d / gs.d]
    sol = solve_ivp(_linear_rhs(gs, coef, forcing), (R_SEED, r[-1]), y0, method="DOP853",
                    rtol=RTOL, atol=1e-300, first_step=1e-4, t_eval=r[1:])
    if not sol.success:
        raise ConvergenceError(sol.message)
    out = np.empty((len(y0), r.size))
    out[:, 1:] = sol.y
    out[0, 0], out[1, 0] = 1.0, 0.0
    if forcing is not None:
        out[2, 0] = 0.0
    return out


def _inward(gs, coef, r, y_end, forcing=None):
    """Integrate from r[-1] down to r[0] (or R_SEED when d >= 2); node 0 is nan for d >= 2."""
    lo = r[0] if gs.d == 1 else R_SEED
    nodes = r[::-1] if gs.d == 1 else np.append(r[:0:-1], R_SEED)
    sol = solve_ivp(_linear_rhs(gs, coef, forcing, sign=-1.0), (r[-1], lo), y_end, method="DOP853",
                    rtol=RTOL, atol=1e-300, first_step=1e-4, t_eval=nodes)
    if not sol.success:
        raise ConvergenceError(sol.message)
    out = np.full((len(y_end), r.size), np.nan)
    if gs.d == 1:
        out[:, :] = sol.y[:, ::-1]
    else:
        out[:, 1:] = sol.y[:, -2::-1]
        if forcing is not None:
            # the accumulated integral is continuous at 0
            out[2, 0] = sol.y[2, -1]
    return out


def _fit_tail(r, u, sign: float) -> tuple[float, float]:
    """Fit log|r^{(d-1)/2} u e^{sign r}| against {1, 1/r}; returns (amplitude, 1/r coefficient)."""
    design = np.column_stack([np.ones_like(r), 1 / r])
    coef, *_ = np.linalg.lstsq(design, np.log(np.abs(u)) + sign * r, rcond=None)
    return float(np.exp(coef[0])), float(coef[1])


def build_lpm_basis(gs: GroundState, h: float = H_GRID) -> LpmBasis:
    _check_gs(gs)
    d, p = gs.d, gs.p
    big_r = gs.r_max
    r = np.linspace(0.0, big_r, int(round(big_r / h)) + 1)
    gs_ref, gs = gs, SmoothQ(gs)
    q, dq = gs(r)
    a, da = _outward(gs, p, r)
    k, dk = _decaying(d, big_r)
    # amplitude fixed by AD' - DA' = r^{1-d} at the outer node
    w_unit = a[-1] * dk - k * da[-1]
    scale = big_r ** (1 - d) / w_unit
    dsol, ddsol = _inward(gs, p, r, [scale * k, scale * dk])
    # E = Q int_1^r Q^{-2} s^{1-d}; the Q(0)^{-2} s^{1-d} part is done in closed form
    q0 = gs.q0
    if d == 1:
        sing = r - 1
    elif d == 2:
        with np.errstate(divide="ignore"):
            sing = np.log(r)
    else:
        with np.errstate(divide="ignore"):
            sing = (r ** (2 - d) - 1) / (2 - d)
    sing = sing / q0 ** 2
    smooth = np.zeros_like(r)

    def smooth_rhs(s, y):
        return [(1 / gs(np.array([s]))[0][0] ** 2 - 1 / q0 ** 2) * s ** (1 - d)]

    up = r >= 1.0
    sol = solve_ivp(smooth_rhs, (1.0, big_r), [0.0], method="DOP853", rtol=RTOL, atol=1e-300, first_step=1e-4,
                    t_eval=r[up])
    smooth[up] = sol.y[0]
    down = (r < 1.0) & (r >= (0.0 if d == 1 else R_SEED))
    sol = solve_ivp(smooth_rhs, (1.0, r[down][0]), [0.0], method="DOP853", rtol=RTOL, atol=1e-300, first_step=1e-4,
                    t_eval=r[down][::-1])
    smooth[down] = sol.y[0][::-1]
    integral = sing + smooth
    e_sol = q * integral
    with np.errstate(divide="ignore", invalid="ignore"):
        e_prime = dq * integral + 1 / (q * r ** (d - 1))
    if d >= 2:
        e_sol[0] = e_prime[0] = np.nan
    tail = (r >= big_r / 2) & (r <= big_r - 1)
    kappa_a, c_a = _fit_tail(r[tail], a[tail] * r[tail] ** ((d - 1) / 2), -1.0)
    _, c_d = _fit_tail(r[tail], dsol[tail] * r[tail] ** ((d - 1) / 2), 1.0)
    kappa_e, c_e = _fit_tail(r[tail], e_sol[tail] * r[tail] ** ((d - 1) / 2), -1.0)
    basis = LpmBasis(gs=gs_ref, qf=gs, r=r, q=q, q_prime=dq, a=a, a_prime=da, d_sol=dsol, d_prime=ddsol,
                     e_sol=e_sol, e_prime=e_prime, kappa_a=kappa_a, c_a=c_a, c_d=c_d, c_e=c_e, kappa_e=kappa_e,
                     wronskian_drift=0.0)
    basis.wronskian_drift = float(np.nanmax(np.abs(wronskian_ad(basis) * r ** (d - 1) - 1)[1:]))
    if basis.wronskian_drift > WRONSKIAN_FAIL:
        raise ConvergenceError(f"Wronskian drift {basis.wronskian_drift:.2e} exceeds {WRONSKIAN_FAIL}")
    return basis


def wronskian_ad(basis: LpmBasis) -> np.ndarray:
    return basis.a * basis.d_prime - basis.d_sol * basis.a_prime


def wronskian_qe(basis: LpmBasis) -> np.ndarray:
    return basis.q * basis.e_prime - basis.e_sol * basis.q_prime


def at(basis: LpmBasis, values: np.ndarray, r) -> np.ndarray:
    """Values at grid nodes nearest to the requested radii."""
    idx = np.rint(np.asarray(r, dtype=float) / basis.h).astype(int)
    return values[idx]


def _cut(basis: LpmBasis, x_star: float) -> int:
    if not np.isfinite(x_star):
        return basis.r.size
    if x_star <= 0 or x_star > basis.r[-1] + 1e-12:
        raise DomainError(f"x_star={x_star} must lie in (0, R_Q]")
    return int(np.floor(x_star / basis.h + 1e-9)) + 1


def invert_lplus(basis: LpmBasis, f, x_star: float = np.inf) -> np.ndarray:
    """-A int_r^{x*} f D s^{d-1} - D int_0^r f A s^{d-1} on nodes r <= x* (x* = inf: r <= R_Q).

    ``f`` is a callable (integrals accumulated by the adaptive integrator) or samples on the
    basis grid (composite Simpson).
    """
    n = _cut(basis, x_star)
    r = basis.r[:n]
    d, gs, p = basis.d, basis.qf, basis.p
    w = basis.weight()[:n]
    a, dsol = basis.a[:n], basis.d_sol[:n]
    if callable(f):
        i2 = _outward(gs, p, r, forcing=f)[2]
        y_end = [dsol[-1], basis.d_prime[n - 1], 0.0]
        i1 = _inward(gs, p, r, y_end, forcing=f)[2]
        f_end = abs(f(r[-1]))
    else:
        fs = np.asarray(f, dtype=float)[:n]
        wd = fs * dsol * w
        if d >= 2:
            wd[0] = 0.0
        i2 = cumulative_simpson(fs * a * w, x=r, initial=0.0)
        c = cumulative_simpson(wd, x=r, initial=0.0)
        i1 = c[-1] - c
        f_end = abs(fs[-1])
    out = -a * i1
    tail_part = -dsol * i2
    if d >= 2:
        tail_part[0] = 0.0
    out = out + tail_part
    if not np.isfinite(x_star):
        # contribution of [R_Q, inf) to the A-term, bounded with the e^{-2r} decay of f D
        tail = np.abs(a).max() * f_end * abs(dsol[-1]) * r[-1] ** (d - 1)
        if tail > TAIL_TOL * np.abs(out).max():
            warnings.warn(f"infinity proxy tail {tail:.2e} exceeds {TAIL_TOL} of the result")
    return out


def invert_lminus(basis: LpmBasis, f) -> np.ndarray:
    """-Q int_0^r [int_0^s f Q tau^{d-1}] ds / (Q^2 s^{d-1}) on the basis grid."""
    r, q, d = basis.r, basis.q, basis.d
    fs = f(r) if callable(f) else np.asarray(f, dtype=float)
    inner = cumulative_simpson(fs * q * basis.weight(), x=r, initial=0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = inner / (q ** 2 * r ** (d - 1))
    outer[0] = 0.0
    return -q * cumulative_simpson(outer, x=r, initial=0.0)


def inner_product(basis: LpmBasis, u: np.ndarray, v: np.ndarray) -> float:
    """L^2(R^d) inner product of radial samples (trapezoid-free Simpson on the full grid)."""
    n = min(u.size, v.size)
    return float(sphere_area(basis.d) * cumulative_simpson(u[:n] * v[:n] * basis.weight()[:n],
                                                           x=basis.r[:n])[-1])


def moment_xq(basis: LpmBasis) -> float:
    """||x Q||^2 in L^2(R^d)."""
    return inner_product(basis, basis.r * basis.q, basis.r * basis.q)


def xq_norm_closed_form_d1() -> float:
    """||x Q||^2 for Q = 3^{1/4} sech^{1/2}(2x) on the line: (sqrt 3/8) int_R y^2 sech y dy = sqrt3 pi^3/32."""
    return np.sqrt(3) * np.pi ** 3 / 32


def exotic_mode(basis: LpmBasis) -> np.ndarray:
    """rho = L+^{-1}(|x|^2 Q) with the infinity proxy."""
    qf = basis.qf
    return invert_lplus(basis, lambda s: s * s * qf(np.array([s]))[0][0])


def exotic_identity(basis: LpmBasis) -> dict:
    # an integral of rho only, so grid samples suffice (no FD of rho is taken)
    rho = invert_lplus(basis, basis.r ** 2 * basis.q)
    lhs = inner_product(basis, rho, basis.q)
    rhs = 0.5 * moment_xq(basis)
    return {"rho_q": lhs, "half_xq2": rhs, "rel_error": abs(lhs - rhs) / abs(rhs)}


# ---- discrete operators on the uniform grid -------------------------------------------------

def fd_derivatives(u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order central first and second differences at nodes 2..n-3."""
    d1 = (u[:-4] - 8 * u[1:-3] + 8 * u[3:-1] - u[4:]) / (12 * h)
    d2 = (-u[:-4] + 16 * u[1:-3] - 30 * u[2:-2] + 16 * u[3:-1] - u[4:]) / (12 * h * h)
    return d1, d2


def laplacian(basis: LpmBasis, u: np.ndarray, l: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(r at nodes 2..n-3, Delta_l u there)."""
    n = u.shape[0]
    r = basis.r[2:n - 2]
    d1, d2 = fd_derivatives(u, basis.h)
    ang = l * (l + basis.d - 2)
    if u.ndim > 1:
        r_ = r[:, None]
    else:
        r_ = r
    return r, d2 + (basis.d - 1) / r_ * d1 - ang / r_ ** 2 * u[2:n - 2]


def apply_lplus(basis: LpmBasis, u: np.ndarray, l: int = 0) -> tuple[np.ndarray, np.ndarray]:
    r, lap = laplacian(basis, u, l)
    return r, -lap + basis.v_plus()[2:u.size - 2] * u[2:-2]


def apply_lminus(basis: LpmBasis, u: np.ndarray, l: int = 0) -> tuple[np.ndarray, np.ndarray]:
    r, lap = laplacian(basis, u, l)
    return r, -lap + basis.v_minus()[2:u.size - 2] * u[2:-2]


def potentials_h0(basis: LpmBasis, r=None) -> tuple[np.ndarray, np.ndarray]:
    q = basis.q if r is None else basis.qf(r)[0]
    p = basis.p
    return (p + 1) / 2 * q ** (p - 1), (p - 1) / 2 * q ** (p - 1)


def apply_h0(basis: LpmBasis, u: np.ndarray, l: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """H0 acting on (n, 2) samples at nodes 2..n-3."""
    n = u.shape[0]
    r, lap = laplacian(basis, u, l)
    w1, w2 = potentials_h0(basis)
    w1, w2 = w1[2:n - 2], w2[2:n - 2]
    mid = u[2:n - 2]
    out = np.empty_like(mid)
    out[:, 0] = lap[:, 0] - mid[:, 0] + w1 * mid[:, 0] + w2 * mid[:, 1]
    out[:, 1] = -w2 * mid[:, 0] - lap[:, 1] + mid[:, 1] - w1 * mid[:, 1]
    return r, out


# ---- generalized nullspace ------------------------------------------------------------------

@dataclass
class FlatKernelBasis:
    basis: LpmBasis
    xi: list
    zeta0: np.ndarray
    zeta1: np.ndarray


def flat_kernel_basis(basis: LpmBasis) -> FlatKernelBasis:
    r, q, dq = basis.r, basis.q, basis.q_prime
    d = basis.d
    q1 = d / 2 * q + r * dq
    rho = exotic_mode(basis)
    pair = lambda f, s: np.column_stack([f, s * f]).astype(complex)  # noqa: E731
    xi = [1j * pair(q, -1), 0.5 * pair(q1, 1), -0.125j * pair(r * r * q, -1), 0.125 * pair(rho, 1)]
    return FlatKernelBasis(basis=basis, xi=xi, zeta0=pair(dq, 1), zeta1=-0.5j * pair(r * q, -1))


def jordan_residuals(fk: FlatKernelBasis, window=(0.05, 15.0)) -> dict:
    """Relative residuals of H0 xi_0 = 0, H0 xi_k + i xi_{k-1} = 0, H0 zeta_0 = 0, H0 zeta_1 + i zeta_0 = 0.

    Also reports the competing form H0 xi_k + i xi_k for k = 1, 2, 3.
    """
    basis = fk.basis

    def link(u, prev, l):
        r, hu = apply_h0(basis, u, l)
        m = (r >= window[0]) & (r <= window[1])
        target = 0 if prev is None else prev[2:-2][m]
        res = hu[m] + 1j * target
        scale = max(np.abs(laplacian(basis, u, l)[1][m]).max(), np.abs(target).max() if prev is not None
                    else 0.0)
        return float(np.abs(res).max() / scale)

    chain = [{"link": "H0 xi0", "residual": link(fk.xi[0], None, 0)}]
    for k in (1, 2, 3):
        chain.append({"link": f"H0 xi{k} + i xi{k - 1}", "residual": link(fk.xi[k], fk.xi[k - 1], 0)})
    chain.append({"link": "H0 zeta0", "residual": link(fk.zeta0, None, 1)})
    chain.append({"link": "H0 zeta1 + i zeta0", "residual": link(fk.zeta1, fk.zeta0, 1)})
    displayed = [link(fk.xi[k], fk.xi[k], 0) for k in (1, 2, 3)]
    worst = max(c["residual"] for c in chain)
    return {"d": basis.d, "chain": chain, "max_residual": worst,
            "same_index_form_residuals": displayed,
            "form_that_holds": "H0 xi_k = -i xi_(k-1)" if worst < min(displayed) else "H0 xi_k = -i xi_k"}


def residual_report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)


# ---- dense spectral oracle ------------------------------------------------------------------

def _fourier_matrices(n: int, length: float) -> tuple[np.ndarray, np.ndarray]:
    """Periodic first/second differentiation matrices on n (even) equispaced nodes of a period."""
    k = np.fft.fftfreq(n, d=length / n) * 2 * np.pi
    eye = np.eye(n)
    ik = 1j * k
    ik[n // 2] = 0.0  # Nyquist mode has no odd derivative
    d1 = np.real(np.fft.ifft(ik[:, None] * np.fft.fft(eye, axis=0), axis=0))
    d2 = np.real(np.fft.ifft(-(k ** 2)[:, None] * np.fft.fft(eye, axis=0), axis=0))
    return d1, d2


def h0_matrix(gs: GroundState, l: int, half_width: float = 30.0, h: float = 0.08) -> tuple[np.ndarray, np.ndarray]:
    """Collocation matrix of H0 on class l: parity-extended Fourier grid, nodes at (k + 1/2) h."""
    _check_gs(gs)
    m = int(round(half_width / h))
    n = 2 * m
    x = -half_width + (np.arange(n) + 0.5) * (half_width / m)
    d1, d2 = _fourier_matrices(n, 2 * half_width)
    d = gs.d
    lap = d2 + (d - 1) / x[:, None] * d1 - l * (l + d - 2) / (x ** 2)[:, None] * np.eye(n)
    pos = np.arange(m, n)
    mirror = n - 1 - pos
    s = (-1) ** l
    k = lap[np.ix_(pos, pos)] + s * lap[np.ix_(pos, mirror)]
    r = x[pos]
    q = gs(r)[0]
    p = gs.p
    w1, w2 = (p + 1) / 2 * q ** (p - 1), (p - 1) / 2 * q ** (p - 1)
    eye = np.eye(m)
    top = np.hstack([k - eye + np.diag(w1), np.diag(w2)])
    bot = np.hstack([-np.diag(w2), -k + eye - np.diag(w1)])
    return np.vstack([top, bot]), r


def dense_oracle(gs: GroundState, l: int, radius: float = 0.5, **kw) -> np.ndarray:
    """Eigenvalues of the collocated H0 on class l inside |lambda| <= radius, sorted by modulus."""
    mat, _ = h0_matrix(gs, l, **kw)
    ev = np.linalg.eigvals(mat)
    inside = ev[np.abs(ev) <= radius]
    return inside[np.argsort(np.abs(inside))]


def oracle_check(gs: GroundState, classes=(0, 1, 2), radius: float = 0.5, cluster: float = 5e-3,
                 **kw) -> dict:
    """Eigenvalues near 0 only for l <= 1 and none for l >= 2 inside |lambda| <= radius."""
    out = {}
    for l in classes:
        ev = dense_oracle(gs, l, radius, **kw)
        if l <= 1:
            ok = bool(ev.size > 0 and np.all(np.abs(ev) <= cluster))
        else:
            ok = ev.size == 0
        out[l] = {"eigenvalues": [[float(z.real), float(z.imag)] for z in ev], "count": int(ev.size),
                  "max_modulus": float(np.abs(ev).max()) if ev.size else 0.0, "ok": ok}
    return out


def essential_gap(gs: GroundState, l: int, cluster: float = 5e-3, **kw) -> float:
    """Smallest |Re lambda| over collocated eigenvalues outside the zero cluster."""
    mat, _ = h0_matrix(gs, l, **kw)
    ev = np.linalg.eigvals(mat)
    rest = ev[np.abs(ev) > cluster]
    return float(np.abs(rest.real).min())
