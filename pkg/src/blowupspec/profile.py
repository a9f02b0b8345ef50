"""Self-similar profile P_b = e^{i b r^2/4} Q_b and the relation s_c(b).

P solves  P'' + (d-1)/r P' + (b^2 r^2/4 - 1 - i b s_c) P + |P|^{p-1} P = 0,
p = 1 + 4/(d - 2 s_c), with P(0) > 0 and P'(0) = 0.  At fixed b the unknowns
(P(0), s_c) are chosen so that phi = r^{(d-1)/2} P carries no e^{-i b r^2/4}
component at R_inf.

Because (p - 1)(d/2 - s_c) = 2, the nonlinear term |P|^{p-1} decays exactly like
an inverse-square potential.  It is folded into the far-field series as an
effective angular constant, which makes the branch projection exact to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp, simpson

from . import farfield, wkb
from .errors import ConvergenceError, DomainError
from .groundstate import GroundState, SmoothQ, solve_ground_state

R_SEED = 1e-4
B_MIN, B_MAX = 0.2, 0.6


@dataclass
class SelfSimilarProfile:
    d: int
    b: float
    s_c: float
    p: float
    q0: float
    gauge: float
    r_inf: float
    grid: np.ndarray
    p_b: np.ndarray
    dp_b: np.ndarray
    c_adm: complex = 0j
    c_inadm: complex = 0j
    varrho_b: float = float("nan")
    theta_b: float = float("nan")
    matching_residual: float = float("nan")
    rtol: float = 1e-12
    _sol: object = field(default=None, repr=False)

    @property
    def energy(self) -> complex:
        return 1 + 1j * self.b * self.s_c

    @property
    def kappa(self) -> float:
        return (self.d - 1) * (self.d - 3) / 4

    def kappa_eff(self) -> float:
        pr, _ = self(np.array([self.r_inf]))
        return self.kappa - abs(pr[0]) ** (self.p - 1) * self.r_inf ** 2

    def __call__(self, r):
        """(P, P') at radii r; beyond R_inf the two far-field branches are summed."""
        r = np.asarray(r, dtype=float)
        flat = r.ravel()
        out = np.empty(flat.size, dtype=complex)
        dout = np.empty(flat.size, dtype=complex)
        small = flat < R_SEED
        if np.any(small):
            p0 = self.q0 * np.exp(1j * self.gauge)
            p2 = (self.energy - self.q0 ** (self.p - 1)) * p0 / self.d
            out[small] = p0 + 0.5 * p2 * flat[small] ** 2
            dout[small] = p2 * flat[small]
        mid = (~small) & (flat <= self.r_inf)
        if np.any(mid):
            y = self._sol(flat[mid])
            out[mid] = y[0] + 1j * y[1]
            dout[mid] = y[2] + 1j * y[3]
        far = flat > self.r_inf
        if np.any(far):
            if self.b == 0:
                raise DomainError("the b = 0 limit object has no far-field extension")
            kap = self.kappa_eff()
            h = (self.d - 1) / 2
            for i in np.flatnonzero(far):
                ri = flat[i]
                ua, dua = farfield.branch(self.b, self.energy, kap, 1, ri)
                ui, dui = farfield.branch(self.b, self.energy, kap, -1, ri)
                phi = self.c_adm * ua + self.c_inadm * ui
                dphi = self.c_adm * dua + self.c_inadm * dui
                out[i] = phi * ri ** -h
                dout[i] = (dphi - h / ri * phi) * ri ** -h
        return out.reshape(r.shape), dout.reshape(r.shape)

    def potentials(self, r):
        """W_1 = ((p+1)/2)|P|^{p-1} and G = ((p-1)/2)|P|^{p-3} P^2 (the rotated W_2)."""
        pr, _ = self(r)
        mod = np.abs(pr)
        w1 = 0.5 * (self.p + 1) * mod ** (self.p - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = 0.5 * (self.p - 1) * np.where(mod > 0, mod ** (self.p - 3) * pr ** 2, 0)
        return w1, g

    def w2(self, r):
        """W_{2,b} in the unrotated frame."""
        _, g = self.potentials(r)
        return np.exp(-0.5j * self.b * np.asarray(r) ** 2) * g

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        head = (f"# d={self.d} b={self.b:.17g} s_c={self.s_c:.17g} p={self.p:.17g} "
                f"varrho_b={self.varrho_b:.17g} theta_b={self.theta_b:.17g} "
                f"matching_residual={self.matching_residual:.17g} rtol={self.rtol:.17g}\n")
        with open(path, "w") as fh:
            fh.write(head)
            fh.write("r,re_p,im_p,re_dp,im_dp\n")
            for r, v, dv in zip(self.grid, self.p_b, self.dp_b):
                fh.write(f"{r:.17g},{v.real:.17g},{v.imag:.17g},{dv.real:.17g},{dv.imag:.17g}\n")


def read_profile_csv(path) -> dict:
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
    meta = {k: float(v) for k, v in (item.split("=") for item in header)}
    meta["d"] = int(meta["d"])
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    meta.update(r=data[:, 0], p_b=data[:, 1] + 1j * data[:, 2], dp_b=data[:, 3] + 1j * data[:, 4])
    return meta


def load_profile(path, n_grid: int | None = None) -> SelfSimilarProfile:
    """Rebuild a profile from its CSV by one outward integration from the stored P(0)."""
    m = read_profile_csv(path)
    p0 = m["p_b"][0]
    prof = _assemble(m["d"], m["b"], m["s_c"], abs(p0), float(np.angle(p0)), float(m["r"][-1]),
                     m["rtol"], n_grid or m["r"].size)
    prof.varrho_b, prof.theta_b = m["varrho_b"], m["theta_b"]
    return prof


def nonlinearity_exponent(d: int, s_c: float) -> float:
    return 1 + 4 / (d - 2 * s_c)


def s_b(b: float, r):
    """S_b(r) = int_{min(r, 2/b)}^{2/b} (1 - b^2 s^2/4)^{1/2} ds in closed form."""
    x = np.clip(0.5 * b * np.asarray(r, dtype=float), 0, 1)
    return (2 / b) * (np.pi / 4 - 0.5 * (x * np.sqrt(1 - x * x) + np.arcsin(x)))


def varrho_closed_form(kappa_q: float, b: float) -> float:
    return 2 ** (7 / 6) * np.sqrt(np.pi) * kappa_q * b ** -0.5 * np.exp(-np.pi / (2 * b))


def _rhs(d, b, s_c, p):
    e = 1 + 1j * b * s_c

    def f(r, y):
        pv = y[0] + 1j * y[1]
        dp = y[2] + 1j * y[3]
        dd = -(d - 1) / r * dp - (b * b * r * r / 4 - e) * pv - np.abs(pv) ** (p - 1) * pv
        return [dp.real, dp.imag, dd.real, dd.imag]

    return f


def _seed(d, b, s_c, p, q0, gauge):
    e = 1 + 1j * b * s_c
    p0 = q0 * np.exp(1j * gauge)
    p2 = (e - q0 ** (p - 1)) * p0 / d
    v, dv = p0 + 0.5 * p2 * R_SEED ** 2, p2 * R_SEED
    return [v.real, v.imag, dv.real, dv.imag]


def _integrate(d, b, s_c, q0, gauge, r_end, rtol, dense=False, events=None):
    p = nonlinearity_exponent(d, s_c)
    return solve_ivp(_rhs(d, b, s_c, p), (R_SEED, r_end), _seed(d, b, s_c, p, q0, gauge),
                     method="DOP853", rtol=rtol, atol=rtol * 1e-2, dense_output=dense,
                     events=events)


def _classify(d, b, s_c, q0, rtol) -> int:
    """Shooting side at fixed s_c: +1 if Q(0) is too large, -1 if too small."""

    def crosses(r, y):
        return y[0]

    crosses.terminal = True

    def turns(r, y):
        return y[2] if r > 10 * R_SEED else -1.0

    turns.terminal = True
    turns.direction = 1
    rc = 1.2 / b
    sol = _integrate(d, b, s_c, q0, 0.0, rc, rtol, events=(crosses, turns))
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    y = sol.y[:, -1]
    k = np.sqrt(1 - b * b * rc * rc / 4)
    h = (d - 1) / 2
    phi = rc ** h * y[0]
    dphi = rc ** h * (y[2] + h / rc * y[0])
    # sign of the growing WKB component at the classification radius
    return -int(np.sign(dphi + k * phi)) or 1


def _bisect_q0(d, b, s_c, q_guess, rtol) -> float:
    lo, hi = 0.8 * q_guess, 1.2 * q_guess
    if not (_classify(d, b, s_c, lo, rtol) < 0 < _classify(d, b, s_c, hi, rtol)):
        raise ConvergenceError(f"no Q(0) bracket in [{lo:.6g}, {hi:.6g}] at b={b}")
    while hi - lo > 1e-15 * hi:
        mid = 0.5 * (lo + hi)
        if _classify(d, b, s_c, mid, rtol) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def branch_coefficients(d, b, s_c, r, pv, dpv):
    """(c_adm, c_inadm) of phi = r^{(d-1)/2} P against the exact far-field pair."""
    p = nonlinearity_exponent(d, s_c)
    e = 1 + 1j * b * s_c
    h = (d - 1) / 2
    phi = r ** h * pv
    dphi = r ** h * (dpv + h / r * pv)
    kap = (d - 1) * (d - 3) / 4 - abs(pv) ** (p - 1) * r * r
    ua, dua = farfield.branch(b, e, kap, 1, r)
    ui, dui = farfield.branch(b, e, kap, -1, r)
    w = ua * dui - dua * ui
    return (phi * dui - dphi * ui) / w, (ua * dphi - dua * phi) / w


def _shoot(d, b, s_c, q0, gauge, r_inf, rtol):
    sol = _integrate(d, b, s_c, q0, gauge, r_inf, rtol)
    y = sol.y[:, -1]
    return branch_coefficients(d, b, s_c, r_inf, y[0] + 1j * y[1], y[2] + 1j * y[3])


def mass_integral(gs: GroundState) -> float:
    return float(simpson(gs.q ** 2 * gs.grid ** (gs.d - 1), x=gs.grid))


def initial_sc(gs: GroundState, b: float) -> float:
    """Leading-order s_c from the mass-flux balance of the profile equation."""
    return gs.kappa_q ** 2 / mass_integral(gs) / b * np.exp(-np.pi / b)


def solve_profile(d: int, b: float, gs: GroundState | None = None, r_inf: float | None = None,
                  rtol: float = 1e-12, gauge: float = 0.0, warm: "SelfSimilarProfile | None" = None,
                  n_grid: int = 4001, tol: float = 1e-10, max_iter: int = 40) -> SelfSimilarProfile:
    """Solve for (P(0), s_c) at fixed b.

    s_c is seeded from the flux balance (or rescaled from a neighbouring ``warm``
    profile), P(0) is bisected at that s_c, and a damped Newton iteration on the
    complex ratio c_inadm/c_adm then fixes both unknowns.
    """
    if not B_MIN <= b <= B_MAX:
        raise DomainError(f"b={b} outside the supported window [{B_MIN}, {B_MAX}]")
    r_inf = 6 / b if r_inf is None else r_inf
    if r_inf < 6 / b - 1e-12:
        raise DomainError(f"R_inf={r_inf:.4g} is too close to the turning point; use R_inf >= 6/b")
    if gs is None:
        gs = solve_ground_state(d, 1 + 4 / d)
    if warm is not None:
        s_c = warm.s_c * warm.b * np.exp(np.pi / warm.b) / b * np.exp(-np.pi / b)
        q_guess = warm.q0
    else:
        s_c = initial_sc(gs, b)
        q_guess = gs.q0
    q0 = _bisect_q0(d, b, s_c, q_guess, rtol)
    x = np.array([q0, s_c])

    def resid(x):
        ca, ci = _shoot(d, b, x[1], x[0], gauge, r_inf, rtol)
        return ci / ca

    f = resid(x)
    cond = np.nan
    for _ in range(max_iter):
        if abs(f) < tol:
            break
        jac = np.empty((2, 2))
        steps = (1e-10 * x[0], 1e-6 * x[1])
        for j in range(2):
            xp = x.copy()
            xp[j] += steps[j]
            dfj = (resid(xp) - f) / steps[j]
            jac[:, j] = dfj.real, dfj.imag
        cond = np.linalg.cond(jac)
        dx = np.linalg.solve(jac, [-f.real, -f.imag])
        lam = 1.0
        while lam >= 1e-3:
            xn = x + lam * dx
            if xn[1] > 0:
                fn = resid(xn)
                if abs(fn) < abs(f):
                    break
            lam /= 2
        else:
            break
        x, f = xn, fn
    if abs(f) > 1e-8:
        raise ConvergenceError(f"profile Newton stalled at |c_inadm/c_adm|={abs(f):.3e}, "
                               f"Jacobian condition {cond:.3e}")
    prof = _assemble(d, b, float(x[1]), float(x[0]), gauge, r_inf, rtol, n_grid)
    _fit_varrho(prof)
    return prof


def _assemble(d, b, s_c, q0, gauge, r_inf, rtol, n_grid) -> SelfSimilarProfile:
    sol = _integrate(d, b, s_c, q0, gauge, r_inf, rtol, dense=True)
    y = sol.y[:, -1]
    ca, ci = branch_coefficients(d, b, s_c, r_inf, y[0] + 1j * y[1], y[2] + 1j * y[3])
    prof = SelfSimilarProfile(d=d, b=b, s_c=s_c, p=nonlinearity_exponent(d, s_c), q0=q0,
                              gauge=gauge, r_inf=r_inf, grid=np.linspace(0, r_inf, n_grid),
                              p_b=np.empty(0, complex), dp_b=np.empty(0, complex), c_adm=ca,
                              c_inadm=ci, matching_residual=float(abs(ci / ca)), rtol=rtol,
                              _sol=sol.sol)
    prof.p_b, prof.dp_b = prof(prof.grid)
    return prof


def _psi1_over_adm(prof: SelfSimilarProfile, r: float) -> complex:
    se = wkb.SpectralEnergy(prof.b, prof.energy)
    psi1 = wkb.basis_arrays(se, [r])["psi"][0, 0]
    ua, _ = farfield.branch(prof.b, prof.energy, prof.kappa_eff(), 1, r)
    return psi1 / ua


def _fit_varrho(prof: SelfSimilarProfile) -> None:
    """rho_b e^{i pi/6 + i theta_b} = lim phi / (b^{1/3} psi_1), extrapolated in r^{-2}."""
    r1, r2 = prof.r_inf, 2 * prof.r_inf
    l1, l2 = _psi1_over_adm(prof, r1), _psi1_over_adm(prof, r2)
    lim = (l2 * r2 ** 2 - l1 * r1 ** 2) / (r2 ** 2 - r1 ** 2)
    amp = prof.c_adm / (prof.b ** (1 / 3) * lim)
    prof.varrho_b = float(abs(amp))
    prof.theta_b = float(np.angle(amp * np.exp(-1j * np.pi / 6) * np.exp(-1j * prof.gauge)))


def wkb_admissibility(prof: SelfSimilarProfile) -> float:
    """|psi_3 coefficient| / |psi_1 coefficient| of phi at R_inf in the WKB basis."""
    se = wkb.SpectralEnergy(prof.b, prof.energy)
    r = prof.r_inf
    d = wkb.basis_arrays(se, [r])
    pv, dpv = prof(np.array([r]))
    h = (prof.d - 1) / 2
    phi = r ** h * pv[0]
    dphi = r ** h * (dpv[0] + h / r * pv[0])
    (p1, _, p3, _), (dp1, _, dp3, _) = d["psi"][:, 0], d["dpsi"][:, 0]
    w13 = p1 * dp3 - dp1 * p3
    c3 = (p1 * dphi - dp1 * phi) / w13
    c1 = (phi * dp3 - dphi * p3) / w13
    return float(abs(c3 / c1))


def limit_profile(gs: GroundState) -> SelfSimilarProfile:
    """The b = 0 object: P = Q, real, with s_c = 0, sampled from the seam-free representation."""
    smooth = SmoothQ(gs)
    q, dq = smooth(gs.grid)
    prof = SelfSimilarProfile(d=gs.d, b=0.0, s_c=0.0, p=gs.p, q0=gs.q0, gauge=0.0, r_inf=gs.r_max,
                              grid=gs.grid.copy(), p_b=q.astype(complex), dp_b=dq.astype(complex),
                              matching_residual=0.0)

    def dense(r):
        q, dq = smooth(r)
        z = np.zeros_like(q)
        return np.array([q, z, dq, z])

    prof._sol = dense
    return prof


def profile_diagnostics(prof: SelfSimilarProfile, gs: GroundState | None = None) -> dict:
    """Asymptotic diagnostics; report only, nothing is asserted here."""
    if prof.b == 0:
        return {"b": 0.0, "max_imag": float(np.max(np.abs(prof.p_b.imag))),
                "max_imag_derivative": float(np.max(np.abs(prof.dp_b.imag)))}
    b, d = prof.b, prof.d
    if gs is None:
        gs = solve_ground_state(d, 1 + 4 / d)
    h = (d - 1) / 2
    out = {"b": b, "s_c": prof.s_c, "varrho_b": prof.varrho_b, "theta_b": prof.theta_b,
           "sc_scaled": prof.s_c * b * np.exp(np.pi / b),
           "varrho_ratio": prof.varrho_b / varrho_closed_form(gs.kappa_q, b),
           "matching_residual": prof.matching_residual,
           "wkb_admissibility": wkb_admissibility(prof),
           "q0_shift": (prof.q0 - gs.q0) / gs.q0}
    # interior closeness
    r_in = np.linspace(0, b ** -0.5, 200)
    pv, _ = prof(r_in)
    q, _ = gs(r_in)
    out["interior_closeness"] = float(np.max(np.abs(pv * np.exp(-1j * prof.gauge) - q) / q))
    # middle region against the real WKB pair at E = 1
    r_mid = np.linspace(2 * b ** -0.5, 2 / b, 200)[1:-1]
    r_mid = r_mid[np.abs(b * r_mid - 2) > b ** (2 / 3)]
    pv, _ = prof(r_mid)
    u = r_mid ** h * pv * np.exp(-1j * prof.gauge)
    bas = wkb.basis_arrays(wkb.SpectralEnergy(b, 1.0), r_mid)["psi"]
    amp = prof.varrho_b * b ** (1 / 3)
    for key, rot in (("gauge", 1.0), ("theta", np.exp(-1j * prof.theta_b))):
        out[f"ratio_im_psi2_{key}"] = (u * rot).imag / (amp * bas[1].real)
        out[f"ratio_re_psi4_{key}"] = (u * rot).real / (amp * bas[3].real)
    for k in list(out):
        if isinstance(out[k], np.ndarray):
            arr = out.pop(k)
            out[k + "_min"], out[k + "_max"] = float(arr.min()), float(arr.max())
    # modulus law on [b^{-1/2}, 1.5/b]
    r_ml = np.linspace(b ** -0.5, 1.5 / b, 300)
    pv, _ = prof(r_ml)
    law = (np.log(np.abs(pv) * r_ml ** h * b ** (1 / 6) * (b ** (-2 / 3) * np.abs(4 - b * b * r_ml ** 2)) ** 0.25)
           - (s_b(b, r_ml) - np.pi / (2 * b)))
    out["modulus_law_min"], out["modulus_law_max"] = float(law.min()), float(law.max())
    # far decay law on the last decade of the extension
    r_far = np.geomspace(prof.r_inf, 10 * prof.r_inf, 40)
    pv, _ = prof(r_far)
    decay = np.abs(pv) * r_far ** (d / 2 - prof.s_c) * b ** 0.5 * np.exp(np.pi / (2 * b))
    decay /= np.sqrt(2) * gs.kappa_q
    out["far_decay_min"], out["far_decay_max"] = float(decay.min()), float(decay.max())
    return out
