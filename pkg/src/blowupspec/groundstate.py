"""Positive radial ground state of  Q'' + (d-1)/r Q' - Q + Q^p = 0."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import ive, kve

from .errors import ConvergenceError, DomainError

R_SEED = 1e-4


@dataclass
class GroundState:
    d: int
    p: float
    grid: np.ndarray
    q: np.ndarray
    q_prime: np.ndarray
    kappa_q: float
    c_q: float
    q0: float
    r_match: float = 4.0
    _inner: object = field(default=None, repr=False)
    _outer: object = field(default=None, repr=False)

    @property
    def r_max(self) -> float:
        return float(self.grid[-1])

    def __call__(self, r):
        """Return (Q, Q') at arbitrary radii, zero-padded past the tail model."""
        r = np.asarray(r, dtype=float)
        out_q = np.empty_like(r)
        out_dq = np.empty_like(r)
        flat = r.ravel()
        oq, odq = out_q.ravel(), out_dq.ravel()
        small = flat < R_SEED
        if np.any(small):
            q2 = (self.q0 - self.q0 ** self.p) / self.d
            oq[small] = self.q0 + 0.5 * q2 * flat[small] ** 2
            odq[small] = q2 * flat[small]
        mid = (~small) & (flat <= self.r_match)
        if np.any(mid):
            y = self._inner(flat[mid])
            oq[mid], odq[mid] = y[0], y[1]
        far = flat > self.r_match
        if np.any(far):
            inside = far & (flat <= self.r_max)
            if np.any(inside):
                y = self._outer(flat[inside])
                oq[inside], odq[inside] = y[0], y[1]
            beyond = far & (flat > self.r_max)
            if np.any(beyond):
                # linear tail; the nonlinear term is below roundoff out here
                scale = self.q[-1] / _decaying(self.d, self.r_max)[0]
                kt, dkt = _decaying(self.d, flat[beyond])
                oq[beyond], odq[beyond] = scale * kt, scale * dkt
        return out_q, out_dq

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(f"# d={self.d} p={self.p:.17g} kappa_q={self.kappa_q:.17g} c_q={self.c_q:.17g}\n")
            fh.write("r,q,q_prime\n")
            for row in zip(self.grid, self.q, self.q_prime):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


class SmoothQ:
    """Q re-integrated inward in one leg from the tail, so samples carry no matching seam."""

    def __init__(self, gs: GroundState):
        self.d, self.p, self.q0, self.r_max = gs.d, gs.p, gs.q0, gs.r_max
        self._gs = gs
        d, p = gs.d, gs.p
        q_end, dq_end = gs(np.array([gs.r_max]))

        def rhs(r, y):
            acc = y[0] - abs(y[0]) ** (p - 1) * y[0]
            if d > 1:
                acc -= (d - 1) / r * y[1]
            return [y[1], acc]

        self.lo = 0.0 if d == 1 else R_SEED
        sol = solve_ivp(rhs, (gs.r_max, self.lo), [q_end[0], dq_end[0]], method="DOP853", rtol=1e-13,
                        atol=1e-300, dense_output=True)
        if not sol.success:
            raise ConvergenceError(sol.message)
        self._sol = sol.sol

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        y = self._sol(np.clip(r, self.lo, self.r_max))
        q, dq = np.array(y[0]), np.array(y[1])
        small = r < self.lo
        if np.any(small):
            q[small], dq[small] = self._gs(r[small])
        return q, dq


def read_ground_state_csv(path) -> dict:
    """Parse a ground-state CSV into header values and column arrays."""
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
    meta = {k: float(v) for k, v in (item.split("=") for item in header)}
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    meta["d"] = int(meta["d"])
    return {**meta, "r": data[:, 0], "q": data[:, 1], "q_prime": data[:, 2]}


def _decaying(d, r):
    """r^{-nu} K_nu(r), nu = (d-2)/2, and its derivative."""
    nu = (d - 2) / 2
    r = np.asarray(r, dtype=float)
    e = np.exp(-r)
    k = r ** (-nu) * kve(nu, r) * e
    dk = -(r ** (-nu)) * kve(nu + 1, r) * e
    return k, dk


def _rhs(d, p):
    def f(r, y):
        q, dq = y
        return [dq, -(d - 1) / r * dq + q - np.abs(q) ** (p - 1) * q]
    return f


def _seed(d, p, q0):
    q2 = (q0 - q0 ** p) / d
    return [q0 + 0.5 * q2 * R_SEED ** 2, q2 * R_SEED]


def _classify(d, p, q0, r_end, rtol):
    """+1 if the trajectory crosses zero (Q(0) too large), -1 if it turns up, 0 otherwise."""

    def crosses(r, y):
        return y[0]

    crosses.terminal = True

    def turns(r, y):
        return y[1] if r > 10 * R_SEED else -1.0

    turns.terminal = True
    turns.direction = 1
    sol = solve_ivp(_rhs(d, p), (R_SEED, r_end), _seed(d, p, q0), method="DOP853",
                    rtol=rtol, atol=1e-14, events=(crosses, turns))
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    return 0


def _bracket(d, p, rtol):
    lo, hi = 1.0, 1.5
    while _classify(d, p, lo, 25.0, rtol) != -1:
        lo *= 0.5
        if lo < 1e-6:
            raise ConvergenceError(f"no shooting bracket below Q(0)={lo}")
    while _classify(d, p, hi, 25.0, rtol) != 1:
        hi *= 1.5
        if hi > 1e6:
            raise ConvergenceError(f"no shooting bracket in Q(0) in [{lo}, {hi}]")
    return lo, hi


def _bisect(d, p, rtol):
    lo, hi = _bracket(d, p, rtol)
    # coarse bracket only; the matching Newton step supplies the last digits
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        c = _classify(d, p, mid, 25.0, rtol)
        if c == 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def solve_ground_state(d: int, p: float, tol: float = 1e-10, r_max: float = 30.0,
                       r_match: float = 4.0, max_step: float = np.inf,
                       n_grid: int = 3001) -> GroundState:
    """Shoot on Q(0), then refine by matching outward and inward solutions.

    The outward leg starts from a Taylor seed at r = 1e-4.  The inward leg starts
    at r_max on the decaying Bessel tail.  A 2x2 Newton iteration on (Q(0), tail
    amplitude) matches value and slope at r_match, where both legs are stable.
    """
    if d < 1 or p <= 1:
        raise DomainError("need d >= 1 and p > 1")
    if d >= 3 and p >= (d + 2) / (d - 2):
        raise DomainError(f"p={p} is not energy subcritical in d={d}")
    if not 1e-12 <= tol <= 1e-6:
        raise DomainError("tol must lie in [1e-12, 1e-6]")
    if r_max < 25:
        raise DomainError("r_max must be at least 25 for a stable tail fit")
    rtol = min(tol, 1e-11)
    fwd = _rhs(d, p)
    opts = dict(method="DOP853", rtol=rtol, atol=1e-40, max_step=max_step)

    def outward(q0):
        return solve_ivp(fwd, (R_SEED, r_match), _seed(d, p, q0), dense_output=True, **opts)

    def inward(amp):
        k, dk = _decaying(d, r_max)
        return solve_ivp(fwd, (r_max, r_match), [amp * k, amp * dk], dense_output=True, **opts)

    def mismatch(x):
        a, b = outward(x[0]), inward(x[1])
        return np.array([a.y[0, -1] - b.y[0, -1], a.y[1, -1] - b.y[1, -1]]), a, b

    q0 = _bisect(d, p, rtol)
    a = outward(q0)
    k, dk = _decaying(d, r_match)
    amp = a.y[0, -1] / k
    x = np.array([q0, amp])
    f, a, b = mismatch(x)
    for _ in range(12):
        jac = np.empty((2, 2))
        for j in range(2):
            step = 1e-7 * max(abs(x[j]), 1e-8)
            xp = x.copy()
            xp[j] += step
            jac[:, j] = (mismatch(xp)[0] - f) / step
        dx = np.linalg.solve(jac, -f)
        x = x + dx
        f, a, b = mismatch(x)
        if np.all(np.abs(dx) <= 1e-12 * np.abs(x)):
            break
    else:
        raise ConvergenceError(f"ground-state matching did not converge, residual {np.abs(f).max():.3e}")
    f, a, b = mismatch(x)
    grid = np.linspace(0.0, r_max, n_grid)
    gs = GroundState(d=d, p=p, grid=grid, q=np.empty(0), q_prime=np.empty(0), kappa_q=np.nan,
                     c_q=np.nan, q0=float(x[0]), r_match=r_match, _inner=a.sol, _outer=b.sol)
    gs.q, gs.q_prime = gs(grid)
    if np.any(gs.q <= 0) or np.any(np.diff(gs.q) >= 0):
        raise ConvergenceError("ground state is not positive and decreasing")
    gs.kappa_q, gs.c_q = fit_decay_constants(gs, (r_max / 2, r_max))
    return gs


def fit_decay_constants(gs: GroundState, window) -> tuple[float, float]:
    """Least-squares fit of log(r^{(d-1)/2} Q e^r) against {1, 1/r}."""
    lo, hi = window
    if lo < gs.r_max / 2 - 1e-12 or hi > gs.r_max + 1e-12:
        raise DomainError("fit window must lie in [R_Q/2, R_Q]")
    mask = (gs.grid >= lo) & (gs.grid <= hi)
    if mask.sum() < 20:
        raise DomainError("fit window holds fewer than 20 nodes")
    r, q = gs.grid[mask], gs.q[mask]
    if np.any(q <= 1e-300):
        raise DomainError("ground state underflows in fit window")
    y = np.log(r ** ((gs.d - 1) / 2) * q) + r
    design = np.column_stack([np.ones_like(r), 1 / r])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    kappa = float(np.exp(coef[0]))
    # log(1 + c/r) ~ c/r, so the slope is c_Q to leading order
    return kappa, float(coef[1])
