"""The radial spectral system (H_{b,nu} - lambda) Phi = 0 and its fundamental frames.

In first-order form Y = (Phi^1, Phi^2, Phi^1', Phi^2') solves Y' = [[0, I], [M, 0]] Y with

    M = [[E_+ - b^2 r^2/4 + kappa/r^2 - W_1, -G], [-conj(G), E_- - b^2 r^2/4 + kappa/r^2 - W_1]],

E_+- = 1 +- (lambda + i b s_c), kappa = nu^2 - 1/4 and G = ((p-1)/2)|P|^{p-3} P^2.  M depends
on lambda only through lambda diag(1, -1), so potentials are sampled once per grid and the
propagator runs batched over lambda.  The matrix is trace free, so 4x4 Wronskians of joint
solutions are independent of r.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import farfield, specfun
from .errors import DomainError
from .kernels import propagate
from .profile import SelfSimilarProfile

C_INTERIOR = 0.02
H_MAX = 0.01
C_EXTERIOR = 0.01
NU_BIG = 8


def nu_of(l: int, d: int) -> float:
    return l + (d - 2) / 2


def x_star_rule(b: float, nu: float = 0.0) -> float:
    """Matching radius: max(10, 10 ln(1/b)) for low classes, b^{-1/2} for high ones."""
    if b == 0:
        return 10.0
    if nu >= NU_BIG:
        return b ** -0.5
    return max(10.0, 10 * np.log(1 / b))


def r_exterior(b: float, x_star: float) -> float:
    if b == 0:
        return x_star + 15.0
    return max(6 / b, x_star + 10)


@dataclass
class SpectralSystem:
    prof: SelfSimilarProfile
    nu: float
    delta: float = 1.2
    n_im: float = 10.0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def b(self) -> float:
        return self.prof.b

    @property
    def d(self) -> int:
        return self.prof.d

    @property
    def kappa(self) -> float:
        return self.nu ** 2 - 0.25

    def energies(self, lam):
        lam = np.asarray(lam, dtype=complex)
        shift = 1j * self.b * self.prof.s_c
        return 1 + lam + shift, 1 - lam - shift

    def check_lambda(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        bad = np.abs(lam) >= self.delta
        if self.b > 0:
            bad |= lam.imag >= self.b * self.n_im
        if np.any(bad):
            raise DomainError(f"lambda={lam[bad][0]} outside Omega(delta={self.delta}, N={self.n_im})")
        return lam

    def m0(self, r) -> np.ndarray:
        """M at lambda = 0, shape (n, 2, 2)."""
        r = np.asarray(r, dtype=float)
        w1, g = self.prof.potentials(r)
        e0 = 1 + 1j * self.b * self.prof.s_c
        diag = -self.b ** 2 * r ** 2 / 4 + self.kappa / r ** 2 - w1
        m = np.empty((r.size, 2, 2), dtype=complex)
        m[:, 0, 0] = e0 + diag
        m[:, 1, 1] = np.conj(e0) + diag
        m[:, 0, 1] = -g
        m[:, 1, 0] = -np.conj(g)
        return m

    def residual(self, r, phi, d2phi, lam) -> np.ndarray:
        """Phi'' - M Phi for sampled Phi (shape (n, 2)) and its second derivative."""
        m = self.m0(r)
        m[:, 0, 0] += lam
        m[:, 1, 1] -= lam
        return d2phi - np.einsum("nij,nj->ni", m, phi)

    def sampled(self, r):
        """Cached potentials at grid nodes and midpoints."""
        key = (r.size, float(r[0]), float(r[-1]))
        if key not in self._cache:
            mid = 0.5 * (r[1:] + r[:-1])
            self._cache[key] = (self.m0(r), self.m0(mid))
        return self._cache[key]


def assemble_system(prof: SelfSimilarProfile, nu: float, lam=None, delta: float | None = None,
                    n_im: float = 10.0) -> SpectralSystem:
    if prof.d == 1:
        if nu not in (-0.5, 0.5) and (nu + 0.5) % 1:
            raise DomainError(f"nu={nu} is not a spherical index for d=1")
    elif (nu - (prof.d - 2) / 2) % 1 or nu < (prof.d - 2) / 2:
        raise DomainError(f"nu={nu} is not a spherical index for d={prof.d}")
    if delta is None:
        delta = 0.9 if prof.b == 0 else 1.2
    sys = SpectralSystem(prof=prof, nu=nu, delta=delta, n_im=n_im)
    if lam is not None:
        sys.check_lambda(lam)
    return sys


def interior_grid(nu: float, r_seed: float, x_star: float) -> tuple[np.ndarray, int]:
    """Nodes from r_seed to x_star with x_star/2 as an exact node; returns (r, index of x*/2)."""

    def march(a, b):
        out = [a]
        while out[-1] < b:
            h = min(C_INTERIOR * out[-1] / (abs(nu) + 1), H_MAX)
            out.append(min(out[-1] + h, b))
        return out

    first = march(r_seed, x_star / 2)
    second = march(x_star / 2, x_star)
    return np.array(first + second[1:]), len(first) - 1


def exterior_grid(sys: SpectralSystem, r_inf: float, x_star: float) -> tuple[np.ndarray, int]:
    """Decreasing nodes from r_inf to x_star/2, step ~ C / local wave number; index of x*."""
    b, kap = sys.b, abs(sys.kappa)

    def step(r):
        k2 = abs(b * b * r * r / 4 - 1) + kap / (r * r)
        return C_EXTERIOR / np.sqrt(1 + k2)

    def march(a, c):
        out = [a]
        while out[-1] > c:
            out.append(max(out[-1] - step(out[-1]), c))
        return out

    first = march(r_inf, x_star)
    second = march(x_star, x_star / 2)
    return np.array(first + second[1:]), len(first) - 1


def _seed_radius(nu: float) -> float:
    return 1e-5 / max(1.0, abs(nu))


def interior_seeds(sys: SpectralSystem, lam, r_seed: float, singular: bool = False) -> np.ndarray:
    """Frobenius seeds r^{nu+1/2}(e_j + U_j r^2), U_j = M~(0) e_j / (4(nu+1)), shape (L, 4, k)."""
    lam = np.atleast_1d(lam)
    nu = sys.nu
    m_at0 = sys.m0(np.array([r_seed]))[0] - sys.kappa / r_seed ** 2 * np.eye(2)
    ncol = 4 if singular else 2
    y = np.zeros((lam.size, 4, ncol), dtype=complex)
    for j in range(2):
        mt = np.broadcast_to(m_at0, (lam.size, 2, 2)).copy()
        mt[:, 0, 0] += lam
        mt[:, 1, 1] -= lam
        e = np.zeros(2)
        e[j] = 1
        u2 = (mt @ e) / (4 * (nu + 1))
        m = nu + 0.5
        # first neglected term, measured in the derivative channel that excites the singular branch
        est = np.abs(mt @ u2[:, :, None]).max() * (m + 4) * r_seed ** 3 / (4 * (2 * m + 3))
        if est > 1e-9:
            raise DomainError(f"seed radius {r_seed:g} too large (truncation estimate {est:.2e})")
        y[:, :2, j] = r_seed ** m * (e + u2 * r_seed ** 2)
        y[:, 2:, j] = m * r_seed ** (m - 1) * e + (m + 2) * r_seed ** (m + 1) * u2
    if singular:
        if abs(nu) != 0.5:
            raise DomainError("singular interior branches are built only for |nu| = 1/2")
        for j in range(2):
            e = np.zeros(2)
            e[j] = 1
            if nu == 0.5:
                # (1 - r) e_j to leading order; second-order term from Phi'' = M~ Phi
                mt = np.broadcast_to(m_at0, (lam.size, 2, 2)).copy()
                mt[:, 0, 0] += lam
                mt[:, 1, 1] -= lam
                acc = mt @ e
                y[:, :2, 2 + j] = e * (1 - r_seed) + 0.5 * acc * r_seed ** 2
                y[:, 2:, 2 + j] = -e + acc * r_seed
            else:
                mt = np.broadcast_to(m_at0, (lam.size, 2, 2)).copy()
                mt[:, 0, 0] += lam
                mt[:, 1, 1] -= lam
                acc = mt @ e
                y[:, :2, 2 + j] = e * r_seed + acc * r_seed ** 3 / 6
                y[:, 2:, 2 + j] = e + acc * r_seed ** 2 / 2
    return y


def interior_basis(sys: SpectralSystem, lam, x_star: float, r_seed: float | None = None,
                   singular: bool = False) -> dict:
    """Psi frames at x*/2 and x*: arrays of shape (L, 4, k) under keys 'half' and 'star'."""
    lam = sys.check_lambda(lam)
    r_seed = _seed_radius(sys.nu) if r_seed is None else r_seed
    if r_seed > 1e-2 * min(1.0, 1 / max(abs(sys.nu), 1e-12)):
        raise DomainError("r_seed must not exceed 1e-2 min(1, 1/nu)")
    r, i_half = interior_grid(sys.nu, r_seed, x_star)
    mn, mm = sys.sampled(r)
    y0 = interior_seeds(sys, lam, r_seed, singular)
    out = propagate(r, mn, mm, lam, y0, np.array([i_half, r.size - 1]))
    return {"half": out[0], "star": out[1], "x_star": x_star}


def exterior_seeds(sys: SpectralSystem, lam, r_inf: float, inadmissible: bool = False) -> np.ndarray:
    lam = np.atleast_1d(lam)
    ep, em = sys.energies(lam)
    ncol = 4 if inadmissible else 2
    y = np.zeros((lam.size, 4, ncol), dtype=complex)
    if sys.b == 0:
        nu = abs(sys.nu)
        for i in range(lam.size):
            for col, (e, comp) in enumerate(((ep[i], 0), (em[i], 1))):
                v, dv = specfun.tilde_k(nu, e, r_inf)
                scale = np.exp(np.sqrt(e) * r_inf)
                y[i, comp, col], y[i, comp + 2, col] = v * scale, dv * scale
            if inadmissible:
                for col, (e, comp) in enumerate(((ep[i], 0), (em[i], 1))):
                    v, dv = specfun.tilde_i(nu, e, r_inf)
                    scale = np.exp(-np.sqrt(e) * r_inf)
                    y[i, comp, 2 + col], y[i, comp + 2, 2 + col] = v * scale, dv * scale
        return y
    w1, _ = sys.prof.potentials(np.array([r_inf]))
    kap = sys.kappa - w1[0] * r_inf ** 2
    for i in range(lam.size):
        branches = [(ep[i], 1, 0), (em[i], -1, 1)]
        if inadmissible:
            branches += [(ep[i], -1, 0), (em[i], 1, 1)]
        for col, (e, sgn, comp) in enumerate(branches):
            v, dv = farfield.branch(sys.b, e, kap, sgn, r_inf)
            y[i, comp, col], y[i, comp + 2, col] = v, dv
    return y


def exterior_basis(sys: SpectralSystem, lam, x_star: float, r_inf: float | None = None,
                   inadmissible: bool = False) -> dict:
    """Phi frames at x* and x*/2 from inward integration of far-field seeds."""
    lam = sys.check_lambda(lam)
    r_inf = r_exterior(sys.b, x_star) if r_inf is None else r_inf
    if sys.b > 0 and r_inf < max(6 / sys.b, x_star + 10) - 1e-9:
        raise DomainError("r_inf must be at least max(6/b, x* + 10)")
    r, i_star = exterior_grid(sys, r_inf, x_star)
    mn, mm = sys.sampled(r)
    y0 = exterior_seeds(sys, lam, r_inf, inadmissible)
    out = propagate(r, mn, mm, lam, y0, np.array([i_star, r.size - 1]))
    return {"star": out[0], "half": out[1], "x_star": x_star, "r_inf": r_inf}


@dataclass
class FundamentalSet:
    x_star: float
    lam: np.ndarray
    interior: dict
    exterior: dict

    def matrix(self, where: str = "star") -> np.ndarray:
        """Stacked (L, 4, 4) frame matrix [Psi_1, Psi_2, Phi_1, Phi_2]."""
        return np.concatenate([self.interior[where][:, :, :2], self.exterior[where][:, :, :2]], axis=2)


def fundamental_set(sys: SpectralSystem, lam, x_star: float | None = None,
                    r_inf: float | None = None) -> FundamentalSet:
    x_star = x_star_rule(sys.b, sys.nu) if x_star is None else x_star
    lam = sys.check_lambda(lam)
    return FundamentalSet(x_star=x_star, lam=lam, interior=interior_basis(sys, lam, x_star),
                          exterior=exterior_basis(sys, lam, x_star, r_inf))


def subspace_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Smallest principal angle between the column spans of two 4 x 2 frames."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.conj().T @ qb, compute_uv=False)
    return float(np.arccos(np.clip(s.max(), -1, 1)))


def symmetry_modes(prof: SelfSimilarProfile, r) -> dict:
    """Rotated radial frames of the symmetry-generated modes, keyed by (nu sign, eigenvalue).

    Lambda = d/2 - s_c + r d/dr is the scaling generator; P = e^{i b r^2/4} Q_b is undone
    component-wise, so every mode here is an exact solution of the radial system.
    """
    r = np.asarray(r, dtype=float)
    b, d = prof.b, prof.d
    p, dp = prof(r)
    w = r ** ((d - 1) / 2)
    lam_p = (d / 2 - prof.s_c) * p + r * dp - 0.5j * b * r * r * p
    grad = dp - 0.5j * b * r * p

    def pair(first):
        return np.stack([w * first, w * np.conj(first)], axis=-1)

    gauge = np.stack([1j * w * p, -1j * w * np.conj(p)], axis=-1)
    return {"gauge": (0j, gauge),
            "scaling": (-2j * b, gauge + b * pair(lam_p)),
            "translation": (-1j * b, pair(grad))}
