import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowupspec import odesys, profile, specfun
from blowupspec.errors import DomainError


def _fd_residual(sys, prof, key, r):
    step = 1e-3
    frames = [odesys.symmetry_modes(prof, r + k * step)[key][1] for k in (-2, -1, 0, 1, 2)]
    lam = odesys.symmetry_modes(prof, r)[key][0]
    d2 = (-frames[0] + 16 * frames[1] - 30 * frames[2] + 16 * frames[3] - frames[4]) / (12 * step ** 2)
    return np.abs(sys.residual(r, frames[2], d2, lam)).max() / np.abs(d2).max()


def _col_angle(u, v):
    c = abs(np.vdot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(min(c, 1.0)))


@pytest.mark.parametrize("d", [1, 2])
def test_gauge_mode_flat(d, gs1, gs2):
    prof = profile.limit_profile(gs1 if d == 1 else gs2)
    sys = odesys.assemble_system(prof, d / 2 - 1)
    assert _fd_residual(sys, prof, "gauge", np.linspace(0.5, 10, 300)) <= 1e-7


@pytest.mark.parametrize("key,tol", [("gauge", 1e-6), ("scaling", 1e-6)])
def test_symmetry_modes_b(sweep_d1, key, tol):
    prof = sweep_d1[0][0.3]
    sys = odesys.assemble_system(prof, -0.5)
    assert _fd_residual(sys, prof, key, np.linspace(0.5, 10, 300)) <= tol


def test_translation_mode_b(sweep_d1):
    prof = sweep_d1[0][0.3]
    sys = odesys.assemble_system(prof, 0.5)
    assert _fd_residual(sys, prof, "translation", np.linspace(0.5, 10, 300)) <= 1e-6


def test_singular_branch_near_origin(sweep_d1):
    sys = odesys.assemble_system(sweep_d1[0][0.3], 0.5)
    out = odesys.interior_basis(sys, [0.05j], 2e-3, singular=True)
    r = 1e-3
    psi3 = out["half"][0, :, 2]
    expect = np.array([1 - r, 0, -1, 0])
    # value error O(r^2), derivative error O(r)
    assert np.abs(psi3 - expect)[:2].max() <= 20 * r * r
    assert np.abs(psi3 - expect)[2:].max() <= 20 * r


def test_high_class_interior_direction(gs2):
    sys = odesys.assemble_system(profile.limit_profile(gs2), 10.0)
    col = odesys.interior_basis(sys, [0j], 5.0)["star"][0, :, 0]
    v, dv = specfun.tilde_i(10.0, 1.0, 5.0)
    assert _col_angle(col, np.array([v, 0, dv, 0])) <= 0.2


@pytest.mark.parametrize("b", [0.0, 0.3])
def test_liouville(b, sweep_d1, gs1):
    prof = profile.limit_profile(gs1) if b == 0 else sweep_d1[0][b]
    sys = odesys.assemble_system(prof, 0.5)
    lam = np.array([0.05 + 0.02j, -0.1j])
    out = odesys.interior_basis(sys, lam, 8.0, singular=True)
    d_half, d_star = np.linalg.det(out["half"]), np.linalg.det(out["star"])
    assert np.all(np.abs(d_half / d_star - 1) <= 1e-8)


def test_flat_pair_wronskian(gs1):
    """At b = 0 the potential matrix is symmetric, so u.v' - u'.v is conserved; it vanishes
    for two origin-regular solutions."""
    sys = odesys.assemble_system(profile.limit_profile(gs1), -0.5)
    out = odesys.interior_basis(sys, [0.1 + 0.05j], 8.0)

    def w(f):
        u, v = f[0, :, 0], f[0, :, 1]
        return abs(u[:2] @ v[2:] - u[2:] @ v[:2]) / (np.linalg.norm(u) * np.linalg.norm(v))

    assert w(out["half"]) <= 1e-8 and w(out["star"]) <= 1e-8


def test_flat_exterior_decay(gs1):
    sys = odesys.assemble_system(profile.limit_profile(gs1), -0.5)
    col = odesys.exterior_basis(sys, [0.1], 15.0, r_inf=30.0)["star"][0, :, 0]
    k = np.sqrt(1.1)
    assert abs(col[1] / col[0]) <= 0.01
    assert abs(col[2] / col[0] + k) <= 0.01 * k


def test_gauge_mode_in_exterior_span(sweep_d1):
    prof = sweep_d1[0][0.3]
    sys = odesys.assemble_system(prof, -0.5)
    x_star = odesys.x_star_rule(0.3)
    phi = odesys.exterior_basis(sys, [0j], x_star)["star"][0, :, :2]
    step = 1e-4
    f = [odesys.symmetry_modes(prof, np.array([x_star + s]))["gauge"][1][0] for s in (-step, 0, step)]
    mode = np.concatenate([f[1], (f[2] - f[0]) / (2 * step)])
    coef, *_ = np.linalg.lstsq(phi, mode, rcond=None)
    assert np.linalg.norm(phi @ coef - mode) / np.linalg.norm(mode) <= 1e-5


def test_exterior_seed_independence(sweep_d1):
    prof = sweep_d1[0][0.3]
    sys = odesys.assemble_system(prof, -0.5)
    lam = [0.03 + 0.1j]
    x_star = odesys.x_star_rule(0.3)
    r_inf = odesys.r_exterior(0.3, x_star)
    a = odesys.exterior_basis(sys, lam, x_star, r_inf)["star"][0]
    b = odesys.exterior_basis(sys, lam, x_star, r_inf + 5 / 0.3)["star"][0]
    for j in range(2):
        assert _col_angle(a[:, j], b[:, j]) <= 1e-6


def test_rejects_bad_index_and_lambda(gs1, sweep_d1):
    with pytest.raises(DomainError):
        odesys.assemble_system(profile.limit_profile(gs1), 1.0)
    sys = odesys.assemble_system(sweep_d1[0][0.3], -0.5)
    with pytest.raises(DomainError):
        sys.check_lambda(2.0)
    with pytest.raises(DomainError):
        sys.check_lambda(0.5j * 10)


@settings(max_examples=15, deadline=None)
@given(re=st.floats(-0.3, 0.3), im=st.floats(-0.9, 0.9))
def test_liouville_property(sweep_d1, re, im):
    sys = odesys.assemble_system(sweep_d1[0][0.35], -0.5)
    out = odesys.interior_basis(sys, [complex(re, im)], 6.0, singular=True)
    assert abs(np.linalg.det(out["half"][0]) / np.linalg.det(out["star"][0]) - 1) <= 1e-8
