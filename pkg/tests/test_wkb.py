import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowupspec import profile, wkb
from blowupspec.errors import DomainError


def test_zeta_at_turning_point():
    z, zs = wkb.zeta_map(1.0)
    assert abs(z) == 0.0
    assert abs(zs - 2 ** (1 / 3)) <= 1e-14


def test_zeta_at_origin():
    z, _ = wkb.zeta_map(1e-12)
    assert abs(z + (3 * np.pi / 8) ** (2 / 3)) <= 1e-9


def test_zeta_matches_elementary_form():
    s = np.linspace(1.05, 5.0, 50)
    z, _ = wkb.zeta_map(s)
    assert np.abs(2 / 3 * z.real ** 1.5 - wkb.zeta_low_closed_form(s)).max() <= 1e-12


@pytest.mark.parametrize("b", [0.25, 0.3, 0.35])
def test_turning_point_real_energy(b):
    assert wkb.turning_data(wkb.SpectralEnergy(b, 1.0)).r_star == pytest.approx(2 / b, abs=1e-12)


def test_eta_real_part_is_minus_s_b():
    b = 0.3
    se = wkb.SpectralEnergy(b, 1.0)
    r = np.linspace(0.2, 2 / b, 80)
    assert np.abs(wkb.eta(se, r).real + profile.s_b(b, r)).max() <= 1e-8


def test_turning_point_complex_energy():
    b = 0.3
    e = 1 + 0.1j * b
    rs = wkb.turning_data(wkb.SpectralEnergy(b, e)).r_star
    assert abs(rs - 2 * np.sqrt(e.real) / b) <= abs(e.imag) / b


def test_psi4_small_r_normalization():
    b = 0.3
    r = b ** -0.5
    ev = wkb.wkb_basis(wkb.SpectralEnergy(b, 1.0), r)
    assert abs(ev.kappa_minus * ev.psi[3] / np.exp(-r) - 1) <= 3 * np.sqrt(b)


def test_psi3_far_amplitude():
    b = 0.3
    se = wkb.SpectralEnergy(b, 1.0)
    r = 3 / b
    ev = wkb.wkb_basis(se, r)
    s = b * r / 2
    lead = abs(np.exp(ev.eta)) / (2 * np.sqrt(np.pi) * abs(se.mu43) ** 0.25 * (s * s - 1) ** 0.25)
    assert abs(abs(ev.psi[2]) / lead - 1) <= 10 / abs(ev.eta)


@pytest.mark.parametrize("b", [0.25, 0.35])
@pytest.mark.parametrize("nu", [None, 1.0, 3.0, 10.0, 30.0])
def test_contract(b, nu):
    for energy in (1.0, 1 + 0.3j * b):
        out = wkb.contract_check(b, nu, energy)
        assert out["fd_residual"] <= 1e-5
        assert out["connection_residual"] <= 1e-9
        assert out["wronskian_residual"] <= 1e-8
        if "reality_residual" in out:
            assert out["reality_residual"] <= 1e-10


def test_wronskian_values():
    se = wkb.SpectralEnergy(0.3, 1.0)
    assert wkb.wronskian_42(se) == pytest.approx(0.3 ** (1 / 3) / (2 ** (4 / 3) * np.pi), rel=1e-15)
    assert wkb.wronskian_13(se) == -1j * wkb.wronskian_42(se)


@pytest.mark.parametrize("kw", [dict(b=0.0, e=1.0), dict(b=0.3, e=2.0), dict(b=0.3, e=1.0, nu=0.5)])
def test_rejects_bad_energy(kw):
    with pytest.raises(DomainError):
        wkb.SpectralEnergy(**kw)


@settings(max_examples=60, deadline=None)
@given(b=st.floats(0.2, 0.45), x=st.floats(0.1, 3.0), im=st.floats(-0.5, 0.5))
def test_psi4_connection_property(b, x, im):
    """2 psi_4 = e^{i pi/6} psi_1 + e^{-i pi/6} psi_3 anywhere on the ray."""
    se = wkb.SpectralEnergy(b, 1 + 1j * im * b)
    r = x / b
    p = wkb.basis_arrays(se, [r])["psi"][:, 0]
    res = 2 * p[3] - np.exp(1j * np.pi / 6) * p[0] - np.exp(-1j * np.pi / 6) * p[2]
    assert abs(res) <= 1e-9 * np.abs(p).max()
