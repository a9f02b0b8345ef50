import numpy as np
import pytest

from blowupspec import profile
from blowupspec.errors import DomainError

from conftest import SWEEP


def test_matching_residual(sweep_d1):
    profs, _ = sweep_d1
    assert all(profs[b].matching_residual <= 1e-8 for b in SWEEP)


def test_center_close_to_ground_state(sweep_d1, gs1):
    prof = sweep_d1[0][0.25]
    assert abs(prof.q0 - gs1.q0) <= 2 * 0.25 ** (1 / 6) * gs1.q0


def test_sc_law(sweep_d1):
    profs, _ = sweep_d1
    scaled = [profs[b].s_c * b * np.exp(np.pi / b) for b in SWEEP]
    assert max(scaled) / min(scaled) <= 3


def test_sc_self_convergence(sweep_d1, gs1):
    ref = sweep_d1[0][0.35]
    half = profile.solve_profile(1, 0.35, gs=gs1, rtol=0.5 * ref.rtol)
    assert abs(half.s_c / ref.s_c - 1) <= 5e-7


def test_varrho_ratio_trend(sweep_d1, gs1):
    profs, _ = sweep_d1
    ratios = [profs[b].varrho_b / profile.varrho_closed_form(gs1.kappa_q, b) for b in SWEEP]
    assert 0.5 <= ratios[SWEEP.index(0.3)] <= 2
    gaps = [abs(x - 1) for x in ratios]
    assert all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("b", [0.3, 0.35])
def test_theta_small(sweep_d1, b):
    assert abs(sweep_d1[0][b].theta_b) <= 10 * b


def test_limit_object_is_real(gs1):
    diag = profile.profile_diagnostics(profile.limit_profile(gs1))
    assert diag["max_imag"] == 0.0 and diag["max_imag_derivative"] == 0.0


def test_diagnostics_keys(sweep_d1, gs1):
    diag = profile.profile_diagnostics(sweep_d1[0][0.3], gs1)
    for key in ("sc_scaled", "varrho_ratio", "wkb_admissibility", "interior_closeness",
                "far_decay_min", "far_decay_max"):
        assert np.isfinite(diag[key])


def test_s_b_endpoints():
    b = 0.3
    assert profile.s_b(b, 2 / b) == 0.0
    assert abs(profile.s_b(b, 0.0) - np.pi / (2 * b)) <= 1e-14


def test_csv_roundtrip(sweep_d1, tmp_path):
    prof = sweep_d1[0][0.35]
    path = tmp_path / "p.csv"
    prof.to_csv(path)
    back = profile.load_profile(path)
    assert back.s_c == prof.s_c and back.varrho_b == prof.varrho_b
    r = np.linspace(0, prof.r_inf, 97)
    assert np.abs(back(r)[0] - prof(r)[0]).max() <= 1e-12


@pytest.mark.parametrize("kw", [dict(b=0.1), dict(b=0.7), dict(b=0.3, r_inf=10.0)])
def test_rejects_bad_input(gs1, kw):
    with pytest.raises(DomainError):
        profile.solve_profile(1, gs=gs1, **kw)


def test_limit_object_has_no_far_field(gs1):
    with pytest.raises(DomainError):
        profile.limit_profile(gs1)(np.array([gs1.r_max + 1]))
