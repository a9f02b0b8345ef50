import numpy as np
import pytest

from blowupspec.errors import DomainError
from blowupspec.groundstate import (SmoothQ, fit_decay_constants, read_ground_state_csv,
                                    solve_ground_state)


def test_closed_form_d1(gs1):
    r = gs1.grid[gs1.grid <= 10]
    q = gs1(r)[0]
    exact = 3 ** 0.25 / np.sqrt(np.cosh(2 * r))
    assert np.abs(q - exact).max() <= 1e-8


def test_kappa_closed_form_d1(gs1):
    assert abs(gs1.kappa_q - np.sqrt(2) * 3 ** 0.25) <= 1e-5


def test_fit_window_stability(gs1, gs2):
    for gs in (gs1, gs2):
        k1, _ = fit_decay_constants(gs, (15.0, 30.0))
        k2, _ = fit_decay_constants(gs, (16.0, 30.0))
        assert abs(k1 / k2 - 1) <= 1e-4


def test_townes_step_refinement(gs2):
    fine = solve_ground_state(2, 3.0, max_step=0.05)
    finer = solve_ground_state(2, 3.0, max_step=0.025)
    assert abs(fine.q0 - finer.q0) <= 1e-7
    assert abs(fine.q0 - gs2.q0) <= 1e-7
    assert abs(fine.kappa_q - finer.kappa_q) / finer.kappa_q <= 1e-5


def test_positive_decreasing(gs1, gs2):
    for gs in (gs1, gs2):
        assert np.all(gs.q > 0) and np.all(np.diff(gs.q) < 0)


def test_smooth_representation_matches(gs1):
    r = np.linspace(0.0, 25.0, 501)
    assert np.abs(SmoothQ(gs1)(r)[0] - gs1(r)[0]).max() <= 1e-9


def test_csv_roundtrip(gs1, tmp_path):
    path = tmp_path / "gs.csv"
    gs1.to_csv(path)
    m = read_ground_state_csv(path)
    assert m["kappa_q"] == gs1.kappa_q
    np.testing.assert_array_equal(m["q"], gs1.q)


@pytest.mark.parametrize("kw", [dict(d=0, p=3.0), dict(d=3, p=5.0), dict(d=1, p=5.0, tol=1e-3),
                                dict(d=1, p=5.0, r_max=10.0)])
def test_rejects_bad_input(kw):
    with pytest.raises(DomainError):
        solve_ground_state(**kw)


def test_fit_window_bounds(gs1):
    with pytest.raises(DomainError):
        fit_decay_constants(gs1, (5.0, 30.0))
