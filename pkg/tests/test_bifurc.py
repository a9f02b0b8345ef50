import numpy as np
import pytest

from blowupspec import bifurc, jost


def _beta3(terms=200000):
    """Dirichlet beta(3) by the alternating series with a half-term tail correction."""
    k = np.arange(terms)
    s = np.sum((-1.0) ** k / (2 * k + 1.0) ** 3)
    return s + 0.5 * (-1.0) ** terms / (2 * terms + 1.0) ** 3


def test_denominator_closed_form(gs1):
    # int_0^inf r^2 sech(2r) dr = (1/8) int_0^inf y^2 sech y dy = (1/8) * 4 beta(3)
    oracle = np.sqrt(3) * 0.5 * _beta3()
    assert abs(oracle - np.sqrt(3) * np.pi ** 3 / 64) <= 1e-12
    assert abs(bifurc.moment_integral(gs1, 2) - oracle) <= 1e-6


def test_prediction_positive(sweep_d1, gs1):
    for prof in sweep_d1[0].values():
        assert bifurc.predict_bifurcation(gs1, prof).upsilon_rho > 0


def test_lambda3_separated(sweep_d1, gs1):
    pred = bifurc.predict_bifurcation(gs1, sweep_d1[0][0.35])
    assert 0.02 < pred.lambda3_pred.imag / 0.35 < 0.5
    assert pred.lambda2_pred == 0.7j


def test_lambda2_located(spectra_d1, sweep_d1, gs1):
    block = bifurc.verify_bifurcation(spectra_d1[0][0.35],
                                      bifurc.predict_bifurcation(gs1, sweep_d1[0][0.35]))
    assert abs(block["lambda2_found"] - 0.7j) <= 0.1 * 0.7
    assert block["verdict"] == "PASS"


def test_trend(spectra_d1, sweep_d1, gs1):
    blocks = []
    for b in (0.4, 0.35, 0.3):
        blk = bifurc.verify_bifurcation(spectra_d1[0][b], bifurc.predict_bifurcation(gs1, sweep_d1[0][b]))
        blk["b"] = b
        blocks.append(blk)
    assert bifurc.trend_check(blocks)
    assert all(1 / 3 <= blk["ratio3"] <= 3 for blk in blocks)


def test_empty_report_fails(sweep_d1, gs1):
    empty = jost.SpectrumReport(1, 0.35, 0.0, {}, {})
    block = bifurc.verify_bifurcation(empty, bifurc.predict_bifurcation(gs1, sweep_d1[0][0.35]))
    assert block["verdict"] == "FAIL"


def test_trend_needs_two_points():
    assert not bifurc.trend_check([{"b": 0.3, "ratio3": 0.9}])
    assert bifurc.trend_check([{"b": 0.3, "ratio3": 0.9}, {"b": 0.4, "ratio3": 0.5}])
    assert not bifurc.trend_check([{"b": 0.3, "ratio3": 0.4}, {"b": 0.4, "ratio3": 0.5}])


@pytest.fixture(scope="module")
def rho03(sweep_d1):
    return bifurc.solve_rho_b(sweep_d1[0][0.3])


def test_rho_b_against_prediction(rho03, sweep_d1, gs1):
    pred = bifurc.predict_bifurcation(gs1, sweep_d1[0][0.3])
    assert 0.5 <= rho03.upsilon_solved / pred.upsilon_rho <= 2
    assert rho03.jacobian_rank == 4


def test_rho_b_equation(rho03):
    assert rho03.equation_residual <= 1e-6


def test_rho_b_against_jost(rho03, spectra_d1):
    rep = spectra_d1[0][0.3]
    z3 = complex(*rep.classes[0]["verdict"]["matched"]["lambda3"])
    ups3 = z3.imag + 0.3 * rep.s_c
    assert abs(rho03.upsilon_solved / ups3 - 1) <= 0.2
