import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from blowupspec import h0struct, jost, odesys, profile
from blowupspec.errors import DomainError

HYP = settings(max_examples=10, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])


def _sys(prof, l):
    return odesys.assemble_system(prof, jost.class_nu(prof.d, l), delta=1.5)


def test_gauge_zero(sweep_d1):
    sys = _sys(sweep_d1[0][0.3], 0)
    assert abs(jost.jost_value(sys, 0j).w) <= 1e-6


def test_no_real_zero(sweep_d1):
    sys = _sys(sweep_d1[0][0.3], 0)
    assert abs(jost.jost_value(sys, 0.3 * 0.3).w) >= 1e-3


def test_flat_high_class_margin(gs2):
    sys = odesys.assemble_system(profile.limit_profile(gs2), jost.class_nu(2, 2))
    lam = 0.1 * np.sqrt(np.linspace(0, 1, 6))[:, None] * np.exp(2j * np.pi * np.arange(12) / 12)[None, :]
    _, w = jost.JostEvaluator(sys)(lam.ravel())
    assert np.abs(w).min() >= 0.5


@pytest.mark.parametrize("l", [0, 1])
def test_r_drift(sweep_d1, l):
    sys = _sys(sweep_d1[0][0.3], l)
    rng = np.random.default_rng(11 + l)
    lam = rng.uniform(-0.3, 0.3, 50) + 1j * rng.uniform(-0.9, 0.9, 50)
    samples = jost.jost_samples(sys, lam)
    assert max(s.r_drift for s in samples) <= 1e-5
    # a third matching radius
    other = jost.jost_samples(sys, lam, x_star=5.0)
    assert max(abs(a.raw - b.raw) / abs(a.raw) for a, b in zip(samples, other)) <= 1e-5


@pytest.mark.parametrize("d,l", [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)])
def test_flat_oracle_equivalence(d, l, gs1, gs2):
    gs = gs1 if d == 1 else gs2
    sys = odesys.assemble_system(profile.limit_profile(gs), jost.class_nu(d, l))
    count, _ = jost.winding_number(jost.JostEvaluator(sys), (-0.4, 0.4, -0.4, 0.4))
    eig = h0struct.dense_oracle(gs, l, 0.4)
    assert count == eig.size
    assert np.all(np.abs(eig) <= 5e-3)


def test_radial_zeros_d1(spectra_d1):
    rep = spectra_d1[0][0.35]
    zeros = rep.classes[0]["zeros"]
    assert len(zeros) == 4
    assert all(z.multiplicity == 1 and z.winding == z.multiplicity for z in zeros)
    assert rep.classes[0]["verdict"]["verdict"] == "PASS"


@pytest.mark.parametrize("b", [0.4, 0.35, 0.3])
def test_spectrum_pass_d1(spectra_d1, b):
    rep = spectra_d1[0][b]
    assert rep.verdict == "PASS"
    assert rep.riesz == {"0": 1, "-bi": 1, "-2bi": 1}


def test_zero_records(spectra_d1):
    for rep in spectra_d1[0].values():
        for info in rep.classes.values():
            for z in info["zeros"]:
                x0, x1, y0, y1 = z.box
                assert x0 <= z.lambda_star.real <= x1 and y0 <= z.lambda_star.imag <= y1
                assert z.newton_residual <= 1e-8


def test_translation_pair_d2(spectrum_d2):
    rep, _ = spectrum_d2
    zs = sorted((z.lambda_star for z in rep.classes[1]["zeros"]), key=lambda z: z.imag)
    b = 0.35
    assert len(zs) == 2
    assert abs(zs[0] + 1j * b) <= 0.05 * b and abs(zs[1] - 1j * b) <= 0.05 * b


def test_high_classes_empty_d2(spectrum_d2):
    rep, _ = spectrum_d2
    assert all(rep.classes[l]["zeros"] == [] for l in range(2, 7))
    assert rep.riesz == {"0": 1, "-bi": 2, "-2bi": 1}


def test_l_max_zero(sweep_d1):
    rep = jost.classify_spectrum(sweep_d1[0][0.4], 0)
    assert list(rep.classes) == [0]


def test_one_dimension_has_two_classes():
    with pytest.raises(DomainError):
        jost.class_nu(1, 2)


def test_continuity(sweep_d1, gs1):
    lim = profile.limit_profile(gs1)
    xs = np.linspace(-0.2, 0.2, 7)
    grid = xs[None, :] + 1j * xs[:, None]
    for l in (0, 1):
        out = jost.continuity_sweep(list(sweep_d1[0].values()), lim, l, grid)
        assert out["decreasing"] and out["rate_ok"]
        assert all(r["sup_diff"] <= out["fitted_c"] * r["b"] ** (1 / 6) * (1 + 1e-12) for r in out["rows"])


def test_class_verdict_flags_extra_and_missing():
    b = 0.3
    z = jost.ZeroRecord(0.5 + 0j, 1, 1, 0.0, (0.4, 0.6, -0.1, 0.1))
    v = jost.class_verdict(b, 1, [z])
    assert v["verdict"] == "FAIL" and set(v["missing"]) == {"-bi", "+bi"} and v["unexpected"]
    assert jost.class_verdict(b, 2, [])["verdict"] == "PASS"
    assert jost.class_verdict(b, 2, [], error="x")["verdict"] == "PARTIAL"


def test_dumps_is_deterministic():
    obj = {"b": 0.1 + 0.2, "z": 1 / 3 + 2j, "k": [np.float64(np.pi)]}
    text = jost.dumps(obj)
    assert text == jost.dumps(json.loads(text))
    assert list(json.loads(text)) == ["b", "k", "z"]


@HYP
@given(re=st.floats(-0.3, 0.3), im=st.floats(-0.9, 0.9))
def test_conjugation_symmetry(sweep_d1, re, im):
    lam = complex(re, im)
    ev = jost.JostEvaluator(_sys(sweep_d1[0][0.35], 0))
    _, w = ev([lam, -lam.conjugate()])
    assert abs(abs(w[0]) - abs(w[1])) <= 1e-6


@HYP
@given(k=st.integers(1, 4))
def test_winding_counts_known_zeros(sweep_d1, k):
    """A box around -2bi holds one zero at every size that excludes its neighbours."""
    b = 0.35
    ev = jost.JostEvaluator(_sys(sweep_d1[0][b], 0))
    half = 0.1 * k * b
    n, _ = jost.winding_number(ev, (-half, half, -2 * b - half, -2 * b + half))
    assert n == 1
