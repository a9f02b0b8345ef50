import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowupspec import specfun
from blowupspec.errors import DomainError, RangeError

OMEGA = np.exp(2j * np.pi / 3)


def test_airy_at_zero():
    a = specfun.airy_eval(0)
    assert abs(a.ai - 3 ** (-2 / 3) / math.gamma(2 / 3)) <= 1e-15
    assert abs(a.ai_prime + 3 ** (-1 / 3) / math.gamma(1 / 3)) <= 1e-15
    assert abs(a.ai - 0.355028053887817) <= 1e-14


def test_airy_connection_point():
    z = 1 + 0.5j
    s = specfun.ai(z)[0] + OMEGA * specfun.ai(OMEGA * z)[0] + OMEGA ** 2 * specfun.ai(OMEGA ** 2 * z)[0]
    assert abs(s) <= 1e-10


def test_airy_leading_asymptotic():
    z = 10.0
    zeta = 2 / 3 * z ** 1.5
    lead = np.exp(-zeta) / (2 * np.sqrt(np.pi) * z ** 0.25)
    assert abs(specfun.airy_eval(z).ai / lead - 1) <= 0.01


def test_bessel_half_order():
    b = specfun.bessel_eval(0.5, 2.0)
    assert abs(b.i_val - (2 * np.pi * 2) ** -0.5 * (np.exp(2) - np.exp(-2))) <= 1e-14
    assert abs(b.k_val - np.pi ** 0.5 * (2 * 2) ** -0.5 * np.exp(-2)) <= 1e-15


def test_bessel_wronskian_point():
    b = specfun.bessel_eval(0.5, 1.3)
    assert abs(b.i_val * b.k_prime - b.i_prime * b.k_val + 1 / 1.3) <= 1e-14


def test_bessel_small_argument():
    b = specfun.bessel_eval(3, 0.01)
    assert abs(b.k_val / (2 ** 2 * math.gamma(3) * 0.01 ** -3) - 1) <= 1e-3


def test_sector_and_guard():
    with pytest.raises(DomainError):
        specfun.bessel_ik(1.0, 1j)
    with pytest.raises(DomainError):
        specfun.bessel_ik(1.0, 0.0)
    with pytest.raises(RangeError):
        specfun.ai(2e3)


def test_selftest_passes():
    out = specfun.selftest()
    assert out["samples"] >= 200 and out["pass"]


def test_maclaurin_oracle_agrees():
    rng = np.random.default_rng(3)
    z = 2.5 * np.sqrt(rng.random(200)) * np.exp(2j * np.pi * rng.random(200))
    a, ap = specfun.ai(z)
    m, mp = specfun.airy_maclaurin(z)
    assert np.abs(a - m).max() <= 1e-12 and np.abs(ap - mp).max() <= 1e-12


def test_asymptotic_oracle_agrees():
    rng = np.random.default_rng(4)
    z = rng.uniform(15, 40, 200) * np.exp(1j * rng.uniform(-2, 2, 200))
    a, ap = specfun.ai(z)
    s, sp = specfun.airy_asymptotic(z)
    assert np.max(np.abs(a / s - 1)) <= 1e-10 and np.max(np.abs(ap / sp - 1)) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(r=st.floats(0.0, 8.0), t=st.floats(-np.pi, np.pi))
def test_airy_connection_property(r, t):
    z = r * np.exp(1j * t)
    vals = [specfun.ai(w)[0] for w in (z, OMEGA * z, OMEGA ** 2 * z)]
    assert abs(vals[0] + OMEGA * vals[1] + OMEGA ** 2 * vals[2]) <= 1e-9 * max(map(abs, vals))


@settings(max_examples=200, deadline=None)
@given(nu=st.floats(-0.5, 20.0), r=st.floats(0.05, 20.0), t=st.floats(-np.pi / 4, np.pi / 4))
def test_bessel_wronskian_property(nu, r, t):
    z = r * np.exp(1j * t)
    i, k, ip, kp = specfun.bessel_ik(nu, z, scaled=True)
    assert abs((i * kp - ip * k) * z + 1) <= 1e-10 * (abs(i * kp * z) + abs(ip * k * z))


@settings(max_examples=200, deadline=None)
@given(nu=st.floats(3.0, 50.0), r=st.floats(0.05, 30.0))
def test_turan_bound_property(nu, r):
    assert abs(specfun.turan_phi(nu, r)) <= 1 / (nu + 1) + 1e-9


@settings(max_examples=100, deadline=None)
@given(nu=st.floats(0.0, 10.0), r=st.floats(0.2, 20.0), e=st.floats(-0.3, 0.3))
def test_free_solutions_wronskian(nu, r, e):
    """tilde_i, tilde_k solve the same equation; their Wronskian is -sqrt(E)."""
    energy = 1 + 1j * e
    vi, di = specfun.tilde_i(nu, energy, r)
    vk, dk = specfun.tilde_k(nu, energy, r)
    w = vi * dk - di * vk
    assert abs(w + np.sqrt(energy)) <= 1e-10 * (abs(vi * dk) + abs(di * vk))
