import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowupspec import kernels


def _problem(seed, n=200, nl=3, nk=2, forcing=False):
    rng = np.random.default_rng(seed)
    r = np.cumsum(rng.uniform(0.01, 0.02, n))
    cplx = lambda *s: rng.normal(size=s) + 1j * rng.normal(size=s)
    args = [r, cplx(n, 2, 2), cplx(n - 1, 2, 2), cplx(nl), cplx(nl, 4, nk), np.array([0, n // 2, n - 1])]
    extra = [cplx(n, 2), cplx(n - 1, 2), np.array([1] + [0] * (nk - 1))] if forcing else []
    return args, extra


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernel not built")
@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), forcing=st.booleans())
def test_backends_agree(seed, forcing):
    args, extra = _problem(seed, forcing=forcing)
    fast = kernels.propagate(*args, *extra)
    ref = kernels.propagate_numpy(*args, *extra)
    assert np.abs(fast - ref).max() <= 1e-12 * np.abs(ref).max()


def test_rk4_order():
    # y'' = -y with y(0) = 1, y'(0) = 0 in the first component of each column
    def run(n):
        r = np.linspace(0, 1, n + 1)
        m = np.zeros((n + 1, 2, 2), complex)
        m[:, 0, 0] = m[:, 1, 1] = -1
        y0 = np.zeros((1, 4, 1), complex)
        y0[0, 0, 0] = 1
        out = kernels.propagate(r, m, m[:-1], np.zeros(1), y0, np.array([n]))
        return abs(out[0, 0, 0, 0] - np.cos(1))
    assert 12 <= run(20) / run(40) <= 20


def test_output_at_first_node():
    args, _ = _problem(1)
    out = kernels.propagate(*args)
    assert np.array_equal(out[0], args[4])
