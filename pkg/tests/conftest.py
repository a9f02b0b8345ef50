import time

import pytest

from blowupspec import h0struct, jost, profile
from blowupspec.groundstate import solve_ground_state

SWEEP = (0.4, 0.35, 0.3, 0.25)


@pytest.fixture(scope="session")
def gs1():
    return solve_ground_state(1, 5.0)


@pytest.fixture(scope="session")
def gs2():
    return solve_ground_state(2, 3.0)


@pytest.fixture(scope="session")
def basis1(gs1):
    return h0struct.build_lpm_basis(gs1)


@pytest.fixture(scope="session")
def basis2(gs2):
    return h0struct.build_lpm_basis(gs2)


@pytest.fixture(scope="session")
def sweep_d1(gs1):
    """d=1 profiles over the b-sweep by continuation, with per-b wall time."""
    out, times, warm = {}, {}, None
    for b in SWEEP:
        t0 = time.perf_counter()
        warm = profile.solve_profile(1, b, gs=gs1, warm=warm)
        times[b] = time.perf_counter() - t0
        out[b] = warm
    return out, times


@pytest.fixture(scope="session")
def prof_d2(gs2):
    return profile.solve_profile(2, 0.35, gs=gs2)


@pytest.fixture(scope="session")
def spectra_d1(sweep_d1):
    """Radial and l=1 spectrum reports for d=1 at b in {0.4, 0.35, 0.3}, with wall times."""
    profs, _ = sweep_d1
    reps, times = {}, {}
    for b in (0.4, 0.35, 0.3):
        t0 = time.perf_counter()
        reps[b] = jost.classify_spectrum(profs[b], 1, keep_evaluators=True)
        times[b] = time.perf_counter() - t0
    return reps, times


@pytest.fixture(scope="session")
def spectrum_d2(prof_d2):
    t0 = time.perf_counter()
    rep = jost.classify_spectrum(prof_d2, 6)
    return rep, time.perf_counter() - t0
