"""Wall time of the compiled and numpy propagators on a Jost-sized problem."""

import argparse
import time

import numpy as np

from blowupspec import kernels


def problem(n: int, nl: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    r = np.linspace(1e-5, 20, n)
    m = 0.1 * (rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2)))
    mid = 0.5 * (m[1:] + m[:-1])
    lam = rng.normal(size=nl) + 1j * rng.normal(size=nl)
    y0 = rng.normal(size=(nl, 4, 2)) + 0j
    return r, m, mid, lam, y0, np.array([n // 2, n - 1])


def best_of(fn, args, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=20000)
    ap.add_argument("--lambdas", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    args = problem(a.nodes, a.lambdas)
    t_np = best_of(kernels.propagate_numpy, args, a.repeat)
    print(f"nodes={a.nodes} lambdas={a.lambdas}")
    print(f"numpy   {t_np:8.3f} s")
    if kernels._compiled is None:
        print("cython  unavailable")
        return
    t_cy = best_of(kernels.propagate, args, a.repeat)
    ref = kernels.propagate_numpy(*args)
    err = np.abs(kernels.propagate(*args) - ref).max() / np.abs(ref).max()
    print(f"cython  {t_cy:8.3f} s  speedup {t_np / t_cy:5.1f}x  relative diff {err:.1e}")


if __name__ == "__main__":
    main()
