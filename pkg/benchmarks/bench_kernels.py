"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 3]

Both backends are called directly (no env flag needed) and their outputs are
checked for equality before timings are printed.
"""
import argparse
import time

import numpy as np

from helmqa import densela
from helmqa.samplers import kernels


def best_of(fn, repeat):
    fn()  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    rows = []
    n = 40
    c = np.triu(rng.normal(size=(n, n)))
    S, d = kernels.couplings(c)
    betas = np.geomspace(0.1, 10, 200) / np.abs(c).max()
    seed = np.uint64(1)
    t_nb, a = best_of(lambda: kernels._anneal_numba(S, d, betas, seed, 0, 64), args.repeat)
    t_np, b = best_of(lambda: kernels._anneal_numpy(S, d, betas, seed, 0, 64), args.repeat)
    assert np.array_equal(a, b)
    rows.append(("anneal 40 bits x 64 reads x 200 sweeps", t_nb, t_np))

    n = 18
    c = np.triu(rng.normal(size=(n, n)))
    S, d = kernels.couplings(c)
    tol = 1e-12 * np.abs(c).sum()
    t_nb, a = best_of(lambda: kernels._exhaustive_numba(c, S, d, tol), args.repeat)
    t_np, b = best_of(lambda: kernels._exhaustive_numpy(c, S, d, tol), args.repeat)
    assert np.array_equal(a, b)
    rows.append(("exhaustive 18 bits", t_nb, t_np))

    m = rng.normal(size=(60, 60))
    m = m + m.T
    tol = densela.JACOBI_TOL * np.linalg.norm(m)

    def jac(kernel):
        a, v = m.copy(), np.eye(60)
        kernel(a, v, tol, 100)
        return np.sort(np.diag(a))

    t_nb, a = best_of(lambda: jac(densela._jacobi_numba), args.repeat)
    t_np, b = best_of(lambda: jac(densela._jacobi_numpy), args.repeat)
    assert np.allclose(a, b)
    rows.append(("jacobi 60x60", t_nb, t_np))

    print(f"{'kernel':42s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, t_nb, t_np in rows:
        print(f"{name:42s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
