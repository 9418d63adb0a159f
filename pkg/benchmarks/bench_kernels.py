"""Time each numeric kernel on its numba and numpy implementations.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import time

import numpy as np

from cfmac import _accel, kernels


def _cases(rng):
    K = 5
    X = rng.normal(size=(K, K))
    M = X @ X.T + K * np.eye(K)
    Ms = np.stack([(lambda Y: Y @ Y.T + 3 * np.eye(3))(rng.normal(size=(3, 3))) for _ in range(20000)])
    A = np.array([[1.0, 1, 1], [0, 1, 1], [0, 0, 1]])
    betas = np.column_stack([np.ones(20000), rng.uniform(0.5, 3, (20000, 2))])
    h = np.ones(3)
    w, g = rng.uniform(0.5, 5, 4), np.ones(4)
    u, v = rng.normal(size=4), rng.normal(size=4)
    xs = np.linspace(-4, 4, 4001)
    ys = np.linspace(-4, 4, 201)
    P, Q = np.array([10.0, 2.0]), np.array([10.0, 2.0])
    a, b = np.array([1.0, 1.0]), np.array([1.0, 0.0])
    bet = np.column_stack([np.ones(50000), rng.uniform(0.2, 3, 50000)])
    gam = rng.uniform(-3, 3, (50000, 2))
    return {
        "chol_lower": (M,),
        "chol_diag_batch": (Ms,),
        "k_user_rates_batch": (A, betas, h, 8.0),
        "quad_grid_min_1d": (1.0, w, g, v, xs),
        "quad_grid_min_2d": (1.0, w, g, u, v, xs[::20].copy(), ys),
        "dirty_rates_batch": (P, Q, a, b, bet, gam),
    }


def _time(fn, args, repeat):
    fn(*args)  # warm-up, includes compilation for numba
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    cases = _cases(rng)
    print(f"numba available: {_accel.NUMBA_AVAILABLE}, default backend: {_accel.backend_name()}")
    print(f"{'kernel':<22}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, (nb, npf) in kernels.IMPLEMENTATIONS.items():
        t_np = _time(npf, cases[name], args.repeat)
        t_nb = _time(nb, cases[name], args.repeat) if _accel.NUMBA_AVAILABLE else float("nan")
        print(f"{name:<22}{1e3 * t_nb:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
