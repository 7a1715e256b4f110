"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Both paths live in the same process: the dispatchers take ``use_numba``
explicitly, so the environment flag is not needed here.  First calls are
made before timing so JIT compilation is excluded.
"""
import argparse
import timeit

import numpy as np

from wetbeam import _kernels, operating_point_config
from wetbeam.channel import cluster_statistics, trial_rng
from wetbeam.constrained import real_equivalent, stat_problem


def solver_case(lower=148.8e-6):
    """One constrained operating-point instance in the solver's scaled form."""
    cfg = operating_point_config()
    rng = trial_rng(cfg.seed, 0)
    stats = [cluster_statistics(c, cfg, rng) for c in cfg.clusters]
    prob = stat_problem(stats, cfg.tx_power_w, lower, 311e-6)
    s_top = np.linalg.norm(prob.objective, 2)
    T = len(prob.terminal_factors)
    c0 = cfg.tx_power_w * s_top**2 / T
    Q = real_equivalent(prob.objective)
    Q = Q.T @ Q / s_top**2
    rows = [real_equivalent(C) * np.sqrt(cfg.tx_power_w / c0) for C in prob.terminal_factors[::8]]
    C = np.vstack(rows)
    start = np.concatenate([[0], np.cumsum([r.shape[0] for r in rows])])
    n = len(rows)
    u0 = np.zeros(Q.shape[0])
    u0[0] = 1.0
    return (Q, C, start, np.full(n, lower / c0), np.full(n, 311e-6 / c0), u0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not available (or disabled); nothing to compare")

    rng = np.random.default_rng(0)
    angles = rng.uniform(0, 180, 1024)
    powers = rng.exponential(1e-4, 100_000)
    case = solver_case()
    kernels = {
        "steering_matrix 1024x128": lambda nb: _kernels.steering_matrix(angles, 128, 0.5, use_numba=nb),
        "harvest 1e5": lambda nb: _kernels.harvest(powers, 6.3e-6, 311e-6, 0.25, use_numba=nb),
        "al_solve operating point": lambda nb: _kernels.al_solve(*case, use_numba=nb),
    }
    print(f"{'kernel':<28}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, fn in kernels.items():
        fn(True)
        fn(False)
        t = {nb: min(timeit.repeat(lambda: fn(nb), number=1, repeat=args.repeat)) * 1e3
             for nb in (True, False)}
        print(f"{name:<28}{t[True]:>12.3f}{t[False]:>12.3f}{t[False] / t[True]:>9.1f}x")


if __name__ == "__main__":
    main()
