"""Compiled vs pure-Python kernels: CV scoring and the paired program solves.

    python3 benchmarks/bench_kernels.py [--seeds 2] [--repeat 5]
"""

import argparse
import statistics
import time

import numpy as np

from nefro import _kernels_py, coexsim as cs
from nefro._backend import compiled_kernels
from nefro.nefropt.problem import ConstraintKind, Objective, build_problem, link_budget
from nefro.nefropt.solver import solve
from nefro.regress import cv_orders


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_cv(repeat):
    rng = np.random.default_rng(0)
    x = rng.uniform(-10, 30, 200)
    y = 1.3 + 0.16 * x + 0.005 * x * x + rng.normal(0, 0.3, 200)
    orders = np.ascontiguousarray(cv_orders(200, 30, 0), dtype=np.int64)
    rows = []
    for deg in (1, 2, 3):
        tp, sp = best_of(lambda: _kernels_py.poly_cv_scores(x, y, deg, 0.0, orders, 5), repeat)
        tc, sc = best_of(lambda: np.asarray(compiled_kernels.poly_cv_scores(x, y, deg, 0.0, orders, 5)), repeat)
        rows.append((f"poly_cv_scores deg={deg} (150 fits)", tp, tc, float(np.max(np.abs(sp - sc)))))
    return rows


def bench_solve(seeds, repeat):
    problems = []
    for seed in range(seeds):
        for cfg in cs.all_scenarios(seed)[::2]:
            b = link_budget(cfg)
            problems += [build_problem(b, o, ConstraintKind.THEORETICAL) for o in Objective]

    def run(backend):
        return [solve(p, backend=backend) for p in problems]

    tp, rp = best_of(lambda: run("python"), repeat)
    tc, rc = best_of(lambda: run("compiled"), repeat)
    dv = max(abs(a.optimal_value - b.optimal_value) / abs(a.optimal_value) for a, b in zip(rp, rc))
    it_p = statistics.mean(r.iterations for r in rp)
    it_c = statistics.mean(r.iterations for r in rc)
    label = f"solve x{len(problems)} (mean iters py {it_p:.0f} / c {it_c:.0f})"
    return [(label, tp, tc, dv)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled_kernels is None:
        raise SystemExit("compiled extension not built; run pip install -e . first")
    print(f"{'kernel':48s} {'python s':>10s} {'compiled s':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, tp, tc, d in bench_cv(args.repeat) + bench_solve(args.seeds, max(1, args.repeat // 2)):
        print(f"{name:48s} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f} {d:10.2e}")


if __name__ == "__main__":
    main()
