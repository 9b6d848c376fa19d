"""Compare the compiled and pure-Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--points 200000] [--events 200000]

Prints the best-of-``--repeat`` wall time per backend and checks that both
backends return identical results.
"""

import argparse
import time

import numpy as np

from csbp_height import kernels
from csbp_height.levy_sim import simulate_levy
from csbp_height.mechanism import BranchingMechanism, JumpMeasure, default_schedule, offspring_law


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_height(points, repeat):
    mech = BranchingMechanism(0.0, 1.0, JumpMeasure.power_law(1.0, 1.5))
    path = simulate_levy(mech, 0.01, 1.0, grid_step=2.0 / points, seed=1)
    y = np.ascontiguousarray(path.y)
    yl = np.ascontiguousarray(path.y_left)
    jump = np.ascontiguousarray(path.jump_size > 0, dtype=np.uint8)
    rows = {}
    for name, mod in kernels.backends().items():
        rows[name] = _best(lambda: mod.height_scan(y, yl, jump), repeat)
    return len(y), rows


def bench_gw(events, repeat):
    mech = BranchingMechanism(0.0, 1.0, JumpMeasure.power_law(1.0, 1.5, cutoff=5.0))
    law = offspring_law(mech, default_schedule(mech), 200)
    g = np.random.default_rng(2)
    exps = g.standard_exponential(events)
    unifs = g.random(events)

    def run(mod):
        state = np.array([2000.0, 0.0, 0.0, 0.0])
        rec_t = np.empty(events)
        rec_k = np.empty(events, dtype=np.int64)
        mod.gw_advance(state, np.inf, law.total_rate, law.cdf, exps, unifs, rec_t, rec_k, 10**8)
        return state, rec_k[: int(state[3])]

    rows = {}
    for name, mod in kernels.backends().items():
        rows[name] = _best(lambda: run(mod), repeat)
    n_done = int(rows["python"][1][0][3])
    return n_done, rows


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--events", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    for label, (size, rows) in (
        ("height_scan", bench_height(args.points, args.repeat)),
        ("gw_advance", bench_gw(args.events, args.repeat)),
    ):
        base = rows["python"][0]
        for name, (secs, _) in rows.items():
            print(f"{label:12s} {name:7s} n={size:>8d}  {secs * 1e3:9.2f} ms  x{base / secs:6.1f}")
        outs = [r[1] for r in rows.values()]
        print(f"{label:12s} outputs identical across backends: {all(_same(outs[0], o) for o in outs[1:])}")


if __name__ == "__main__":
    main()
