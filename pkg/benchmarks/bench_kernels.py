"""Timing comparison of the two kernel execution paths.

The package ships a single source for its hot kernels; with numba
present they run JIT-compiled, and with ``TFHH_DISABLE_NUMBA=1`` the
same functions run as plain Python over numpy arrays.  This script
times the mode it was started in, and by default also relaunches
itself in the other mode and prints a combined table.

Usage:
    python benchmarks/bench_kernels.py            # both paths + speedup
    python benchmarks/bench_kernels.py --no-compare
    python benchmarks/bench_kernels.py --quick
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from tfhh import kernels
from tfhh.fdcmss import DecaySpec, new_sketch, sketch_update_many

MODE = "numba" if kernels.USE_NUMBA else "pure"


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def filled_sketch(seed: int, depth: int, width: int, n: int):
    sk = new_sketch(depth, width, seed)
    rng = np.random.default_rng(seed)
    items = rng.integers(0, 100_000, size=n, dtype=np.uint32)
    ticks = np.arange(1, n + 1, dtype=np.int64)
    sketch_update_many(sk, items, ticks, DecaySpec.polynomial(2.0))
    return sk, items, ticks


def run_benchmarks(quick: bool) -> list[dict]:
    depth, width = 4, 2500
    n = 20_000 if quick else 100_000
    repeat = 1 if (quick or MODE == "pure") else 3
    decay = DecaySpec.polynomial(2.0)
    results = []

    sk, items, ticks = filled_sketch(1, depth, width, n)
    weights = decay.raw_weights(ticks)

    def bench_update():
        fresh = new_sketch(depth, width, 1)
        kernels.update_many(
            fresh.items, fresh.present, fresh.fhat, fresh.ha, fresh.hb,
            items, weights,
        )

    bench_update()  # warm-up / compile
    results.append(
        {
            "kernel": "update_many",
            "workload": f"{n} items into a {depth}x{width} grid",
            "seconds": best_of(bench_update, repeat),
        }
    )

    other, _, _ = filled_sketch(2, depth, width, n)
    io = np.zeros_like(sk.items)
    po = np.zeros_like(sk.present)
    fo = np.zeros_like(sk.fhat)

    def bench_merge():
        kernels.merge_cells(
            sk.items, sk.present, sk.fhat,
            other.items, other.present, other.fhat,
            io, po, fo, 0.5,
        )

    bench_merge()
    reps = 5 if quick else 50
    results.append(
        {
            "kernel": "merge_cells",
            "workload": f"{reps} merges of {depth}x{width} grids",
            "seconds": best_of(lambda: [bench_merge() for _ in range(reps)], repeat),
        }
    )

    tau = float(sk.fhat[0].sum()) * 0.005
    out_items = np.zeros(depth * width * 2, dtype=np.uint64)
    out_est = np.zeros(depth * width * 2, dtype=np.float64)

    def bench_query():
        kernels.query_scan(
            sk.items, sk.present, sk.fhat, sk.ha, sk.hb, tau,
            out_items, out_est,
        )

    bench_query()
    results.append(
        {
            "kernel": "query_scan",
            "workload": f"{reps} scans of a {depth}x{width} grid",
            "seconds": best_of(lambda: [bench_query() for _ in range(reps)], repeat),
        }
    )

    p = 5000
    values = np.random.default_rng(0).random(p)
    perm = np.random.default_rng(1).permutation(p)
    partners = np.random.default_rng(2).integers(0, p, size=p)
    kernels.scalar_avg_round(values, perm, partners)
    rounds = 20 if quick else 200
    results.append(
        {
            "kernel": "scalar_avg_round",
            "workload": f"{rounds} rounds over {p} peers",
            "seconds": best_of(
                lambda: [
                    kernels.scalar_avg_round(values, perm, partners)
                    for _ in range(rounds)
                ],
                repeat,
            ),
        }
    )
    return results


def print_table(mine: list[dict], theirs: list[dict] | None) -> None:
    if theirs is None:
        print(f"{'kernel':<18} {'workload':<38} {MODE + ' [s]':>12}")
        for row in mine:
            print(f"{row['kernel']:<18} {row['workload']:<38} {row['seconds']:>12.4f}")
        return
    numba_rows = mine if MODE == "numba" else theirs
    pure_rows = theirs if MODE == "numba" else mine
    print(f"{'kernel':<18} {'workload':<38} {'numba [s]':>10} {'pure [s]':>10} {'speedup':>8}")
    for nrow, prow in zip(numba_rows, pure_rows):
        speed = prow["seconds"] / nrow["seconds"] if nrow["seconds"] > 0 else float("inf")
        print(
            f"{nrow['kernel']:<18} {nrow['workload']:<38} "
            f"{nrow['seconds']:>10.4f} {prow['seconds']:>10.4f} {speed:>7.1f}x"
        )


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    ap.add_argument(
        "--no-compare",
        action="store_true",
        help="time only the current mode, do not relaunch in the other one",
    )
    ap.add_argument("--json", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    results = run_benchmarks(args.quick)
    if args.json:
        print(json.dumps(results))
        return 0

    other = None
    if not args.no_compare:
        env = dict(os.environ)
        if MODE == "numba":
            env["TFHH_DISABLE_NUMBA"] = "1"
        else:
            env.pop("TFHH_DISABLE_NUMBA", None)
        cmd = [sys.executable, os.path.abspath(__file__), "--json"]
        if args.quick:
            cmd.append("--quick")
        try:
            out = subprocess.run(
                cmd, env=env, capture_output=True, text=True, check=True
            )
            other = json.loads(out.stdout)
        except (subprocess.CalledProcessError, json.JSONDecodeError) as exc:
            print(f"(could not run the other mode: {exc})\n")

    print(f"current mode: {MODE}")
    print_table(results, other)
    return 0


if __name__ == "__main__":
    sys.exit(main())
