#!/usr/bin/env python3
"""Time the batch kernels on the compiled and NumPy backends.

Run after an editable install:

    python benchmarks/bench_backends.py --trials 200000

The two backends produce identical samples; this script reports the
speed gap and verifies agreement on the way.
"""

import argparse
import importlib
import time

import numpy as np

from couplekit._kernels import _purepy
from couplekit.analysis import random_pair
from couplekit.distributions import discretize
from couplekit.lowcomm import _correction_residual, _grid_probs
from couplekit.protocols import residual_distribution
from couplekit.randomness import SharedRandomSource, child_keys, label_keys


def build_workloads(trials, n, seed):
    p, q = random_pair(n, SharedRandomSource(seed, "bench"), zero_chance=0.0)
    keys = child_keys(SharedRandomSource(seed, "bench-keys").key, trials)
    resid = residual_distribution(q, p)
    gp, gq = discretize(p, 0.0125), discretize(q, 0.0125)
    rp = _correction_residual(p, _grid_probs(gp))
    rq = _correction_residual(q, _grid_probs(gq))
    grid_args = (
        gp.numerators,
        gq.numerators,
        gp.cumulative_numerators().astype(np.float64),
        gq.cumulative_numerators().astype(np.float64),
        gp.denominator,
    )
    return {
        "gumbel_pair": (p.probs, q.probs, keys),
        "wmh_pair": (p.probs, q.probs, keys),
        "optimal_pair": (
            p.probs,
            p.cumulative(),
            q.probs,
            resid.probs if resid else None,
            resid.cumulative() if resid else None,
            keys,
            label_keys(keys, "bob-residual"),
        ),
        "grid_session_pair": grid_args + (keys,),
        "lowcomm_pair": grid_args
        + (
            _grid_probs(gp),
            _grid_probs(gq),
            p.probs,
            q.probs,
            rp.probs if rp else None,
            rp.cumulative() if rp else None,
            rq.probs if rq else None,
            rq.cumulative() if rq else None,
            keys,
            label_keys(keys, "alice-correction"),
            label_keys(keys, "bob-correction"),
        ),
    }


def time_call(fn, args, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=200_000)
    parser.add_argument("--n", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    try:
        native = importlib.import_module("couplekit._kernels._native")
    except ImportError:
        native = None
        print("compiled backend not built; timing NumPy only\n")

    workloads = build_workloads(args.trials, args.n, args.seed)
    print(f"{args.trials} trials, n = {args.n}\n")
    print(f"{'kernel':<16} {'numpy':>10} {'native':>10} {'speedup':>9}")
    for name, call_args in workloads.items():
        py_time, py_out = time_call(getattr(_purepy, name), call_args, args.repeats)
        if native is None:
            print(f"{name:<16} {py_time * 1e3:>8.1f}ms {'-':>10} {'-':>9}")
            continue
        nat_time, nat_out = time_call(getattr(native, name), call_args, args.repeats)
        py_arrays = py_out if isinstance(py_out, tuple) else (py_out,)
        nat_arrays = nat_out if isinstance(nat_out, tuple) else (nat_out,)
        agree = all(np.array_equal(a, b) for a, b in zip(py_arrays, nat_arrays))
        flag = "" if agree else "  DISAGREE"
        print(
            f"{name:<16} {py_time * 1e3:>8.1f}ms {nat_time * 1e3:>8.1f}ms"
            f" {py_time / nat_time:>8.1f}x{flag}"
        )


if __name__ == "__main__":
    main()
