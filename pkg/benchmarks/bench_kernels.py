"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Times each kernel on representative inputs and one whole scenario with each
backend swapped in.  Prints one line per measurement and the speedup.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from fanetq import _kernels_py, kernels
from fanetq.mobility import SPEED_PROFILES, generate_fleet
from fanetq.sim import ScenarioConfig, run_scenario
from fanetq.topology import NodeSet

try:
    from fanetq import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

NAMES = ("positions_at", "contact", "remaining_estimates", "echo_update")
ARENA = (20000.0, 10000.0)


def kernel_cases(n: int = 20):
    fleet = generate_fleet(n, SPEED_PROFILES["fast"], ARENA, 600.0, seed=0)
    ns = NodeSet(fleet)
    out = np.empty((n, 2))
    pos = np.random.default_rng(0).uniform(0, 20000, (n, 2))
    dist, adj = np.empty((n, n)), np.empty((n, n), np.uint8)
    _kernels_py.contact(pos, 7500.0, dist, adj)
    Q = np.random.default_rng(1).uniform(0, 100, (n, n, n))
    nb = np.flatnonzero(adj[0]).astype(np.int64)
    est = np.empty(nb.size)
    row = Q[0, 1].copy()
    targets = np.ones(nb.size)
    sel = int(nb[0]) if nb.size else 0
    return {
        "positions_at": lambda m: m.positions_at(123.4, ns._offsets, ns._start, ns._speed, ns._cos,
                                                 ns._sin, ns._x0, ns._y0, ARENA[0], ARENA[1], out),
        "contact": lambda m: m.contact(pos, 7500.0, dist, adj),
        "remaining_estimates": lambda m: m.remaining_estimates(Q, adj, 1, nb, est),
        "echo_update": lambda m: m.echo_update(row, nb, targets, sel, 0.5, 0.3),
    }


def best(fn, repeat: int, number: int) -> float:
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def scenario_time(module, repeat: int) -> float:
    saved = {k: getattr(kernels, k) for k in NAMES}
    for k in NAMES:
        setattr(kernels, k, getattr(module, k))
    cfg = ScenarioConfig(n_nodes=20, packet_count=500, seed=0, q_sample_every=0)
    try:
        return best(lambda: run_scenario(cfg), repeat, 1)
    finally:
        for k, v in saved.items():
            setattr(kernels, k, v)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels_c is None:
        print("compiled kernels not built; only the fallback is timed")
    backends = [("python", _kernels_py)] + ([("cython", _kernels_c)] if _kernels_c else [])
    for name, fn in kernel_cases().items():
        times = {b: best(lambda: fn(m), args.repeat, 2000) for b, m in backends}
        line = " ".join(f"{b} {1e6 * t:8.2f} us" for b, t in times.items())
        if len(times) == 2:
            line += f"  speedup {times['python'] / times['cython']:5.1f}x"
        print(f"{name:<20} {line}")
    times = {b: scenario_time(m, max(1, args.repeat // 2)) for b, m in backends}
    line = " ".join(f"{b} {t:7.3f} s" for b, t in times.items())
    if len(times) == 2:
        line += f"  speedup {times['python'] / times['cython']:5.1f}x"
    print(f"{'scenario N=20 x500':<20} {line}")


if __name__ == "__main__":
    main()
