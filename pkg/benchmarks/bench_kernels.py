"""Time the compiled kernels against their interpreted / numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Compilation happens before timing starts, so only steady-state runs are compared.
"""
import argparse
import time

import numpy as np

from mecsim.interference import hex_layout, sample_positions, snapshot_sinr
from mecsim.sim import run
from mecsim.workload import VideoCatalog, generate_trace, shuffle_popularity


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    catalog = VideoCatalog()
    profile = shuffle_popularity(1000, 5, 0)
    trace = generate_trace(profile, catalog, 2.0, 86400.0, seed=0)
    layout = hex_layout(2, 100.0)
    xy = sample_positions(layout, 2000, np.random.default_rng(0))
    l2 = np.zeros(xy.shape[:2], dtype=bool)

    cases = {
        f"run() incl. placement ({len(trace)} requests)": (
            lambda: run(catalog, profile, trace, "copro-cocache", 0.3, 40.0, warmup=3600.0),
            lambda: run(catalog, profile, trace, "copro-cocache", 0.3, 40.0, warmup=3600.0, python=True),
        ),
        f"snapshot sinr ({xy.shape[0]} snapshots x {xy.shape[1]} cells)": (
            lambda: snapshot_sinr(xy, layout.bs_positions, 0.2, 3.5, 1e-13, l2, 0.0, use_numba=True),
            lambda: snapshot_sinr(xy, layout.bs_positions, 0.2, 3.5, 1e-13, l2, 0.0, use_numba=False),
        ),
    }
    print(f"{'kernel':<48} {'numba s':>10} {'fallback s':>11} {'speedup':>8}")
    for name, (fast, slow) in cases.items():
        fast()  # compile
        tf, ts = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{name:<48} {tf:>10.4f} {ts:>11.4f} {ts / tf:>7.1f}x")


if __name__ == "__main__":
    main()
