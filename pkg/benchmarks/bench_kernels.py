"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from coevo import _backend
from coevo.dynamics import ActivationSchedule, ControlSets, simulate
from coevo.network import ModelParams, make_family
from coevo.search import AdmissibilityOracle, admissibility_table, chain_occupancy


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = ["python"]
    try:
        _backend.load("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled extension not built; timing the fallback only")

    net = make_family("contact", 84, seed=0, edges=346)
    params = ModelParams.homogeneous(84, 0.5, 0.5)
    control = ControlSets(range(20), range(20))
    small = make_family("random_regularized", 12, seed=1)
    small_params = ModelParams.homogeneous(12, 0.3, 0.6)
    oracle = AdmissibilityOracle(small, small_params, range(12), range(12))
    table = admissibility_table(oracle)

    cases = {
        "simulate round_robin n=84, 20k steps": lambda b: simulate(
            net, params, control, ActivationSchedule("round_robin"), 20_000, opinion_tol=0.0, backend=b),
        "simulate synchronous n=84, 2k steps": lambda b: simulate(
            net, params, control, ActivationSchedule("synchronous"), 2_000, opinion_tol=0.0, backend=b),
        "chain walk n*=12, 1e6 iterations": lambda b: chain_occupancy(
            oracle, 0.1, 10**6, 0, table=table, backend=b),
    }
    print(f"{'case':40s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases.items():
        ts = [best_of(lambda: fn(b), args.repeat) for b in backends]
        row = f"{name:40s}" + "".join(f"{t:11.3f}s" for t in ts)
        if len(ts) == 2:
            row += f"{ts[1] / ts[0]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
