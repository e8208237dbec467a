"""Time the compiled kernels against the numpy fallback on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each workload is run on both backends with the same inputs; the outputs are
checked for agreement before any timing is reported.
"""
import argparse
import time

import numpy as np

from seedbank import kernels
from seedbank.forward import brownian_increments, n_steps
from seedbank.measure import SeedBankMeasure, kernel_cdf
from seedbank.rng import Purpose, stream_keys

TWO = SeedBankMeasure.discrete([(0.5, 1.0), (2.0, 1.0)])


def workloads():
    rates, masses = TWO.rates, TWO.masses
    keys = stream_keys(0, Purpose.FORWARD, 20_000)
    steps = n_steps(1.0, 1e-3)
    rec = np.array([steps // 2, steps], dtype=np.int64)
    dw = brownian_increments(0, 1e-3, steps)
    grid = np.arange(steps + 1) * 1e-3
    weights = np.asarray(kernel_cdf(TWO, grid)) * 2.0 - 2.0
    offset = np.full(steps + 1, 0.5)
    dual_keys = stream_keys(0, Purpose.DUAL, 100_000)
    m0 = np.zeros(2, dtype=np.int64)
    return {
        "em_ensemble 20k paths x 1000 steps": lambda k: k.em_ensemble(
            keys, 0.5, np.array([0.25, 0.75]), rates, masses, 1e-3, steps, rec),
        "em_path 1000 steps": lambda k: k.em_path(0.5, np.array([0.25, 0.75]), rates, masses, 1e-3, dw),
        "sve_path 1000 steps": lambda k: k.sve_path(0.5, offset, weights, 1e-3, dw),
        "count_chain 100k chains, n0=5, t=1": lambda k: k.count_chain(
            dual_keys, 5, m0, rates, masses, 1.0, 0)[:2],
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if "compiled" not in kernels.BACKENDS:
        raise SystemExit("compiled extension not built; run `python3 setup.py build_ext --inplace`")
    print(f"{'workload':40s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}")
    for name, fn in workloads().items():
        tc, oc = best_of(lambda: fn(kernels.get("compiled")), args.repeat)
        tp, op = best_of(lambda: fn(kernels.get("python")), args.repeat)
        for a, b in zip(oc if isinstance(oc, tuple) else (oc,), op if isinstance(op, tuple) else (op,)):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
        print(f"{name:40s} {tc:9.3f}s {tp:9.3f}s {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
