"""Timing comparison of the compiled kernels against the numpy fallback.

Runs forward and forward+backward passes of the forecaster at the default
model size over a range of batch sizes, checks that both backends agree, and
prints a small table with the speedup.

Usage: python benchmarks/bench_kernels.py [--batches 16,64,256] [--repeats 20]
"""

import argparse
import time

import numpy as np

from fedcast import model as mo
from fedcast.kernels import reference
from fedcast.numerics import make_rng

try:
    from fedcast.kernels import _core as compiled
except ImportError:
    compiled = None


def bench(fn, repeats):
    fn()  # warm up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batches", default="16,64,256",
                        help="comma-separated batch sizes")
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    batches = [int(b) for b in args.batches.split(",")]

    dims = mo.ModelDims()
    params = mo.init_params(make_rng(0), dims)
    packed = mo._pack(params, dims)
    rng = make_rng(1)

    if compiled is None:
        print("compiled extension not importable; timing the numpy backend only")
    backends = [("python", reference)] + ([("compiled", compiled)] if compiled else [])

    print(f"{'batch':>6} {'pass':<10}" + "".join(f" {name:>12}" for name, _ in backends)
          + (" " + "speedup".rjust(9) if compiled else ""))
    for batch in batches:
        x = rng.normal(size=(batch, dims.lookback, dims.input_size))
        dy = rng.normal(size=batch)

        # agreement check before timing
        if compiled is not None:
            y_ref, c_ref = reference.forward_batch(x, *packed)
            y_com, c_com = compiled.forward_batch(x, *packed)
            assert np.allclose(y_ref, y_com, rtol=1e-10, atol=1e-12)
            g_ref = reference.backward_batch(c_ref, dy)
            g_com = compiled.backward_batch(c_com, dy)
            for a, b in zip(g_ref, g_com):
                assert np.allclose(a, b, rtol=1e-10, atol=1e-12)

        for label, run in (
            ("forward", lambda mod: mod.forward_batch(x, *packed)),
            ("fwd+bwd", lambda mod: mod.backward_batch(mod.forward_batch(x, *packed)[1], dy)),
        ):
            row = f"{batch:>6} {label:<10}"
            secs = {}
            for name, mod in backends:
                secs[name] = bench(lambda m=mod: run(m), args.repeats)
                row += f" {secs[name] * 1e3:>10.2f}ms"
            if compiled is not None:
                row += f" {secs['python'] / secs['compiled']:>8.2f}x"
            print(row)


if __name__ == "__main__":
    main()
