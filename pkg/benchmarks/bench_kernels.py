"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, size): best-of-``repeat`` wall time for each
backend, the speedup, and the max abs difference between their outputs.
Also times one end-to-end estimate with each backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from misscov._backend import get_kernels


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def _cases(gen):
    for n, m in ((1000, 500), (8000, 1000)):
        q = np.ascontiguousarray(np.abs(gen.standard_t(5, size=(n, m))))
        yield f"psi_colsum {n}x{m}", lambda k, q=q: np.asarray(k.psi_colsum(q, 0.3))
    for d in (10, 30, 60):
        a = gen.standard_normal((d, d))
        a = 0.5 * (a + a.T)
        yield f"jacobi_eigh d={d}", lambda k, a=a: np.asarray(k.jacobi_eigh(a)[0])
    for d in (5, 10):
        m = d * (d - 1) // 2
        a = np.ascontiguousarray(gen.standard_normal((60 * d, m)))
        b = np.ascontiguousarray(gen.standard_normal(60 * d))
        radius = 2.0 * float(np.max(np.abs(b))) * d
        yield (f"subgradient d={d}",
               lambda k, a=a, b=b, r=radius: np.asarray(k.subgradient_minimax(a, b, False, 5000, r)[0]))


_PIPELINE = """
import time
from misscov import datagen, estimate_covariance, EstimatorConfig
from misscov._backend import BACKEND
spec = datagen.build_covariance(10, datagen.Spectrum.geometric(0.7), 7)
y = datagen.sparsify(datagen.sample_gaussian(spec, 8000, 1), 0.5, 1)
best = min((lambda t: (estimate_covariance(y, EstimatorConfig(seed=1)), time.perf_counter() - t)[1])(time.perf_counter()) for _ in range({r}))
print(BACKEND, best)
"""


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        fast = get_kernels("cython")
    except ImportError:
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    slow = get_kernels("python")
    gen = np.random.default_rng(0)
    print(f"{'kernel':<26}{'cython s':>12}{'python s':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fn in _cases(gen):
        tf = _best(lambda: fn(fast), args.repeat)
        ts = _best(lambda: fn(slow), args.repeat)
        diff = float(np.max(np.abs(fn(fast) - fn(slow))))
        print(f"{name:<26}{tf:>12.5f}{ts:>12.5f}{ts / tf:>10.1f}{diff:>14.3g}")
    print("\nend-to-end estimate_covariance (d=10, N=8000, p=0.5):")
    for backend in ("cython", "python"):
        env = dict(os.environ, MISSCOV_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", _PIPELINE.format(r=args.repeat)],
                             env=env, capture_output=True, text=True, check=True)
        name, secs = out.stdout.split()
        print(f"  {name:<8}{float(secs):.4f} s")


if __name__ == "__main__":
    main()
