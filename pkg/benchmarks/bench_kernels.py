"""Compare the compiled and pure-numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeats 20]

Prints the median time per call of each kernel variant and the maximum
absolute difference between their outputs.
"""

import argparse
import statistics
from timeit import default_timer as timer

import numpy as np

from cyclopass import _kernels as K


def _median_time(fn, args, repeats):
    fn(*args)  # warm-up (triggers compilation for numba)
    samples = []
    for _ in range(repeats):
        start = timer()
        fn(*args)
        samples.append(timer() - start)
    return statistics.median(samples)


def _cases(rng):
    n, m, steps = 4, 2, 20_000
    A = rng.standard_normal((n, n))
    A = A - A.T - 0.1 * np.eye(n)
    B = rng.standard_normal((n, m))
    x0 = rng.standard_normal(n)
    u = rng.standard_normal((steps + 1, m))
    um = rng.standard_normal((steps, m))
    t = np.linspace(0.0, 1.0, 200_001)
    s = np.sin(7.0 * t) + 0.1 * rng.standard_normal(t.size)
    d = np.cumsum(rng.standard_normal(200_000))
    return [
        ("rk4_affine", K.rk4_affine_numba, K.rk4_affine_numpy, (A, B, x0, u, um, 1e-4)),
        ("cumtrapz", K.cumtrapz_numba, K.cumtrapz_numpy, (t, s)),
        ("min_forward_gain", K.min_forward_gain_numba, K.min_forward_gain_numpy, (d,)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"numba available: {K.HAVE_NUMBA}; active backend: {K.backend()}")
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fast, ref, fargs in _cases(rng):
        tf = _median_time(fast, fargs, args.repeats)
        tr = _median_time(ref, fargs, max(3, args.repeats // 4))
        a, b = fast(*fargs), ref(*fargs)
        if isinstance(a, tuple):
            diff = abs(float(a[0]) - float(b[0]))
        else:
            diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{name:<18}{1e3 * tf:>12.3f}{1e3 * tr:>12.3f}{tr / tf:>10.1f}{diff:>14.3g}")


if __name__ == "__main__":
    main()
