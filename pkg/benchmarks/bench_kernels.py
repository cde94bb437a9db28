"""Compiled vs numpy kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-N wall time for each backend and
the speedup.  Exits quietly with a note when the extension is not built.
"""
import argparse
import timeit

import numpy as np

from dressedtls import _kernels_py

try:
    from dressedtls import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None


def cases():
    rng = np.random.default_rng(0)
    xs = rng.uniform(0.0, 20.0, 20000)
    npts = 20000
    alpha = rng.uniform(0.0, 5.0, npts)
    eta = rng.uniform(0.0, np.pi, npts)
    n = rng.integers(0, 3, npts)
    coef_args = (alpha, np.cos(eta), np.sin(eta) ** 2, n, 0.37, 25)
    return [
        ("bessel_table x=12.5 nmax=40", "bessel_table", (12.5, 40)),
        ("bessel_table_many 20k pts nmax=40", "bessel_table_many", (xs, 40)),
        ("dressed_coefficients 20k pts m_max=25", "dressed_coefficients", coef_args),
        ("magnus_propagate 4000 steps", "magnus_propagate", (7.2e9, 0.3e9, 0.8, 7e9, 4000)),
    ]


def best_time(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _compiled is None:
        print("compiled kernels not built; only the numpy backend is available")
        return
    print(f"{'kernel':42s} {'cython':>12s} {'numpy':>12s} {'speedup':>8s}")
    for label, name, fargs in cases():
        t_c = best_time(getattr(_compiled, name), fargs, args.repeat)
        t_p = best_time(getattr(_kernels_py, name), fargs, args.repeat)
        print(f"{label:42s} {t_c * 1e3:10.3f}ms {t_p * 1e3:10.3f}ms {t_p / t_c:7.1f}x")


if __name__ == "__main__":
    main()
