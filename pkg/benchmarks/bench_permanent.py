"""Time the compiled and pure-Python permanent kernels on random unitaries.

    python3 benchmarks/bench_permanent.py --sizes 4 6 8 10 12 --repeat 5
"""

import argparse
import timeit

import numpy as np

from fusionflow.permanent import permanent_ext, permanent_py


def random_unitary(n, rng):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def best_time(fn, m, repeat):
    number = 1
    while timeit.timeit(lambda: fn(m), number=number) < 0.05 and number < 1 << 16:
        number *= 4
    return min(timeit.repeat(lambda: fn(m), number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[2, 4, 6, 8, 10, 12])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print("n\tpython_s\tcython_s\tspeedup\tmax_abs_diff")
    for n in args.sizes:
        m = random_unitary(n, rng)
        tp = best_time(permanent_py, m, args.repeat)
        if permanent_ext is None:
            print(f"{n}\t{tp:.3e}\t-\t-\t-")
            continue
        tc = best_time(permanent_ext, m, args.repeat)
        diff = abs(permanent_py(m) - permanent_ext(m))
        print(f"{n}\t{tp:.3e}\t{tc:.3e}\t{tp / tc:.1f}\t{diff:.1e}")


if __name__ == "__main__":
    main()
