"""Compare the compiled and pure-numpy level-recursion kernels.

Run ``python benchmarks/bench_kernels.py``.  Each case is timed with
``timeit`` (best of several repeats) on both backends, and the outputs are
checked for agreement before any timing is printed.
"""

import argparse
import timeit

import numpy as np

from lctrunc import RetrialParams, resolvent_summary, retrial_generator, solve_stationary_ldqbd
from lctrunc import kernels
from lctrunc.stationary import gaver_rmatrices


def kernel_inputs(s, n, rho=0.9):
    Q = retrial_generator(RetrialParams.from_rho(rho, s=s))
    m = s + 1
    blocks = [Q.qbd_blocks(k) for k in range(n + 1)]
    ap = np.zeros((n, m, m))
    dg = np.zeros((n + 1, m, m))
    am = np.zeros((n + 1, m, m))
    for k in range(1, n + 1):
        a_m, a_0, a_p = blocks[k]
        dg[k] = -a_0
        if k >= 2:
            am[k] = a_m
        if k < n:
            ap[k] = a_p
    terminal = -blocks[n][1] - blocks[n][2]
    return Q, (ap, dg, am, terminal, 1)


def cases(s, n):
    Q, rargs = kernel_inputs(s, n)
    _, R, _ = gaver_rmatrices(Q, n)
    x0 = np.random.default_rng(0).uniform(0, 1, (s + 1, s + 1))
    yield "rmatrix_backward", lambda b: kernels.rmatrix_backward(*rargs, backend=b)
    yield "forward_rows", lambda b: kernels.forward_rows(x0[0], R, 1, n, backend=b)
    yield "sweep_colmin", lambda b: kernels.sweep_colmin(x0, R, 1, n, backend=b)
    yield "solve_stationary_ldqbd", lambda b: solve_stationary_ldqbd(Q, n, backend=b).pi
    yield "resolvent_summary", lambda b: resolvent_summary(Q, 20, n, 0.1, backend=b).colmin


def best_time(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="2:400,10:400,50:200", help="comma-separated s:n pairs")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if kernels.BACKEND != "compiled":
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    print(f"{'case':<24}{'s':>4}{'n':>6}{'python [ms]':>14}{'compiled [ms]':>15}{'speedup':>9}")
    for pair in args.sizes.split(","):
        s, n = (int(x) for x in pair.split(":"))
        for name, run in cases(s, n):
            a, b = run("python"), run("compiled")
            np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-300)
            tp = best_time(lambda: run("python"), args.repeat)
            tc = best_time(lambda: run("compiled"), args.repeat)
            print(f"{name:<24}{s:>4}{n:>6}{tp * 1e3:>14.3f}{tc * 1e3:>15.3f}{tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
