"""Timing comparison of the jitted and pure-numpy kernel backends.

Workload mirrors real analysis traffic: splines fitted to a 241-point
tracker stream, evaluated at report density, plus the shift scans both
estimators run.  Usage::

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from adsb_ul.kernels import _numpy as numpy_impl
from adsb_ul.spline import fit_smoothing_spline

try:
    from adsb_ul.kernels import _numba as numba_impl
except ImportError:
    numba_impl = None


def build_workload(seed=7):
    rng = np.random.default_rng(seed)
    # 241 knots, the shape of a 240 s track sampled at 1 Hz
    t = np.arange(241.0)
    g = fit_smoothing_spline(t, 100.0 * t + rng.normal(0.0, 20.0, 241), 241 * 144.0)

    eval_ts = rng.uniform(t[0], t[-1], 10_000)
    toas = np.sort(rng.uniform(t[0] + 1.0, t[-1] - 1.0, 480))
    px = 100.0 * toas + rng.normal(0.0, 12.0, 480)
    py = rng.normal(0.0, 12.0, 480)
    epu = np.full(480, 30.0)
    shifts = np.linspace(-1.0, 1.0, 201)
    return g, eval_ts, toas, px, py, epu, shifts


def bench(impl, repeat):
    g, eval_ts, toas, px, py, epu, shifts = build_workload()
    fine = np.linspace(-1.0, 1.0, 2001)

    def run_eval():
        impl.ppoly_eval(g.knots, g.coefs, eval_ts, 0)

    def run_scan():
        impl.shift_scan(g.knots, g.coefs, g.knots, g.coefs,
                        toas, px, py, epu, shifts)

    def run_fine_scan():
        impl.shift_scan(g.knots, g.coefs, g.knots, g.coefs,
                        toas, px, py, epu, fine)

    results = {}
    for name, fn in (("ppoly_eval 10k pts", run_eval),
                     ("shift_scan 201 shifts", run_scan),
                     ("shift_scan 2001 shifts", run_fine_scan)):
        fn()  # warm up (jit compile / cache touch)
        times = timeit.repeat(fn, number=5, repeat=repeat)
        results[name] = min(times) / 5
    return results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5,
                    help="timeit repeats per case (default 5)")
    args = ap.parse_args()

    numpy_res = bench(numpy_impl, args.repeat)
    numba_res = bench(numba_impl, args.repeat) if numba_impl else None

    width = max(len(k) for k in numpy_res)
    header = f"{'workload':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, t_np in numpy_res.items():
        if numba_res is None:
            print(f"{name:<{width}}  {t_np * 1e3:>8.3f}ms  {'n/a':>10}  {'n/a':>8}")
        else:
            t_nb = numba_res[name]
            print(f"{name:<{width}}  {t_np * 1e3:>8.3f}ms  "
                  f"{t_nb * 1e3:>8.3f}ms  {t_np / t_nb:>7.1f}x")
    if numba_res is None:
        print("\nnumba not importable; only the numpy backend was timed")


if __name__ == "__main__":
    main()
