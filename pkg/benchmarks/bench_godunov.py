"""Wall time of the compiled and pure-Python Godunov kernels on the same problem.

    python3 benchmarks/bench_godunov.py [--cells 400 1600 6400] [--T 1] [--repeat 3]

Both backends run the AB-connection Riemann problem plus a smooth bump and
must agree to rounding; the table reports the best of ``repeat`` runs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from abflux import PolyFlux, Profile, connection_from_level, evolve, make_grid, validate_flux_pair
from abflux.solver import _godunov_core


def setup():
    pair = validate_flux_pair(PolyFlux([0, 0, 0.5]), PolyFlux([0, -0.5, 1]), (-3, 3))
    conn = connection_from_level(pair, 0.125)
    xs = np.linspace(-2, 2, 81)
    us = 0.6 * np.exp(-4 * (xs + 1) ** 2) - 0.5 * (xs > 0)
    return pair, conn, Profile.from_points(xs, us)


def best_time(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+", default=[400, 1600, 6400])
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    pair, conn, u0 = setup()
    if _godunov_core is None:
        print("compiled kernel not built; only the python backend is timed")
    print(f"{'cells':>7} {'steps':>7} {'python s':>10} {'compiled s':>11} {'speedup':>8} {'max diff':>10}")
    for n in args.cells:
        grid = make_grid(-4, 4, n)
        t_py, f_py = best_time(lambda: evolve(u0, args.T, pair, conn, grid, backend="python"), args.repeat)
        if _godunov_core is None:
            print(f"{n:>7} {f_py.diagnostics['steps']:>7} {t_py:>10.4f} {'-':>11} {'-':>8} {'-':>10}")
            continue
        t_c, f_c = best_time(lambda: evolve(u0, args.T, pair, conn, grid, backend="compiled"), args.repeat)
        diff = float(np.max(np.abs(f_py.final - f_c.final)))
        print(f"{n:>7} {f_c.diagnostics['steps']:>7} {t_py:>10.4f} {t_c:>11.4f} {t_py / t_c:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
