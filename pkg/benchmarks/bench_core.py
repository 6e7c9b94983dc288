"""Compare the compiled and numpy backends of the path core.

    python benchmarks/bench_core.py [--paths 500] [--points 1501] [--repeat 5]

Both backends run on the same simulated paths; the script reports the best
wall time of each and the largest relative disagreement.
"""
import argparse
import time

import numpy as np

from gvp import core
from gvp.simulate import simulate_paths, uniform_grid


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=500)
    ap.add_argument("--points", type=int, default=1501)
    ap.add_argument("--t-max", type=float, default=15.0)
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    grid = uniform_grid(args.t_max, args.points)
    x = simulate_paths((0.0, 0.0, 0.0), grid, 0, args.paths).values
    consts = core.cell_constants(grid, args.theta)
    idx = [grid.size // 3, 2 * grid.size // 3, grid.size - 1]

    backends = {"python": core.load_backend("python")}
    try:
        backends["cython"] = core.load_backend("cython")
    except ImportError:
        print("compiled core not available; timing the numpy backend only")

    results = {}
    print(f"{args.paths} paths x {args.points} points, best of {args.repeat}")
    for name, mod in backends.items():
        t_rec, z = best_of(lambda: mod.linear_recurrence(x, consts[:, 0], consts[:, 1]), args.repeat)
        t_fun, f = best_of(lambda: mod.path_functionals(x, consts, idx), args.repeat)
        results[name] = (z, f)
        print(f"  {name:7s} recurrence {t_rec * 1e3:8.2f} ms   functionals {t_fun * 1e3:8.2f} ms")

    if len(results) == 2:
        (zp, fp), (zc, fc) = results["python"], results["cython"]
        dz = np.max(np.abs(zp - zc) / np.maximum(np.abs(zp), 1e-300))
        df = np.max(np.abs(fp - fc) / np.maximum(np.abs(fp), 1e-300))
        print(f"  max relative difference: recurrence {dz:.1e}, functionals {df:.1e}")


if __name__ == "__main__":
    main()
