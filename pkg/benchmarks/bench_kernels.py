"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--replicas R] [--horizon N]

Both backends consume the same counter-based streams, so the script also
checks that their outputs are identical.
"""

import argparse
import time

import numpy as np

from erwg._kernels import HAVE_NUMBA
from erwg.gaussian_approx import default_matrix_set, matrix_bound_constants, scalar_bound_constants
from erwg.graph import make_config
from erwg.simulator import simulate_ensemble


def timed(fn, repeat=3):
    fn()  # warm-up (numba compilation, caches)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicas", type=int, default=2000)
    ap.add_argument("--horizon", type=int, default=2000)
    ap.add_argument("--grid", type=int, default=500, help="N for the bound sweeps")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    c = make_config(3, [(1, 2), (2, 3), (3, 1), (1, 1)], [0.9, 0.3, 0.6], [0.2, 0.5, 0.9])
    B = default_matrix_set()["rotation p=(0.9,0.2)"]
    cases = {
        "conditional walk": lambda be: simulate_ensemble(
            c, args.replicas, args.horizon, 1, mechanism="conditional", backend=be).S,
        "literal walk": lambda be: simulate_ensemble(
            c, args.replicas, args.horizon, 1, mechanism="literal", backend=be).S,
        "scalar bounds": lambda be: scalar_bound_constants(0.3 + 0.4j, args.grid, be),
        "matrix bounds": lambda be: matrix_bound_constants(B, args.grid, be),
    }
    print(f"{'kernel':<18} {'numpy s':>10} {'numba s':>10} {'speedup':>9}  same")
    for name, fn in cases.items():
        t_np, a = timed(lambda: fn("numpy"))
        t_nb, b = timed(lambda: fn("numba"))
        same = np.array_equal(a, b) if a.dtype.kind == "i" else np.allclose(a, b, rtol=1e-12)
        print(f"{name:<18} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
