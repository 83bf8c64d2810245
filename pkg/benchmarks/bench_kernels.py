"""Descent-kernel benchmark: compiled path vs interpreted fallback.

Times the curve solver on representative couples from both structural
families.  Run as a script:

    python3 benchmarks/bench_kernels.py

Set WALPHA_DISABLE_NUMBA=1 before importing to check what the fallback alone
feels like in the library; this script always times both paths explicitly.
"""

import time

import numpy as np

from walpha import _kernels
from walpha.interpolation import _starts_for, seq_f_couple, weighted_lp_couple
from walpha.seqspaces import random_flatseq

REPEATS = 3


def group_case(n, seed):
    rng = np.random.default_rng(seed)
    couple = weighted_lp_couple(rng.uniform(0.3, 1.5, n), rng.uniform(0.3, 1.5, n), 1.5, 2.0)
    return couple, rng.uniform(0.1, 3.0, n)


def cell_case(J, seed):
    rng = np.random.default_rng(seed)
    lam = random_flatseq(rng, 1, J)
    couple = seq_f_couple(lam, 1.0, 2.0, 1.0, 0.0)
    return couple, np.abs(couple.values)


def time_one(fn, args):
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(label, couple, v, ts):
    pl = couple.payload
    starts = _starts_for(couple.size, couple.convex)
    if hasattr(pl, "grp"):
        args = (ts, v, pl.a1, pl.a2, pl.p1g, pl.p2g, pl.grp, starts, True)
        py, nb = _kernels.py_kcurve_group, _kernels.nb_kcurve_group
    else:
        args = (ts, v, pl.a1, pl.a2, pl.mass, pl.comp, pl.p1c, pl.p2c, pl.q1c,
                pl.q2c, pl.cellidx, pl.ptr, pl.entcomp, starts, True)
        py, nb = _kernels.py_kcurve_cell, _kernels.nb_kcurve_cell
    t_py = time_one(py, args)
    if nb is None:
        print(f"{label:<28} numpy {t_py * 1e3:9.2f} ms   (numba unavailable)")
        return
    nb(*args)  # compile outside the timing loop
    t_nb = time_one(nb, args)
    kp, _ = py(*args)
    kn, _ = nb(*args)
    drift = float(np.max(np.abs(kp - kn)))
    print(f"{label:<28} numpy {t_py * 1e3:9.2f} ms   numba {t_nb * 1e3:9.2f} ms"
          f"   speedup {t_py / t_nb:6.1f}x   max|diff| {drift:.1e}")


def main():
    ts = 2.0 ** (np.arange(-64, 65) / 8.0)
    print(f"curve grid: {ts.size} points, {REPEATS} repeats, best-of shown")
    print(f"numba available: {_kernels.NUMBA_ENABLED}")
    for n in (8, 32):
        couple, v = group_case(n, 90 + n)
        bench(f"group n={n}", couple, v, ts)
    for J in (3, 5):
        couple, v = cell_case(J, 80 + J)
        bench(f"cell J={J} (n={couple.size})", couple, v, ts)


if __name__ == "__main__":
    main()
