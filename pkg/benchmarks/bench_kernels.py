"""Time the numba and numpy kernels on spectrum-sized workloads.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Workloads are the full DBT product expansion (every overtone and
combination line above weight 1e-6) on its adaptive grid, plus a
synthetic exponential sum the size of an oracle correlator.
"""

import argparse
import json
import time

import numpy as np

from vibromollow import analytic, kernels
from vibromollow.constants import HBAR, mev_to_rate
from vibromollow.presets import dbt_system


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def workloads():
    system = dbt_system(10.0)
    model = analytic.g1_multimode_general(system, 1e-6)
    lo = float(model.frequency.min() * HBAR) - 1.0
    grid = analytic.adaptive_grid(model, lo, 1.0, 0.01, min_weight=1e-6 * np.abs(model.amplitude).max())
    yield ("lorentzian_sum", f"DBT general: {len(model)} terms x {grid.size} points",
           kernels.lorentzian_sum_jit, kernels.lorentzian_sum_numpy,
           (model.amplitude, model.decay, model.frequency, mev_to_rate(grid)))

    rng = np.random.default_rng(7)
    n = 1600
    coef = rng.normal(size=n) + 1j * rng.normal(size=n)
    rate = -rng.uniform(0.01, 2.0, n) + 1j * rng.uniform(-50, 50, n)
    tau = np.arange(3001) * 0.01
    yield ("exp_sum", f"{n} eigenmodes x {tau.size} delays", kernels.exp_sum_jit, kernels.exp_sum_numpy,
           (coef, rate, tau))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", help="write results here as well")
    args = p.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        print("numba unavailable; only the numpy path can run")
    rows = []
    for name, desc, jit_fn, np_fn, fargs in workloads():
        jit_fn(*fargs)  # compile / load cache outside the timed region
        t_jit, a = _best(jit_fn, fargs, args.repeat)
        t_np, b = _best(np_fn, fargs, args.repeat)
        err = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
        rows.append({"kernel": name, "workload": desc, "numba_s": t_jit, "numpy_s": t_np,
                     "speedup": t_np / t_jit, "max_rel_diff": err})
        print(f"{name:15s} {desc:45s} numba {t_jit * 1e3:9.2f} ms  numpy {t_np * 1e3:9.2f} ms  "
              f"x{t_np / t_jit:5.2f}  diff {err:.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
