"""Wall-clock comparison of the python and compiled RK4IP backends.

    python benchmarks/bench_kernels.py [--M 256 1024] [--steps 4000] [--batch 1 8]

Reports seconds per step, the speedup of the compiled core, and the largest
field difference between the two backends after the run.
"""

import argparse
import time

import numpy as np

from fvac import kernels
from fvac.dynamics import evolve_fields
from fvac.initstate import sample_initial
from fvac.lattice import build_lattice
from fvac.params import DimensionlessParams


def _time(psi, p, lat, dt, steps, backend, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = evolve_fields(psi, p, lat, dt, steps, steps, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out[-1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, nargs="+", default=[256, 1024])
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--batch", type=int, nargs="+", default=[1])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; timing python only")
    p = DimensionlessParams()
    dt = 7.5e-4
    print(f"{'M':>6} {'batch':>5} " + " ".join(f"{b + ' us/step':>18}" for b in backends) + f" {'speedup':>8} {'max|diff|':>10}")
    for M in args.M:
        lat = build_lattice(M, p.L)
        for nb in args.batch:
            samples = [sample_initial("thermal", lat, p, 1, i) for i in range(nb)]
            psi = np.stack([np.stack([s.psi1, s.psi2]) for s in samples])
            if nb == 1:
                psi = psi[0]
            res = {b: _time(psi, p, lat, dt, args.steps, b, args.repeat) for b in backends}
            us = {b: 1e6 * res[b][0] / args.steps for b in backends}
            row = f"{M:>6} {nb:>5} " + " ".join(f"{us[b]:>18.1f}" for b in backends)
            if len(backends) == 2:
                diff = np.max(np.abs(res["compiled"][1] - res["python"][1]))
                row += f" {us['python'] / us['compiled']:>8.2f} {diff:>10.1e}"
            print(row)


if __name__ == "__main__":
    main()
