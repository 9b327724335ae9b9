"""Distance between smoothed flows and the TV semigroup at time T, for a list of m.

    python3 scripts/stability_ladder.py --N 64 --m 10 100 1000
"""
import argparse

import numpy as np

from tvflow.energy import SmoothedEnergy
from tvflow.experiments import bump_data
from tvflow.flow import EllipticOperatorF, FlowConfig, evolve, evolve_semigroup_tv
from tvflow.grid import PeriodicGrid
from tvflow.resolvent import ResolventConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--T", type=float, default=0.05)
    ap.add_argument("--m", type=float, nargs="+", default=[10.0, 100.0, 1000.0])
    ap.add_argument("--steps", type=int, default=50, help="implicit steps for the semigroup")
    args = ap.parse_args()
    grid = PeriodicGrid(2, args.N)
    u0 = bump_data(grid, 0.3, 4.0)
    dt = args.T / args.steps
    ref = evolve_semigroup_tv(u0, dt, args.T, grid, ResolventConfig(dt, tol=1e-7)).final
    span = float(u0.max() - u0.min())
    for m in args.m:
        u = evolve(u0, EllipticOperatorF.tv_flow(), FlowConfig(SmoothedEnergy(m), args.T), grid).final
        err = float(np.max(np.abs(u - ref)))
        print(f"m={m:<8g} max|u_m - S(T)u0| = {err:.4e}  relative {err / span:.3e}")


if __name__ == "__main__":
    main()
