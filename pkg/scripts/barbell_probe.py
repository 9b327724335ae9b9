"""Lambda on a barbell facet (two balls joined by a neck) for several neck widths."""
import argparse

import numpy as np

from tvflow.facets import ObstacleConfig, calibrable_constant, make_pair, nonlocal_curvature_obstacle
from tvflow.grid import PeriodicGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=128)
    ap.add_argument("--ball", type=float, default=0.12)
    ap.add_argument("--necks", type=float, nargs="+", default=[0.03, 0.05, 0.08])
    args = ap.parse_args()
    grid = PeriodicGrid(2, args.N)
    for neck in args.necks:
        desc = (
            f"ball 0.2 0.5 {args.ball} side=minus\n"
            f"ball 0.8 0.5 {args.ball} side=minus\n"
            f"stadium 0.5 0.5 0.3 0.0 {neck} side=minus"
        )
        pair = make_pair(desc, grid)
        est = nonlocal_curvature_obstacle(pair, ObstacleConfig(tol=0.02))
        vals = est.values[est.mask]
        print(
            f"neck={neck:.3f} lambda_const={calibrable_constant(pair):8.3f} "
            f"min={np.min(vals):8.3f} max={np.max(vals):8.3f} mean={np.mean(vals):8.3f}"
        )


if __name__ == "__main__":
    main()
