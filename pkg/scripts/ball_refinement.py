"""Mean Lambda of a ball facet for a sequence of grid sizes.

    python3 scripts/ball_refinement.py --radius 0.25 --sizes 64 128 256
"""
import argparse
import time

from tvflow.experiments import ball_description
from tvflow.facets import CurvatureConfig, ObstacleConfig, make_pair, nonlocal_curvature_obstacle, nonlocal_curvature_resolvent
from tvflow.grid import PeriodicGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radius", type=float, default=0.25)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--tol", type=float, default=0.02)
    args = ap.parse_args()
    expected = -args.dim / args.radius
    print(f"{'N':>5} {'method':>18} {'mean':>10} {'rel err':>9} {'seconds':>8}")
    for n in args.sizes:
        pair = make_pair(ball_description(args.dim, args.radius), PeriodicGrid(args.dim, n))
        for fn, cfg in ((nonlocal_curvature_obstacle, ObstacleConfig(tol=args.tol)), (nonlocal_curvature_resolvent, CurvatureConfig(tol=args.tol))):
            t = time.perf_counter()
            est = fn(pair, cfg)
            mean = est.summary()["mean"]
            print(f"{n:5d} {est.method:>18} {mean:10.4f} {abs(mean / expected - 1):9.2e} {time.perf_counter() - t:8.1f}")


if __name__ == "__main__":
    main()
