"""Named experiment scenarios.

Each scenario reads a parameter dict (typed by its defaults), writes fields and
plot-ready CSVs into its output directory and returns a list of assertions.
``summary.csv`` gets one row per assertion; wall-clock limits go to
``timing.csv`` so that the summary is byte-identical across runs with the same
seed.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import ExperimentConfig
from .energy import SmoothedEnergy, fenchel_conjugate_radial, wulff_identity_check, wulff_value
from .errors import ConfigError, ConstructionError, ResolutionError
from .facets import (
    CurvatureConfig,
    ObstacleConfig,
    calibrability_check,
    calibrable_constant,
    curvature_bound_check,
    cutoff_scale,
    inscribed_radius,
    make_pair,
    monotonicity_violations,
    nonlocal_curvature_obstacle,
    nonlocal_curvature_resolvent,
    radial_profile_rows,
    write_estimate,
)
from .flow import (
    BarrierSpec,
    EllipticOperatorF,
    FlowConfig,
    barrier_supersolution_check,
    build_barrier,
    evolve,
    evolve_semigroup_tv,
)
from .grid import PeriodicGrid, distance_to_point, divergence_backward, gradient_forward, lipschitz_seminorm
from .io import write_rows, write_tvf1
from .resolvent import ResolventConfig, solve_resolvent_tv

log = logging.getLogger(__name__)


@dataclass
class Assertion:
    name: str
    measured: float
    expected: float | str
    tolerance: float | str
    passed: bool

    def row(self):
        return [self.name, self.measured, self.expected, self.tolerance, self.passed]

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured={_short(self.measured)} expected={_short(self.expected)} tol={_short(self.tolerance)}"


def _short(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


@dataclass
class Outcome:
    scenario: str
    assertions: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    outdir: Path | None = None

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions) and all(a.passed for a in self.timings)

    def check(self, name, measured, expected, tolerance, passed):
        a = Assertion(name, float(measured) if np.isscalar(measured) else measured, expected, tolerance, bool(passed))
        self.assertions.append(a)
        return a

    def time_limit(self, name, seconds, limit):
        a = Assertion(name, float(seconds), f"<= {limit:g} s", limit, seconds <= limit)
        self.timings.append(a)
        return a


@dataclass(frozen=True)
class Scenario:
    name: str
    criterion: int | None
    description: str
    basis: str
    func: Callable
    full: dict
    quick: dict

    def params(self, tier: str = "full", overrides=None) -> dict:
        base = dict(self.full if tier == "full" else {**self.full, **self.quick})
        base.update(overrides or {})
        return base


# --- geometry helpers ---------------------------------------------------------


def ball_description(dim: int, radius: float, center=0.5) -> str:
    c = " ".join([f"{center:g}"] * dim)
    return f"ball {c} {radius!r} side=minus"


def annulus_description(dim: int, r_plus: float, r_minus: float) -> str:
    c = " ".join(["0.5"] * dim)
    return f"ball {c} {r_minus!r} side=minus\nball {c} {r_plus!r} side=plus"


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _write_history(path, est):
    rows = []
    for level in est.params.get("levels", []):
        rows.append([level["a"], level["iterations"], level["residual"], level["gap"]])
    write_rows(path, ["a", "iterations", "residual", "gap"], rows)


# --- scenarios ----------------------------------------------------------------


def run_ball_curvature(p, seed, out: Outcome):
    grid = PeriodicGrid(p["dim"], p["N"])
    pair = make_pair(ball_description(grid.dim, p["radius"]), grid)
    expected = -grid.dim / p["radius"]
    obst, t_obst = _timed(nonlocal_curvature_obstacle, pair, ObstacleConfig(tol=p["solver_tol"]))
    res, t_res = _timed(nonlocal_curvature_resolvent, pair, CurvatureConfig(tol=p["solver_tol"]))
    for est, secs in ((obst, t_obst), (res, t_res)):
        mean = est.summary()["mean"]
        out.check(f"ball mean Lambda ({est.method})", mean, expected, p["rel_tol"], abs(mean - expected) <= p["rel_tol"] * abs(expected))
        out.time_limit(f"ball runtime ({est.method})", secs, p["time_limit"])
        write_estimate(est, pair, out.outdir, f"lambda_{est.method}")
        write_rows(out.outdir / f"radial_{est.method}.csv", ["r", "lambda_mean", "count"], radial_profile_rows(est, grid, [0.5] * grid.dim))
    _write_history(out.outdir / "resolvent_levels.csv", res)


def run_annulus(p, seed, out: Outcome):
    grid = PeriodicGrid(p["dim"], p["N"])
    pair = make_pair(annulus_description(grid.dim, p["r_plus"], p["r_minus"]), grid)
    n = grid.dim
    magnitude = n * (p["r_minus"] ** (n - 1) - p["r_plus"] ** (n - 1)) / (p["r_minus"] ** n - p["r_plus"] ** n)
    # the facet loses mass through the longer outer boundary, so Lambda is negative
    expected = -magnitude
    obst = nonlocal_curvature_obstacle(pair, ObstacleConfig(tol=p["solver_tol"]))
    res = nonlocal_curvature_resolvent(pair, CurvatureConfig(tol=p["solver_tol"]))
    band = p["rel_tol"] * magnitude
    dev = float(np.max(np.abs(obst.on_facet - expected)))
    out.check("annulus Lambda within band (direct-obstacle, max deviation)", dev, 0.0, band, dev <= band)
    calibrable, lam = calibrability_check(obst, pair, rel_tol=p["rel_tol"])
    out.check("annulus calibrable flag (direct-obstacle)", float(calibrable), 1.0, 0.0, calibrable)
    out.check("annulus measured perimeter constant", lam, expected, p["rel_tol"], abs(lam - expected) <= p["rel_tol"] * magnitude)
    mean = res.summary()["mean"]
    out.check("annulus mean Lambda (resolvent-quotient)", mean, expected, p["rel_tol"], abs(mean - expected) <= band)
    diff = abs(obst.summary()["mean"] - mean)
    out.check("annulus estimator agreement of means", diff, 0.0, obst.tolerance + res.tolerance, diff <= obst.tolerance + res.tolerance)
    for est in (obst, res):
        write_estimate(est, pair, out.outdir, f"lambda_{est.method}")
        write_rows(out.outdir / f"radial_{est.method}.csv", ["r", "lambda_mean", "count"], radial_profile_rows(est, grid, [0.5] * n))


def run_whole_torus(p, seed, out: Outcome):
    grid = PeriodicGrid(p["dim"], p["N"])
    pair = make_pair("torus side=minus", grid)
    for est in (
        nonlocal_curvature_obstacle(pair, ObstacleConfig(tol=p["solver_tol"])),
        nonlocal_curvature_resolvent(pair, CurvatureConfig(tol=p["solver_tol"])),
    ):
        worst = float(np.max(np.abs(est.on_facet)))
        out.check(f"whole torus max |Lambda| ({est.method})", worst, 0.0, est.tolerance, worst <= est.tolerance)
        write_estimate(est, pair, out.outdir, f"lambda_{est.method}")


def random_nested_pairs(grid: PeriodicGrid, count: int, rng: np.random.Generator, max_tries: int = 10000):
    """Pairs ``(P1, P2)`` with ``Omega1_minus`` in ``Omega2_minus`` and ``Omega1_plus`` in ``Omega2_plus``.

    Balls only; sizes keep every gap and reach at least 8 cells so the cutoff
    scale stays resolved. Roughly half the draws leave both ``Omega_plus`` empty.
    """
    h = grid.h
    margin = 8 * h
    pairs = []
    tries = 0
    while len(pairs) < count and tries < max_tries:
        tries += 1
        c2 = 0.5 + rng.uniform(-0.05, 0.05, grid.dim)
        R2 = rng.uniform(0.22, 0.34)
        R1 = rng.uniform(0.12, R2 - 0.02)
        off = rng.normal(size=grid.dim)
        off *= rng.uniform(0, R2 - R1) / np.linalg.norm(off)
        c1 = c2 + off
        lines1 = [_ball(c1, R1, "minus")]
        lines2 = [_ball(c2, R2, "minus")]
        if rng.uniform() < 0.5 and 0.5 * R1 > margin:
            s2 = rng.uniform(margin, 0.5 * R1)
            # put the larger hole inside both outer balls, with the smaller one inside it
            d = rng.normal(size=grid.dim)
            d *= rng.uniform(0, max(R1 - s2 - 2 * margin, 0.0)) / np.linalg.norm(d)
            c4 = c1 + d
            s1 = rng.uniform(margin, s2)
            e = rng.normal(size=grid.dim)
            e *= rng.uniform(0, s2 - s1) / np.linalg.norm(e)
            c3 = c4 + e
            lines2.append(_ball(c4, s2, "plus"))
            if rng.uniform() < 0.7:
                lines1.append(_ball(c3, s1, "plus"))
        try:
            p1 = make_pair("\n".join(lines1), grid)
            p2 = make_pair("\n".join(lines2), grid)
        except (ConstructionError, ResolutionError):
            continue
        if min(cutoff_scale(p1), cutoff_scale(p2)) < 3 * h:
            continue
        if not np.any(p1.interior() & p2.interior()):
            continue
        pairs.append((p1, p2, "\n".join(lines1), "\n".join(lines2)))
    if len(pairs) < count:
        raise RuntimeError(f"only {len(pairs)} nested pairs found in {max_tries} draws")
    return pairs


def _ball(c, r, side):
    return "ball " + " ".join(f"{x % 1.0:.6f}" for x in c) + f" {r:.6f} side={side}"


def run_monotonicity(p, seed, out: Outcome):
    grid = PeriodicGrid(p["dim"], p["N"])
    rng = np.random.default_rng(seed)
    pairs = random_nested_pairs(grid, p["pairs"], rng)
    rows = []
    total = 0
    for k, (p1, p2, d1, d2) in enumerate(pairs):
        e1 = nonlocal_curvature_obstacle(p1, ObstacleConfig(tol=p["solver_tol"]))
        e2 = nonlocal_curvature_obstacle(p2, ObstacleConfig(tol=p["solver_tol"]))
        bad = monotonicity_violations(p1, p2, e1, e2)
        common = e1.mask & e2.mask
        worst = float(np.max(e1.values[common] - e2.values[common]))
        rows.append([k, d1.replace("\n", " | "), d2.replace("\n", " | "), int(common.sum()), worst, bad])
        total += bad
    write_rows(out.outdir / "pairs.csv", ["pair", "pair1", "pair2", "common_nodes", "max_lambda1_minus_lambda2", "violations"], rows)
    out.check(f"monotonicity violations over {len(pairs)} nested pairs", total, 0, 0, total == 0)


def run_curvature_bound(p, seed, out: Outcome):
    grid = PeriodicGrid(p["dim"], p["N"])
    geometries = {
        "ball": ball_description(grid.dim, p["radius"]),
        "annulus": annulus_description(grid.dim, p["r_plus"], p["r_minus"]),
    }
    for label, desc in geometries.items():
        pair = make_pair(desc, grid)
        rho = inscribed_radius(pair)
        write_tvf1(out.outdir / f"rho_{label}.tvf1", rho, grid)
        for est in (
            nonlocal_curvature_obstacle(pair, ObstacleConfig(tol=p["solver_tol"])),
            nonlocal_curvature_resolvent(pair, CurvatureConfig(tol=p["solver_tol"])),
        ):
            _, rel = curvature_bound_check(est, pair, rho)
            out.check(f"{label} max (|Lambda| - n/rho)/(n/rho) ({est.method})", rel, 0.0, p["rel_tol"], rel <= p["rel_tol"])


def run_resolvent_comparison(p, seed, out: Outcome):
    grid = PeriodicGrid(p["dim"], p["N"])
    rng = np.random.default_rng(seed)
    x = grid.coords()
    violations = 0
    worst = -math.inf
    rows = []
    t0 = time.perf_counter()
    for k in range(p["pairs"]):
        f1 = _random_field(grid, x, rng)
        bump = np.maximum(0.0, rng.uniform(0.05, 0.5) - distance_to_point(grid, rng.uniform(0, 1, grid.dim)))
        f2 = f1 + rng.uniform(0.0, 2.0) * bump + rng.uniform(0.0, 0.05)
        a = float(np.exp(rng.uniform(np.log(p["a_min"]), np.log(p["a_max"]))))
        cfg = ResolventConfig(a, tol=p["solver_tol"])
        u1 = solve_resolvent_tv(f1, grid, cfg).u
        u2 = solve_resolvent_tv(f2, grid, cfg).u
        excess = float(np.max(u1 - u2))
        bad = int(np.count_nonzero(u1 > u2 + 2 * cfg.tol))
        violations += bad
        worst = max(worst, excess)
        rows.append([k, a, excess, bad])
    elapsed = time.perf_counter() - t0
    write_rows(out.outdir / "pairs.csv", ["pair", "a", "max_u1_minus_u2", "violations"], rows)
    out.check(f"resolvent ordering violations over {p['pairs']} pairs", violations, 0, 2 * p["solver_tol"], violations == 0)
    out.time_limit("resolvent comparison runtime", elapsed, p["time_limit"])


def _random_field(grid, x, rng, modes: int = 4):
    u = np.zeros(grid.shape)
    for _ in range(modes):
        k = rng.integers(-3, 4, size=grid.dim)
        phase = rng.uniform(0, 2 * np.pi)
        u += rng.normal() * np.sin(2 * np.pi * np.tensordot(k, x, axes=1) + phase) / (1 + np.abs(k).sum())
    return u


def run_wulff_identity(p, seed, out: Outcome):
    energy = SmoothedEnergy(p["m"])
    rows = []
    for dim, levels, tol in ((1, p["levels_1d"], p["tol_1d"]), (2, p["levels_2d"], p["tol_2d"])):
        devs = []
        for N in levels:
            grid = PeriodicGrid(dim, N)
            devs.append(wulff_identity_check(energy, grid, radius=p["radius"]))
            rows.append([dim, N, devs[-1]])
        out.check(f"Wulff identity deviation n={dim} N={levels[-1]}", devs[-1], 0.0, tol, devs[-1] <= tol)
        decreasing = all(b < a for a, b in zip(devs, devs[1:]))
        out.check(f"Wulff deviation decreases over N={list(levels)} (n={dim})", float(decreasing), 1.0, 0.0, decreasing)
    write_rows(out.outdir / "refinement.csv", ["dim", "N", "relative_deviation"], rows)
    fenchel_conjugate_radial(energy, 2.0, 256).to_csv(out.outdir / "wulff_profile.csv")


def run_barrier(p, seed, out: Outcome):
    grid = PeriodicGrid(p["dim"], p["N"])
    spec = BarrierSpec(p["A"], p["q"], p["m"])
    rows = []
    for F in (EllipticOperatorF.tv_flow(), EllipticOperatorF.crystalline_graph(p["c"])):
        rep = barrier_supersolution_check(spec, F, grid, slack_rel=p["slack_rel"], raise_on_failure=False)
        out.check(f"barrier residual min ({F.kind})", rep.margin, ">= -slack*B", p["slack_rel"] * rep.B, rep.margin >= -p["slack_rel"] * rep.B)
        rows.append([F.kind, rep.B, rep.C, rep.C_radial, rep.C_grid, rep.margin, str(rep.worst_node)])
    write_rows(out.outdir / "barrier.csv", ["operator", "B", "C", "C_radial", "C_grid", "margin", "worst_node"], rows)
    w = build_barrier(spec, grid)
    write_tvf1(out.outdir / "barrier.tvf1", w, grid)
    lip = lipschitz_seminorm(w, grid)
    out.check("barrier slope cap", lip, p["q"], 5 * grid.h, lip <= p["q"] + 5 * grid.h)


def plateau_data(grid: PeriodicGrid, L: float, height: float, slope: float) -> np.ndarray:
    """1-d plateau of ``round(L N)`` nodes at ``height`` with sides of the given slope."""
    x = grid.coords()[0]
    dist = np.maximum(np.abs(x - 0.5 + grid.h / 2) - L / 2 + 1e-12, 0.0)
    return np.clip(height - slope * dist, 0.0, height)


def run_facet_speed(p, seed, out: Outcome):
    grid = PeriodicGrid(1, p["N"])
    u0 = plateau_data(grid, p["L"], p["height"], p["slope"])
    expected = 2.0 / p["L"]
    T = p["T"]
    times = tuple(np.linspace(0.0, T, 9)[1:-1])
    tr = evolve(u0, EllipticOperatorF.tv_flow(), FlowConfig(SmoothedEnergy(p["m"]), T, snapshot_times=times), grid)
    sg = evolve_semigroup_tv(u0, T / p["semigroup_steps"], T, grid, ResolventConfig(T, tol=1e-10))
    rows = []
    for label, traj in (("evolve", tr), ("semigroup", sg)):
        top = [float(u.max()) for u in traj.snapshots]
        bottom = [float(u.min()) for u in traj.snapshots]
        merged = top[-1] - bottom[-1] <= 0
        rate = (top[0] - top[-1]) / traj.times[-1]
        for t, a, b in zip(traj.times, top, bottom):
            rows.append([label, t, a, b])
        out.check(f"plateau descent rate ({label})", rate, expected, p["rel_tol"], (not merged) and abs(rate - expected) <= p["rel_tol"] * expected)
    write_rows(out.outdir / "plateau_height.csv", ["method", "time", "top", "bottom"], rows)


def lipschitz_initial_data(grid: PeriodicGrid, rng, lip: float) -> np.ndarray:
    u = _random_field(grid, grid.coords(), rng)
    return u * (lip / lipschitz_seminorm(u, grid))


def run_lipschitz(p, seed, out: Outcome):
    grid = PeriodicGrid(p["dim"], p["N"])
    rng = np.random.default_rng(seed)
    times = tuple(np.linspace(0.0, p["T"], p["snapshots"] + 1)[1:-1])
    rows = []
    limit = 1 + 10 * grid.h
    for F in (EllipticOperatorF.tv_flow(), EllipticOperatorF.crystalline_graph(p["c"])):
        worst = 0.0
        for k in range(p["samples"]):
            u0 = lipschitz_initial_data(grid, np.random.default_rng([seed, k]), p["lip"])
            traj = evolve(u0, F, FlowConfig(SmoothedEnergy(p["m"]), p["T"], snapshot_times=times), grid)
            lip0 = lipschitz_seminorm(u0, grid)
            for t, lip, lo, hi, mean in traj.diagnostics():
                rows.append([F.kind, k, t, lip / lip0, lo, hi, mean])
                worst = max(worst, lip / lip0)
        out.check(f"max Lip(u(t))/Lip(u0) ({F.kind})", worst, 1.0, 10 * grid.h, worst <= limit)
    write_rows(out.outdir / "lipschitz.csv", ["operator", "sample", "time", "ratio", "min", "max", "mean"], rows)
    del rng


def bump_data(grid: PeriodicGrid, radius: float, height: float = 1.0) -> np.ndarray:
    """Cone of the given height and support radius centred at (1/2, ..., 1/2)."""
    return height * np.clip(1.0 - distance_to_point(grid, [0.5] * grid.dim) / radius, 0.0, 1.0)


def run_stability_ladder(p, seed, out: Outcome):
    grid = PeriodicGrid(p["dim"], p["N"])
    u0 = bump_data(grid, p["radius"], p["height"])
    T = p["T"]
    ref = evolve_semigroup_tv(u0, T / p["semigroup_steps"], T, grid, ResolventConfig(T, tol=p["semigroup_tol"])).final
    write_tvf1(out.outdir / "semigroup_T.tvf1", ref, grid)
    span = float(u0.max() - u0.min())
    errs = []
    rows = []
    for m in p["m_ladder"]:
        u = evolve(u0, EllipticOperatorF.tv_flow(), FlowConfig(SmoothedEnergy(m), T), grid).final
        errs.append(float(np.max(np.abs(u - ref))))
        rows.append([m, errs[-1], errs[-1] / span])
        write_tvf1(out.outdir / f"smoothed_m{m:g}_T.tvf1", u, grid)
    write_rows(out.outdir / "ladder.csv", ["m", "max_error", "relative_error"], rows)
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    out.check(f"ladder error decreasing over m={list(p['m_ladder'])}", float(decreasing), 1.0, 0.0, decreasing)
    out.check(f"ladder relative error at m={p['m_ladder'][-1]:g}", errs[-1] / span, 0.0, p["rel_tol"], errs[-1] / span <= p["rel_tol"])


def run_identities(p, seed, out: Outcome):
    rng = np.random.default_rng(seed)
    worst_adj = 0.0
    for dim, N in ((1, 64), (2, 32), (3, 12)):
        grid = PeriodicGrid(dim, N)
        u = rng.normal(size=grid.shape)
        z = rng.normal(size=(dim,) + grid.shape)
        lhs = grid.inner(gradient_forward(u, grid), z)
        rhs = -grid.inner(u, divergence_backward(z, grid))
        worst_adj = max(worst_adj, abs(lhs - rhs) / (grid.norm(gradient_forward(u, grid)) * grid.norm(z)))
    out.check("adjointness <grad u, z> = -<u, div z> (relative)", worst_adj, 0.0, 1e-10, worst_adj <= 1e-10)

    grid = PeriodicGrid(2, p["N_flow"])
    u0 = lipschitz_initial_data(grid, rng, 2.0)
    u_t = evolve(u0, EllipticOperatorF.tv_flow(), FlowConfig(SmoothedEnergy(10.0), p["T"]), grid).final
    drift = abs(float(u_t.mean() - u0.mean()))
    out.check("mean preservation (smoothed TV flow)", drift, 0.0, 1e-10, drift <= 1e-10)
    u_s = evolve_semigroup_tv(u0, p["T"] / 4, p["T"], grid).final
    drift = abs(float(u_s.mean() - u0.mean()))
    out.check("mean preservation (resolvent semigroup)", drift, 0.0, 1e-10, drift <= 1e-10)

    worst_w = max(abs(float(wulff_value(0.0, SmoothedEnergy(m))[0]) + 1.0 / m) for m in (0.5, 1.0, 10.0, 100.0, 1000.0))
    out.check("W_m*(0) = -1/m", worst_w, 0.0, 1e-12, worst_w <= 1e-12)

    grid = PeriodicGrid(2, p["N_facet"])
    pair = make_pair(ball_description(2, 0.25), grid)
    ests = {
        eps: nonlocal_curvature_resolvent(pair, CurvatureConfig(a_levels=p["a_levels"], eps=eps, tol=p["solver_tol"]))
        for eps in p["eps_values"]
    }
    ref_eps = 1.0 if 1.0 in ests else p["eps_values"][0]
    ref = ests[ref_eps]
    for eps, est in ests.items():
        if eps == ref_eps:
            continue
        diff = float(np.max(np.abs(est.on_facet - ref.on_facet)))
        tol = est.tolerance + ref.tolerance
        out.check(f"eps-invariance of Lambda, eps={eps:g} vs {ref_eps:g} (max difference)", diff, 0.0, tol, diff <= tol)


def run_barbell(p, seed, out: Outcome):
    """Exploratory: two balls joined by a thin neck. Only checks that calibrability runs.

    The union has concave corners where the neck meets the balls, so the pair
    is not smooth there; the obstacle estimator only needs an admissible start.
    """
    grid = PeriodicGrid(2, p["N"])
    desc = "\n".join(
        [
            f"ball 0.2 0.5 {p['ball']!r} side=minus",
            f"ball 0.8 0.5 {p['ball']!r} side=minus",
            f"stadium 0.5 0.5 0.3 0.0 {p['neck']!r} side=minus",
        ]
    )
    pair = make_pair(desc, grid)
    est = nonlocal_curvature_obstacle(pair, ObstacleConfig(tol=p["solver_tol"]))
    calibrable, lam = calibrability_check(est, pair)
    s = est.summary()
    write_estimate(est, pair, out.outdir, "lambda_barbell")
    write_rows(
        out.outdir / "barbell.csv",
        ["min", "max", "mean", "lambda", "calibrable", "smooth_pair"],
        [[s["min"], s["max"], s["mean"], lam, calibrable, pair.smooth]],
    )
    finite = bool(np.all(np.isfinite(est.on_facet)))
    out.check("barbell calibrability check runs (Lambda finite on the facet)", float(finite), 1.0, 0.0, finite)


# --- registry -------------------------------------------------------------------

_FACET = {"dim": 2, "solver_tol": 0.02}

SCENARIOS = {
    s.name: s
    for s in [
        Scenario(
            "ball-curvature", 1, "Ball facet: mean Lambda of both estimators vs -n/R",
            "minimal section on a ball facet is -n/R",
            run_ball_curvature,
            {**_FACET, "N": 256, "radius": 0.25, "rel_tol": 0.05, "time_limit": 120.0},
            {"N": 64},
        ),
        Scenario(
            "annulus-calibrable", 2, "Annulus facet is calibrable with constant Lambda",
            "annulus facet calibrated by an explicit radial field",
            run_annulus,
            {**_FACET, "N": 256, "r_plus": 0.1, "r_minus": 0.3, "rel_tol": 0.05},
            {"N": 128},
        ),
        Scenario(
            "whole-torus", 3, "Whole-torus facet has Lambda = 0",
            "a facet covering the torus has zero curvature",
            run_whole_torus,
            {**_FACET, "N": 128},
            {"N": 32},
        ),
        Scenario(
            "monotonicity", 4, "Lambda is ordered for randomized nested pairs",
            "monotonicity of Lambda in the pair",
            run_monotonicity,
            {**_FACET, "N": 128, "pairs": 10},
            {"N": 64, "pairs": 3},
        ),
        Scenario(
            "curvature-bound", 5, "|Lambda| <= n/rho for the ball and the annulus",
            "inscribed-ball bound on the minimal section",
            run_curvature_bound,
            {**_FACET, "N": 256, "radius": 0.25, "r_plus": 0.1, "r_minus": 0.3, "rel_tol": 0.05},
            {"N": 128},
        ),
        Scenario(
            "resolvent-comparison", 6, "Resolvents preserve the order of right-hand sides",
            "comparison principle for the resolvent problem",
            run_resolvent_comparison,
            {"dim": 2, "N": 64, "pairs": 50, "a_min": 0.005, "a_max": 0.05, "solver_tol": 1e-6, "time_limit": 300.0},
            {"N": 32, "pairs": 10},
        ),
        Scenario(
            "wulff-identity", 7, "div grad_p W_m(grad W_m*) = n under refinement",
            "the Wulff function solves the smoothed operator with constant n",
            run_wulff_identity,
            {
                "m": 10.0, "radius": 0.2,
                "levels_1d": (256, 512, 1024), "tol_1d": 0.01,
                "levels_2d": (64, 128, 256), "tol_2d": 0.03,
            },
            {"levels_1d": (64, 128, 256), "levels_2d": (32, 64, 128)},
        ),
        Scenario(
            "barrier-supersolution", 8, "Cut-off Wulff barrier is a supersolution",
            "rescaled cut-off Wulff functions give barriers",
            run_barrier,
            {"dim": 2, "N": 256, "A": 8.0, "q": 4.0, "m": 100.0, "c": 1.0, "slack_rel": 0.01},
            {"N": 128},
        ),
        Scenario(
            "facet-speed-1d", 9, "1-d plateau of width L descends at rate 2/L",
            "one-dimensional facet speed law",
            run_facet_speed,
            {"N": 256, "L": 0.25, "height": 0.2, "slope": 10.0, "T": 0.002, "m": 1000.0, "semigroup_steps": 8, "rel_tol": 0.05},
            {"N": 128, "m": 100.0},
        ),
        Scenario(
            "lipschitz-preservation", 10, "Lipschitz seminorm does not grow along the flow",
            "Lipschitz bound for solutions",
            run_lipschitz,
            {"dim": 2, "N": 128, "m": 100.0, "T": 0.002, "snapshots": 5, "samples": 5, "lip": 3.0, "c": 1.0},
            {"N": 32, "samples": 2},
        ),
        Scenario(
            "stability-ladder", 11, "Smoothed flows approach the TV semigroup as m grows",
            "stability of solutions as the smoothing is removed",
            run_stability_ladder,
            {
                "dim": 2, "N": 128, "T": 0.05, "radius": 0.3, "height": 4.0, "m_ladder": (10.0, 100.0, 1000.0),
                "semigroup_steps": 50, "semigroup_tol": 1e-7, "rel_tol": 0.02,
            },
            {"N": 32, "m_ladder": (10.0, 100.0)},
        ),
        Scenario(
            "exact-identities", 12, "Adjointness, mean preservation, W_m*(0), eps-invariance",
            "discrete Green identity, divergence form, conjugate at the origin, zero-homogeneity",
            run_identities,
            {
                "N_flow": 32, "T": 0.001, "N_facet": 128, "a_levels": (0.002, 0.001),
                "eps_values": (0.5, 1.0, 2.0), "solver_tol": 0.02,
            },
            {"N_facet": 64},
        ),
        Scenario(
            "barbell-probe", None, "Exploratory: two balls joined by a neck (no asserted value)",
            "non-calibrable facet probe",
            run_barbell,
            {"N": 256, "ball": 0.12, "neck": 0.03, "solver_tol": 0.02},
            {"N": 128, "neck": 0.05},
        ),
    ]
}


def defaults_for(name: str) -> dict:
    if name not in SCENARIOS:
        raise KeyError(name)
    return SCENARIOS[name].full


def run_scenario(name: str, params: dict | None = None, seed: int = 0, outdir=None, tier: str = "full") -> Outcome:
    """Run one scenario and write ``summary.csv`` (and ``timing.csv`` when timed)."""
    sc = SCENARIOS[name]
    p = sc.params(tier, params)
    outdir = Path(outdir) if outdir is not None else Path("tvflow-out") / name
    outdir.mkdir(parents=True, exist_ok=True)
    out = Outcome(name, outdir=outdir)
    sc.func(p, seed, out)
    write_rows(outdir / "summary.csv", ["name", "measured", "expected", "tolerance", "result"], [a.row() for a in out.assertions])
    if out.timings:
        write_rows(outdir / "timing.csv", ["name", "seconds", "expected", "limit", "result"], [a.row() for a in out.timings])
    return out


def run_config(cfg: ExperimentConfig, tier: str = "full") -> Outcome:
    if cfg.scenario not in SCENARIOS:
        raise KeyError(cfg.scenario)
    params = dict(cfg.params)
    full = SCENARIOS[cfg.scenario].full
    for key, value in (("dim", cfg.dim), ("N", cfg.N)):
        if value is None:
            continue
        if key not in full:
            raise ConfigError(f"{cfg.source}: scenario {cfg.scenario} does not take [grid] {key}")
        params[key] = value
    return run_scenario(cfg.scenario, params, cfg.seed, cfg.output_dir(), tier)
