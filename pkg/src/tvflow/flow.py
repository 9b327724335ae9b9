"""Explicit evolution ``u_t + F(grad u, div grad_p W_m(grad u)) = 0`` on T^n.

F is degenerate elliptic: non-increasing in its curvature argument. The TV
flow ``F = -xi`` and the crystalline graph flow ``F = -sqrt(1 + |p|^2)(xi + c)``
have compiled steppers; any other F runs through numpy. The TV flow can also
be advanced by iterated exact resolvents, which serves as the reference
solution for the m-ladder.

Also here: the cut-off Wulff barriers ``phi_m = B t + w_m(x; A, q)`` and a
pointwise check of their supersolution property.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels
from .energy import (
    SmoothedEnergy,
    _radial_flux,
    _radial_flux_slope,
    fenchel_conjugate_radial,
    operator_Em,
    wulff_slope,
)
from .errors import BarrierFailure, BlowUpError, ConstructionError
from .grid import PeriodicGrid, gradient_central, lipschitz_seminorm, wrap_displacement
from .io import write_rows, write_tvf1
from .resolvent import ResolventConfig, solve_resolvent_tv

log = logging.getLogger(__name__)


# --- the operator F ---------------------------------------------------------


@dataclass(frozen=True)
class EllipticOperatorF:
    """``F(p, xi)`` with p's components on axis 0.

    ``kind`` is ``"tv-flow"``, ``"crystalline-graph"`` (uses ``c``) or
    ``"custom"`` (uses ``func``). Construction runs a randomized audit of
    monotonicity in xi and rejects operators that fail it.
    """

    kind: str
    c: float = 0.0
    func: Callable | None = None
    audit_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("tv-flow", "crystalline-graph", "custom"):
            raise ConstructionError(f"unknown operator kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ConstructionError("custom operator needs func(p, xi)")
        bad = self.ellipticity_audit(seed=self.audit_seed)
        if bad:
            raise ConstructionError(f"F is not degenerate elliptic: {bad} sampled violations of F(p,xi) <= F(p,eta), xi >= eta")

    @classmethod
    def tv_flow(cls):
        return cls("tv-flow")

    @classmethod
    def crystalline_graph(cls, c: float = 0.0):
        return cls("crystalline-graph", c=float(c))

    @classmethod
    def custom(cls, func, seed: int = 0):
        return cls("custom", func=func, audit_seed=seed)

    def __call__(self, p, xi):
        p = np.asarray(p, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.kind == "tv-flow":
            return -xi
        if self.kind == "crystalline-graph":
            return -np.sqrt(1.0 + np.sum(p * p, axis=0)) * (xi + self.c)
        return np.asarray(self.func(p, xi), dtype=float)

    def ellipticity_audit(self, samples: int = 4096, dim: int = 3, scale: float = 10.0, seed: int = 0) -> int:
        """Number of sampled triples with ``xi >= eta`` but ``F(p, xi) > F(p, eta)``."""
        rng = np.random.default_rng(seed)
        p = rng.normal(scale=scale, size=(dim, samples))
        a = rng.normal(scale=scale, size=samples)
        b = rng.normal(scale=scale, size=samples)
        xi, eta = np.maximum(a, b), np.minimum(a, b)
        fx, fe = self(p, xi), self(p, eta)
        return int(np.count_nonzero(fx > fe + 1e-12 * (1 + np.abs(fe))))

    def xi_lipschitz(self, p_max: float, xi_max: float = 1e3, samples: int = 257) -> float:
        """Sampled bound of ``|dF/dxi|`` over ``|p| <= p_max``."""
        if self.kind == "tv-flow":
            return 1.0
        if self.kind == "crystalline-graph":
            return math.sqrt(1.0 + p_max * p_max)
        ps = np.linspace(0.0, p_max, samples)
        xs = np.linspace(-xi_max, xi_max, samples)
        P, X = np.meshgrid(ps, xs, indexing="ij")
        best = 0.0
        for direction in np.eye(3):
            pv = direction[:, None, None] * P[None]
            dx = 1e-6 * max(1.0, xi_max)
            slope = np.abs(self(pv, X + dx) - self(pv, X - dx)) / (2 * dx)
            best = max(best, float(slope.max()))
        return best

    def sup_abs(self, p_max: float, s_max: float, samples: int = 129) -> float:
        """``max |F(p, s)|`` over ``|p| <= p_max``, ``|s| <= s_max`` on a sample grid."""
        ps = np.linspace(0.0, p_max, samples)
        ss = np.linspace(-s_max, s_max, 2 * samples - 1)
        P, S = np.meshgrid(ps, ss, indexing="ij")
        dirs = [np.eye(3)[0]] if self.kind != "custom" else list(np.eye(3)) + [np.ones(3) / np.sqrt(3)]
        return max(float(np.max(np.abs(self(d[:, None, None] * P[None], S)))) for d in dirs)


# --- configuration and trajectories -----------------------------------------


@dataclass
class FlowConfig:
    """``dt=None`` picks the monotone step ``safety * h^2 / (2n (m + 2/m) L_F)``."""

    energy: SmoothedEnergy
    T: float
    dt: float | None = None
    snapshot_times: tuple = ()
    safety: float = 0.9

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if any(t < 0 or t > self.T for t in self.snapshot_times):
            raise ValueError("snapshot times must lie in [0, T]")

    def cfl_limit(self, grid: PeriodicGrid, F: EllipticOperatorF, p_max: float) -> float:
        return grid.h**2 / (2 * grid.dim * self.energy.stiffness * F.xi_lipschitz(p_max))

    def time_step(self, grid, F, p_max) -> float:
        if self.dt is not None:
            return self.dt
        return self.safety * self.cfl_limit(grid, F, p_max)


@dataclass
class Trajectory:
    grid: PeriodicGrid
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    dt: float = float("nan")
    steps: int = 0

    def record(self, t, u):
        self.times.append(float(t))
        self.snapshots.append(u.copy())

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    def diagnostics(self) -> list:
        """Rows ``(time, lipschitz, min, max, mean)``."""
        return [
            (t, lipschitz_seminorm(u, self.grid), float(u.min()), float(u.max()), float(u.mean()))
            for t, u in zip(self.times, self.snapshots)
        ]

    def write(self, outdir, stem: str = "snap") -> Path:
        """Snapshots as TVF1 files plus ``manifest.csv``."""
        outdir = Path(outdir)
        rows = []
        for k, (diag, u) in enumerate(zip(self.diagnostics(), self.snapshots)):
            name = f"{stem}_{k:04d}.tvf1"
            write_tvf1(outdir / name, u, self.grid)
            t, lip, lo, hi, mean = diag
            rows.append([t, name, lip, lo, hi, mean])
        return write_rows(outdir / "manifest.csv", ["time", "file", "lipschitz", "min", "max", "mean"], rows)


def _schedule(cfg: FlowConfig, dt: float):
    """Step counts between consecutive output times, ending at T."""
    marks = sorted(set([0.0, *cfg.snapshot_times, cfg.T]))
    counts = []
    for t0, t1 in zip(marks[:-1], marks[1:]):
        counts.append(max(1, int(math.ceil((t1 - t0) / dt - 1e-9))))
    return marks, counts


# --- explicit stepping ------------------------------------------------------


def step_explicit(u: np.ndarray, F: EllipticOperatorF, energy: SmoothedEnergy, dt: float, grid: PeriodicGrid, step: int = 0):
    """One forward-Euler step ``u - dt F(grad_c u, div grad_p W_m(grad u))``."""
    with np.errstate(over="ignore", invalid="ignore"):
        u_new = u - dt * F(gradient_central(u, grid), operator_Em(u, grid, energy))
    bad = ~np.isfinite(u_new)
    if bad.any():
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise BlowUpError(f"non-finite value at node {node} in step {step}", step=step, node=node)
    return u_new


_CHUNK = 256


def _advance(u, F, energy, dt, steps, grid, first_step):
    if F.kind == "custom":
        for s in range(steps):
            u = step_explicit(u, F, energy, dt, grid, first_step + s)
        return u
    kind = 0 if F.kind == "tv-flow" else 1
    if grid.dim == 2:
        return _advance_2d(u, F, energy, dt, steps, grid, first_step, kind)
    flat = u.ravel().copy()
    nxt, prv = grid.neighbours
    bufs = (np.empty((grid.dim, grid.size)), np.empty(grid.size))
    s, k = _kernels.em_flow_steps(flat, nxt, prv, 1.0 / grid.h, energy.m, dt, steps, kind, F.c, *bufs)
    if s >= 0:
        node = tuple(int(i) for i in np.unravel_index(k, grid.shape))
        raise BlowUpError(f"non-finite value at node {node} in step {first_step + s}", step=first_step + s, node=node)
    return flat.reshape(grid.shape)


def _advance_2d(u, F, energy, dt, steps, grid, first_step, kind):
    u = np.ascontiguousarray(u).copy()
    bufs = (np.empty(grid.shape), np.empty(grid.shape), np.empty(grid.shape))
    done = 0
    while done < steps:
        k = min(_CHUNK, steps - done)
        start = u.copy()
        _kernels.em_flow_steps_2d(u, 1.0 / grid.h, energy.m, dt, k, kind, F.c, *bufs)
        if not np.all(np.isfinite(u)):
            # replay the chunk with the checked stepper to locate the first bad step
            for s in range(k):
                start = step_explicit(start, F, energy, dt, grid, first_step + done + s)
            node = tuple(int(i) for i in np.argwhere(~np.isfinite(u))[0])
            step = first_step + done + k - 1
            raise BlowUpError(f"non-finite value at node {node} by step {step}", step=step, node=node)
        done += k
    return u


def evolve(u0: np.ndarray, F: EllipticOperatorF, cfg: FlowConfig, grid: PeriodicGrid) -> Trajectory:
    """March to T, recording u at t = 0, at each snapshot time and at T.

    The automatic step bounds ``|grad u|`` by the initial Lipschitz seminorm
    (times 1.1), which the flow does not increase.
    """
    u = grid.check_scalar(u0).copy()
    p_max = 1.1 * lipschitz_seminorm(u, grid) + 1e-12
    dt_max = cfg.time_step(grid, F, p_max)
    marks, counts = _schedule(cfg, dt_max)
    traj = Trajectory(grid)
    traj.record(0.0, u)
    done = 0
    for (t0, t1), n_steps in zip(zip(marks[:-1], marks[1:]), counts):
        dt = (t1 - t0) / n_steps
        u = _advance(u, F, cfg.energy, dt, n_steps, grid, done)
        done += n_steps
        traj.record(t1, u)
    traj.dt = cfg.T / done
    traj.steps = done
    return traj


def evolve_semigroup_tv(u0: np.ndarray, dt: float, T: float, grid: PeriodicGrid, cfg: ResolventConfig | None = None, snapshot_every: int = 1) -> Trajectory:
    """Implicit Euler for the TV flow: ``u^{k+1}`` is the resolvent of ``u^k`` with ``a = dt``.

    ``cfg.a`` is replaced by the step; each solve warm-starts from the previous dual field.
    """
    if not dt > 0 or not T > 0:
        raise ValueError("dt and T must be positive")
    steps = max(1, int(round(T / dt)))
    dt = T / steps
    base = cfg or ResolventConfig(dt, tol=1e-7)
    rcfg = ResolventConfig(dt, tol=base.tol, max_iter=base.max_iter, check_every=base.check_every, accelerated=base.accelerated)
    u = grid.check_scalar(u0).copy()
    traj = Trajectory(grid, dt=dt, steps=steps)
    traj.record(0.0, u)
    p = None
    for k in range(1, steps + 1):
        sol = solve_resolvent_tv(u, grid, rcfg, p0=p)
        u, p = sol.u, sol.p
        if k % snapshot_every == 0 or k == steps:
            traj.record(k * dt, u)
    return traj


def comparison_probe(u0, v0, F: EllipticOperatorF, cfg: FlowConfig, grid: PeriodicGrid, slack: float = 1e-9) -> bool:
    """Evolve ``u0 <= v0`` with a common step and test ``u <= v + 2 slack`` at every snapshot."""
    u0 = grid.check_scalar(u0)
    v0 = grid.check_scalar(v0)
    if np.any(u0 > v0):
        raise ValueError("comparison probe needs u0 <= v0")
    if cfg.dt is None:
        p_max = 1.1 * max(lipschitz_seminorm(u0, grid), lipschitz_seminorm(v0, grid)) + 1e-12
        cfg = FlowConfig(cfg.energy, cfg.T, cfg.time_step(grid, F, p_max), cfg.snapshot_times, cfg.safety)
    tu = evolve(u0, F, cfg, grid)
    tv = evolve(v0, F, cfg, grid)
    return all(bool(np.all(a <= b + 2 * slack)) for a, b in zip(tu.snapshots, tv.snapshots))


# --- barriers ---------------------------------------------------------------


def cutoff_theta(s, q: float):
    """``theta_q``: identity on ``|s| <= q/2``, ``q sign s`` on ``|s| >= 2q``.

    Between, a cubic Hermite arc from ``(q/2, q/2)`` with slope 1 to ``(2q, q)``
    with slope 0; its secant slope 1/3 sits on the Fritsch-Carlson boundary, so
    the arc is monotone.
    """
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    L = 1.5 * q
    t = np.clip((a - q / 2) / L, 0.0, 1.0)
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    mid = h00 * (q / 2) + h10 * L * 1.0 + h01 * q
    out = np.where(a <= q / 2, a, np.where(a >= 2 * q, q, mid))
    return np.sign(s) * out


def cutoff_theta_slope(s, q: float):
    a = np.abs(np.asarray(s, dtype=float))
    L = 1.5 * q
    t = np.clip((a - q / 2) / L, 0.0, 1.0)
    d = ((6 * t**2 - 6 * t) * (q / 2) + (3 * t**2 - 4 * t + 1) * L + (-6 * t**2 + 6 * t) * q) / L
    return np.where(a <= q / 2, 1.0, np.where(a >= 2 * q, 0.0, d))


@dataclass(frozen=True)
class BarrierSpec:
    A: float
    q: float
    m: float
    B: float | None = None

    def __post_init__(self):
        if not (self.A > 0 and self.q > 0):
            raise ValueError("A and q must be positive")
        if not self.m > 4.0 / self.q:
            raise ValueError(f"m = {self.m} must exceed 4/q = {4.0 / self.q}")
        if self.B is not None and self.B < 0:
            raise ValueError("B must be nonnegative")

    @property
    def energy(self) -> SmoothedEnergy:
        return SmoothedEnergy(self.m)


def barrier_radial(spec: BarrierSpec, r_max: float, K: int = 20000):
    """``(rho, w, slope)`` of w_m on ``[0, r_max]`` by trapezoid quadrature of the capped Wulff slope."""
    prof = fenchel_conjugate_radial(spec.energy, spec.A * r_max, K)
    rho = prof.radii / spec.A
    slope = cutoff_theta(prof.slopes, spec.q)
    w = np.concatenate([[0.0], np.cumsum(0.5 * (slope[1:] + slope[:-1]) * np.diff(rho))])
    return rho, w, slope


def radial_operator_bound(spec: BarrierSpec, dim: int, r_max: float, K: int = 20000) -> float:
    """``C = max |div grad_p W_m(grad w_m)|`` from the radial formula, at least ``A n``.

    For a radial profile with slope sigma(rho) the operator is
    ``G'(sigma) sigma' + (n - 1) G(sigma) / rho`` with ``G = W_m'``.
    """
    energy = spec.energy
    rho = np.linspace(r_max / K, r_max, K)
    s = wulff_slope(spec.A * rho, energy)
    sigma = cutoff_theta(s, spec.q)
    dsigma = cutoff_theta_slope(s, spec.q) * spec.A / _radial_flux_slope(s, energy)
    xi = _radial_flux_slope(sigma, energy) * dsigma + (dim - 1) * _radial_flux(sigma, energy) / rho
    return max(float(np.max(np.abs(xi))), spec.A * dim)


def build_barrier(spec: BarrierSpec, grid: PeriodicGrid, center=None, K: int | None = None, return_seam: bool = False):
    """Periodized ``w_m(x - center)``: the minimum over the 3^n nearest lattice translates.

    With ``return_seam`` also returns the mask of nodes where the two closest
    translates are within ``2 sqrt(n) h`` of each other, i.e. near the ridge
    where the minimum switches branch.
    """
    if center is None:
        center = np.full(grid.dim, 0.5)
    r_max = 1.5 * math.sqrt(grid.dim) + 1.0
    # the quadrature must be much finer than h or its kinks show up in the operator
    K = K or max(20000, int(64 * r_max * grid.N))
    rho, w, _ = barrier_radial(spec, r_max, K)
    x = grid.coords()
    c = np.asarray(center, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
    base = wrap_displacement(x - c)
    dists = []
    for shift in np.ndindex(*(3,) * grid.dim):
        z = (np.array(shift) - 1).reshape((grid.dim,) + (1,) * grid.dim)
        dists.append(np.sqrt(np.sum((base + z) ** 2, axis=0)))
    dists = np.sort(np.stack(dists), axis=0)
    out = np.interp(dists[0], rho, w)
    if return_seam:
        return out, dists[1] - dists[0] < 2 * math.sqrt(grid.dim) * grid.h
    return out


@dataclass
class BarrierReport:
    """``C_radial`` is the continuum bound, ``C_grid`` the largest discrete value off the seam."""

    margin: float
    B: float
    C: float
    C_radial: float
    C_grid: float
    worst_node: tuple
    residual: np.ndarray


def barrier_supersolution_check(
    spec: BarrierSpec,
    F: EllipticOperatorF,
    grid: PeriodicGrid,
    slack_rel: float = 1e-2,
    t: float = 0.0,
    raise_on_failure: bool = True,
) -> BarrierReport:
    """Minimum over the grid of ``B + F(grad phi_m, div grad_p W_m(grad phi_m))``.

    C bounds ``|div grad_p W_m(grad w_m)|``. It is taken as the larger of the
    continuum radial bound and the measured grid maximum off the periodization
    seam, since the Wulff core edge can be narrower than h for large m. ``B``
    defaults to the sizing rule ``max |F(p, s)|`` over ``|p| <= q``, ``|s| <= C``.
    Since ``phi_m = B t + w_m`` the value does not depend on ``t``.
    """
    C_radial = radial_operator_bound(spec, grid.dim, 1.5 * math.sqrt(grid.dim))
    w, seam = build_barrier(spec, grid, return_seam=True)
    xi = operator_Em(w, grid, spec.energy)
    C_grid = float(np.max(np.abs(xi[~seam])))
    C = max(C_radial, C_grid)
    B = spec.B if spec.B is not None else F.sup_abs(spec.q, C)
    w = w + B * t
    res = B + F(gradient_central(w, grid), xi)
    k = int(np.argmin(res))
    node = tuple(int(i) for i in np.unravel_index(k, grid.shape))
    margin = float(res.ravel()[k])
    report = BarrierReport(margin, B, C, C_radial, C_grid, node, res)
    if raise_on_failure and margin < -slack_rel * B:
        raise BarrierFailure(f"supersolution residual {margin:.4g} < -{slack_rel:g} B at node {node}", margin=margin, node=node)
    return report


__all__ = [
    "BarrierReport",
    "BarrierSpec",
    "EllipticOperatorF",
    "FlowConfig",
    "Trajectory",
    "barrier_radial",
    "barrier_supersolution_check",
    "build_barrier",
    "comparison_probe",
    "cutoff_theta",
    "evolve",
    "evolve_semigroup_tv",
    "radial_operator_bound",
    "step_explicit",
]
