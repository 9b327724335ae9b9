"""Resolvents ``u + a dE(u) = f`` for the exact and the smoothed TV energies.

The exact problem is the ROF-type minimisation ``1/2 |u - f|^2 + a TV(u)``,
solved by projected ascent on its dual with ``u = f - a div p``. The smoothed
problem ``u - a div grad_p W_m(grad u) = f`` is solved by damped Newton with a
matrix-free conjugate-gradient inner solve.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .energy import SmoothedEnergy, operator_Em, smoothed_energy, tv_energy
from .errors import NonConvergenceError, SolverError
from .grid import PeriodicGrid, divergence_backward, gradient_forward

log = logging.getLogger(__name__)


@dataclass
class ResolventConfig:
    """``tol`` is in the units of u; ``tau`` defaults to the stability limit h^2 / (4n).

    ``accelerated`` selects FISTA-type momentum with adaptive restart instead of
    plain projected ascent; both share the step and the stopping rule.
    """

    a: float
    tol: float = 1e-6
    max_iter: int = 400_000
    tau: float | None = None
    check_every: int = 100
    accelerated: bool = True

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")

    def step(self, grid: PeriodicGrid) -> float:
        limit = grid.h**2 / (4 * grid.dim)
        if self.tau is None:
            return limit
        if not 0 < self.tau <= limit * (1 + 1e-12):
            raise ValueError(f"dual step {self.tau} exceeds the stability limit {limit}")
        return self.tau


@dataclass
class ResolventSolution:
    u: np.ndarray
    iterations: int
    residual: float
    method: str
    gap: float = float("nan")
    p: np.ndarray | None = None
    history: list = field(default_factory=list)


def duality_gap(u, p, grid: PeriodicGrid, a: float) -> float:
    """``a sum_k h^n (|grad u_k| + grad u_k . p_k)``, nonnegative node by node."""
    g = gradient_forward(u, grid)
    local = np.sqrt(np.sum(g * g, axis=0)) + np.sum(g * p, axis=0)
    return float(a * np.sum(local) * grid.cell_volume)


def _remaining(changes, window=5):
    """Extrapolated distance to the limit from the last block-to-block changes."""
    if len(changes) <= window:
        return np.inf
    last, before = changes[-1], changes[-1 - window]
    if last == 0.0:
        return 0.0
    if before <= last:
        return np.inf
    rho = (last / before) ** (1.0 / window)
    return last * rho / (1.0 - rho)


def solve_resolvent_tv(
    f: np.ndarray, grid: PeriodicGrid, cfg: ResolventConfig, p0: np.ndarray | None = None
) -> ResolventSolution:
    """Exact TV resolvent by projected ascent on the dual.

    Every ``cfg.check_every`` iterations the primal iterate and the duality gap
    are evaluated. The reported residual is the smaller of the certified L2 bound
    ``sqrt(2 gap)`` and the max-norm change extrapolated from successive blocks.
    ``p0`` warm-starts the dual field (zero by default).
    """
    f = grid.check_scalar(f)
    tau = cfg.step(grid)
    nxt, prv = grid.neighbours
    a = cfg.a
    p = np.zeros((grid.dim, grid.size)) if p0 is None else np.array(p0, dtype=float).reshape(grid.dim, -1)
    fa = f.ravel() / a
    work = np.empty(grid.size)
    inv_h = 1.0 / grid.h

    def primal(p):
        return f - a * divergence_backward(p.reshape((grid.dim,) + grid.shape), grid)

    u_prev = primal(p)
    changes, history = [], []
    it = 0
    residual = gap = np.inf
    y, t = p.copy(), 1.0
    while it < cfg.max_iter:
        k = min(cfg.check_every, cfg.max_iter - it)
        if cfg.accelerated:
            t = _kernels.dual_tv_accelerated(p, y, fa, nxt, prv, inv_h, tau, k, work, t)
        else:
            _kernels.dual_tv_iterations(p, fa, nxt, prv, inv_h, tau, k, work)
        it += k
        u = primal(p)
        changes.append(float(np.max(np.abs(u - u_prev))))
        u_prev = u
        gap = duality_gap(u, p.reshape((grid.dim,) + grid.shape), grid, a)
        residual = min(np.sqrt(2 * max(gap, 0.0)), _remaining(changes))
        history.append((it, residual, gap))
        if residual <= cfg.tol:
            return ResolventSolution(
                u, it, residual, "exact-dual-fista" if cfg.accelerated else "exact-dual", gap, p.reshape((grid.dim,) + grid.shape), history
            )
    raise NonConvergenceError(
        f"TV resolvent did not reach tol={cfg.tol:g} in {cfg.max_iter} iterations "
        f"(residual {residual:.3g}, gap {gap:.3g})",
        residual=residual,
    )


def _cg(apply, b, rtol, max_iter):
    """Conjugate gradients for an SPD operator; raises on loss of positivity."""
    x = np.zeros_like(b)
    r = b.copy()
    d = r.copy()
    rr = float(np.sum(r * r))
    stop = (rtol**2) * rr
    for i in range(max_iter):
        if rr <= stop:
            return x, i
        Ad = apply(d)
        curv = float(np.sum(d * Ad))
        if curv <= 0:
            raise SolverError("CG breakdown: Jacobian is not positive definite", residual=np.sqrt(rr))
        alpha = rr / curv
        x += alpha * d
        r -= alpha * Ad
        rr_new = float(np.sum(r * r))
        d = r + (rr_new / rr) * d
        rr = rr_new
    return x, max_iter


def _newton_smooth(f, grid, energy, a, tol, u, max_newton, max_cg, history):
    w = grid.cell_volume

    def objective(v):
        return 0.5 * float(np.sum((v - f) ** 2)) * w + a * smoothed_energy(v, grid, energy)

    res = np.inf
    for it in range(max_newton + 1):
        R = u - a * operator_Em(u, grid, energy) - f
        res = float(np.max(np.abs(R)))
        history.append((energy.m, res))
        if res <= tol:
            return u, it, res
        if it == max_newton:
            break
        grad_u = gradient_forward(u, grid)

        def jac(v):
            return v - a * divergence_backward(energy.hessian_apply(grad_u, gradient_forward(v, grid)), grid)

        rnorm = float(np.sqrt(np.sum(R * R)))
        delta, _ = _cg(jac, -R, min(0.1, np.sqrt(rnorm)), max_cg)
        phi0 = objective(u)
        for direction in (delta, -R):
            slope = float(np.sum(R * direction)) * w
            if slope >= 0:
                continue
            t = 1.0
            while t > 1e-12:
                # the tolerance absorbs roundoff in phi once the decrease is tiny
                if objective(u + t * direction) <= phi0 + 1e-4 * t * slope + 1e-15 * abs(phi0):
                    break
                t *= 0.5
            else:
                continue
            u = u + t * direction
            break
        else:
            raise NonConvergenceError("smoothed resolvent line search failed", residual=res)
    raise NonConvergenceError(
        f"smoothed resolvent did not reach tol={tol:g} in {max_newton} Newton steps (m={energy.m:g})",
        residual=res,
    )


def solve_resolvent_smooth(
    f: np.ndarray,
    grid: PeriodicGrid,
    energy: SmoothedEnergy,
    cfg: ResolventConfig,
    max_newton: int = 200,
    max_cg: int = 5000,
    m_start: float = 10.0,
    m_factor: float = 4.0,
) -> ResolventSolution:
    """Solve ``u - a (-d0 E_m)(u) = f`` to ``max|residual| <= cfg.tol``.

    Damped Newton on the strongly convex energy ``1/2 |u - f|^2 + a E_m(u)``,
    with a steepest-descent step as fallback when the Newton direction fails the
    Armijo test. For large m the solve is continued from ``m_start`` upward by
    factors of ``m_factor``, each stage warm-starting the next; plain Newton
    stalls near flat regions once the kink of W_m is sharp.
    """
    f = grid.check_scalar(f)
    ladder = [energy.m]
    while ladder[-1] / m_factor > m_start:
        ladder.append(ladder[-1] / m_factor)
    ladder = ladder[::-1]
    u = f.copy()
    history: list = []
    iterations = 0
    for m in ladder:
        stage_tol = cfg.tol if m == energy.m else max(cfg.tol, 1e-6)
        u, it, res = _newton_smooth(
            f, grid, SmoothedEnergy(m), cfg.a, stage_tol, u, max_newton, max_cg, history
        )
        iterations += it
    return ResolventSolution(u, iterations, res, "smoothed-newton", history=history)


def subgradient_quotient(f: np.ndarray, solution: ResolventSolution, a: float) -> np.ndarray:
    """``(u - f) / a``, which tends to ``-d0 E(f)`` as ``a -> 0``."""
    return (solution.u - f) / a


def resolvent_comparison_check(
    f1: np.ndarray, f2: np.ndarray, grid: PeriodicGrid, cfg: ResolventConfig
) -> bool:
    """Solve both TV resolvents and test ``u1 <= u2 + 2 tol`` everywhere."""
    if np.any(f1 > f2):
        raise ValueError("comparison requires f1 <= f2 pointwise")
    u1 = solve_resolvent_tv(f1, grid, cfg).u
    u2 = solve_resolvent_tv(f2, grid, cfg).u
    return bool(np.all(u1 <= u2 + 2 * cfg.tol))


def resolvent_energy(u, f, grid: PeriodicGrid, a: float) -> float:
    return 0.5 * float(np.sum((u - f) ** 2)) * grid.cell_volume + a * tv_energy(u, grid)


__all__ = [
    "ResolventConfig",
    "ResolventSolution",
    "duality_gap",
    "resolvent_comparison_check",
    "resolvent_energy",
    "solve_resolvent_smooth",
    "solve_resolvent_tv",
    "subgradient_quotient",
]
