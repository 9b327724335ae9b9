"""Facets of piecewise-flat functions and their nonlocal curvature.

A facet is ``D = cl(Omega_minus) minus Omega_plus`` for a nested pair of open
sets. Sets are assembled from analytic primitives (balls, axis-aligned
stadiums, the whole torus) so that signed distances and their gradients are
available in closed form. Two independent estimators compute the curvature
``Lambda = div z`` of the Cahn-Hoffman field z minimising ``int_D |div z|^2``:

* the resolvent quotient ``(u_a - f) / a`` of the TV resolvent started from a
  support function f of the pair, extrapolated in a;
* projected gradient on the constrained minimisation itself, with z frozen on
  the ring of edges that leave D.
"""
from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage import measure

from . import _kernels
from .errors import ConfigError, ConstructionError, NonConvergenceError, ResolutionError
from .grid import PeriodicGrid, distance_to_point, divergence_backward, wrap_displacement
from .io import write_rows, write_tvf1
from .resolvent import ResolventConfig, _remaining, solve_resolvent_tv

log = logging.getLogger(__name__)


# --- primitives -------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not 0 < self.radius < 0.5:
            raise ConstructionError(f"ball radius {self.radius} must lie in (0, 1/2)")

    @property
    def reach(self) -> float:
        # the far side of the torus limits the outer tubular neighbourhood
        return min(self.radius, 0.5 - self.radius)

    def distance(self, x):
        d = wrap_displacement(x - _column(self.center, x))
        r = np.sqrt(np.sum(d * d, axis=0))
        return r - self.radius

    def gradient(self, x):
        d = wrap_displacement(x - _column(self.center, x))
        r = np.sqrt(np.sum(d * d, axis=0))
        return d / np.where(r > 0, r, 1.0)


@dataclass(frozen=True)
class Stadium:
    """Points within ``radius`` of the box ``center +- half``."""

    center: tuple
    half: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0 or min(self.half) < 0:
            raise ConstructionError("stadium needs radius > 0 and nonnegative half-widths")
        if max(self.half) + self.radius >= 0.5:
            raise ConstructionError("stadium does not fit in the fundamental domain")

    @property
    def reach(self) -> float:
        return min(self.radius, 0.5 - max(self.half) - self.radius)

    def _parts(self, x):
        d = wrap_displacement(x - _column(self.center, x))
        q = np.abs(d) - _column(self.half, x)
        outside = np.maximum(q, 0.0)
        out_len = np.sqrt(np.sum(outside * outside, axis=0))
        inner = np.max(q, axis=0)
        return d, q, outside, out_len, inner

    def distance(self, x):
        _, _, _, out_len, inner = self._parts(x)
        return out_len + np.minimum(inner, 0.0) - self.radius

    def gradient(self, x):
        d, q, outside, out_len, inner = self._parts(x)
        sign = np.where(d < 0, -1.0, 1.0)
        g_out = sign * outside / np.where(out_len > 0, out_len, 1.0)
        axis = np.argmax(q, axis=0)
        g_in = sign * (np.arange(x.shape[0]).reshape((-1,) + (1,) * (x.ndim - 1)) == axis)
        return np.where(inner > 0, g_out, g_in)


@dataclass(frozen=True)
class WholeTorus:
    reach = math.inf

    def distance(self, x):
        return np.full(x.shape[1:], -np.inf)

    def gradient(self, x):
        return np.zeros_like(x)


def _column(v, x):
    return np.asarray(v, dtype=float).reshape((-1,) + (1,) * (x.ndim - 1))


@dataclass(frozen=True)
class Primitive:
    shape: object
    side: str
    op: str = "union"

    def __post_init__(self):
        if self.side not in ("minus", "plus"):
            raise ConstructionError(f"side must be minus or plus, got {self.side!r}")
        if self.op not in ("union", "complement"):
            raise ConstructionError(f"op must be union or complement, got {self.op!r}")


def _side_fields(prims, x):
    """Signed distance and gradient of one side of the pair at points ``x``.

    Union primitives are joined with ``min``; complement primitives are removed
    with ``max(d, -d_P)``. With no union primitive the set starts as the whole
    torus if anything is removed from it and as the empty set otherwise.
    """
    unions = [p for p in prims if p.op == "union"]
    removed = [p for p in prims if p.op == "complement"]
    shape = x.shape[1:]
    if unions:
        d = np.full(shape, np.inf)
        g = np.zeros_like(x)
        for p in unions:
            dp = p.shape.distance(x)
            take = dp < d
            d = np.where(take, dp, d)
            g = np.where(take, p.shape.gradient(x), g)
    else:
        d = np.full(shape, -np.inf if removed else np.inf)
        g = np.zeros_like(x)
    for p in removed:
        dp = -p.shape.distance(x)
        take = dp > d
        d = np.where(take, dp, d)
        g = np.where(take, -p.shape.gradient(x), g)
    return d, g


def _side_reach(prims, grid) -> tuple[float, bool]:
    """Smallest primitive reach, also limited by half the spacing of disjoint union members.

    Overlapping union members meet at concave corners where the boundary is not
    C^{1,1}; they do not limit the reach but the second value reports them.
    """
    reach = min((p.shape.reach for p in prims), default=math.inf)
    smooth = True
    unions = [p for p in prims if p.op == "union" and not isinstance(p.shape, WholeTorus)]
    if len(unions) > 1:
        x = grid.coords()
        ds = [p.shape.distance(x) for p in unions]
        for i in range(len(ds)):
            for j in range(i + 1, len(ds)):
                if np.any((ds[i] < 0) & (ds[j] < 0)):
                    smooth = False
                    continue
                sep = np.min(np.maximum(ds[i], 0.0) + np.maximum(ds[j], 0.0))
                reach = min(reach, 0.5 * float(sep))
    return reach, smooth


# --- pairs ------------------------------------------------------------------


@dataclass
class SmoothPair:
    """Nested open sets ``Omega_plus`` inside ``Omega_minus`` sampled on a grid.

    Distances are negative inside; an empty set is ``+inf`` everywhere and the
    whole torus ``-inf``. ``facet`` is the node mask of ``cl(Omega_minus) minus Omega_plus``.
    ``smooth`` is False when overlapping union members leave concave corners.
    """

    grid: PeriodicGrid
    primitives: tuple
    d_minus: np.ndarray
    d_plus: np.ndarray
    gap: float
    reach_minus: float
    reach_plus: float
    swap: bool = False
    smooth: bool = True

    def __post_init__(self):
        h = self.grid.h
        if np.any(self.d_plus < self.d_minus - 1e-12):
            raise ConstructionError("Omega_plus is not contained in Omega_minus (d_plus < d_minus somewhere)")
        if not np.any((self.d_minus < 0) & (self.d_plus > 0)):
            raise ConstructionError("the facet Omega_minus \\ cl Omega_plus is empty on this grid")
        if not self.gap > 4 * h:
            raise ResolutionError(f"boundary gap {self.gap:.4g} is not larger than 4h = {4 * h:.4g}")

    @property
    def facet(self) -> np.ndarray:
        return (self.d_minus <= 0) & (self.d_plus >= 0)

    def interior(self, margin_cells: float = 2.0) -> np.ndarray:
        """Facet nodes at least ``margin_cells * h`` from both boundaries."""
        m = margin_cells * self.grid.h
        return (self.d_minus <= -m) & (self.d_plus >= m)

    def fields_at(self, x):
        """``(d_minus, grad d_minus, d_plus, grad d_plus)`` at arbitrary points."""
        dm, gm = _side_fields(self.side("minus"), x)
        dp, gp = _side_fields(self.side("plus"), x)
        if self.swap:
            return -dp, -gp, -dm, -gm
        return dm, gm, dp, gp

    def side(self, which: str):
        return [p for p in self.primitives if p.side == which]

    def swapped(self) -> "SmoothPair":
        """The pair ``(cl Omega_plus^c, cl Omega_minus^c)``; its facet is the same set."""
        return SmoothPair(
            self.grid,
            self.primitives,
            -self.d_plus,
            -self.d_minus,
            self.gap,
            self.reach_plus,
            self.reach_minus,
            not self.swap,
            self.smooth,
        )


def make_pair_from_primitives(prims, grid: PeriodicGrid) -> SmoothPair:
    for p in prims:
        c = getattr(p.shape, "center", None)
        if c is not None and len(c) != grid.dim:
            raise ConstructionError(f"primitive {p.shape} has {len(c)} coordinates on a {grid.dim}-d grid")
    x = grid.coords()
    dm, _ = _side_fields([p for p in prims if p.side == "minus"], x)
    dp, _ = _side_fields([p for p in prims if p.side == "plus"], x)
    both = np.isfinite(dm) & np.isfinite(dp)
    gap = float(np.min(np.abs(dm[both]) + np.abs(dp[both]))) if np.any(both) else math.inf
    reach_m, smooth_m = _side_reach([p for p in prims if p.side == "minus"], grid)
    reach_p, smooth_p = _side_reach([p for p in prims if p.side == "plus"], grid)
    return SmoothPair(grid, tuple(prims), dm, dp, gap, reach_m, reach_p, smooth=smooth_m and smooth_p)


_OPTION = re.compile(r"^(side|op)=(\w+)$")


def parse_pair(text: str, dim: int) -> list:
    """Parse one primitive per line.

    ``ball c_1 .. c_n r side=minus|plus [op=union|complement]``
    ``stadium c_1 .. c_n h_1 .. h_n r side=... [op=...]``
    ``torus side=minus``
    Blank lines and ``#`` comments are skipped.
    """
    prims = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        kind, rest = words[0], words[1:]
        opts = {}
        nums = []
        for w in rest:
            m = _OPTION.match(w)
            if m:
                opts[m.group(1)] = m.group(2)
                continue
            try:
                nums.append(float(w))
            except ValueError:
                raise ConfigError(f"pair line {lineno}: cannot read {w!r}") from None
        if "side" not in opts:
            raise ConfigError(f"pair line {lineno}: missing side=minus|plus")
        if kind == "ball":
            if len(nums) != dim + 1:
                raise ConfigError(f"pair line {lineno}: ball needs {dim + 1} numbers, got {len(nums)}")
            shape = Ball(tuple(nums[:dim]), nums[dim])
        elif kind == "stadium":
            if len(nums) != 2 * dim + 1:
                raise ConfigError(f"pair line {lineno}: stadium needs {2 * dim + 1} numbers, got {len(nums)}")
            shape = Stadium(tuple(nums[:dim]), tuple(nums[dim : 2 * dim]), nums[2 * dim])
        elif kind == "torus":
            if nums:
                raise ConfigError(f"pair line {lineno}: torus takes no numbers")
            shape = WholeTorus()
        else:
            raise ConfigError(f"pair line {lineno}: unknown primitive {kind!r}")
        try:
            prims.append(Primitive(shape, opts["side"], opts.get("op", "union")))
        except ConstructionError as exc:
            raise ConfigError(f"pair line {lineno}: {exc}") from None
    return prims


def make_pair(description: str, grid: PeriodicGrid) -> SmoothPair:
    """Build a pair from its text description (see :func:`parse_pair`)."""
    return make_pair_from_primitives(parse_pair(description, grid.dim), grid)


# --- support functions and Cahn-Hoffman fields ------------------------------


@dataclass
class SupportFunctionField:
    psi: np.ndarray
    pair: SmoothPair
    delta: float


def cutoff_scale(pair: SmoothPair) -> float:
    """``delta = min(reach_minus, reach_plus, gap) / 3``."""
    return min(pair.reach_minus, pair.reach_plus, pair.gap) / 3.0


def build_support_function(pair: SmoothPair) -> SupportFunctionField:
    """``psi = -zeta(d)`` with ``zeta`` the clamp to ``[-delta/2, delta/2]``.

    Positive on Omega_plus, zero on the facet, negative off cl(Omega_minus).
    """
    delta = cutoff_scale(pair)
    h = pair.grid.h
    if math.isinf(delta):
        psi = np.zeros(pair.grid.shape)
        return SupportFunctionField(psi, pair, delta)
    if delta < 2 * h:
        raise ResolutionError(f"cutoff scale delta = {delta:.4g} is below 2h = {2 * h:.4g}")
    half = delta / 2
    psi = -np.clip(np.maximum(pair.d_minus, 0.0), 0.0, half) - np.clip(np.minimum(pair.d_plus, 0.0), -half, 0.0)
    return SupportFunctionField(psi, pair, delta)


def ramp_derivative(s, delta):
    """``theta'``: 1 on ``|s| <= delta/2``, 0 on ``|s| >= delta``, smootherstep between."""
    t = np.clip((np.abs(s) - delta / 2) / (delta / 2), 0.0, 1.0)
    return np.clip(1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t), 0.0, 1.0)


def build_cahn_hoffman(pair: SmoothPair, check: bool = True) -> np.ndarray:
    """``z = -grad[theta(d_minus) + theta(d_plus)]`` on the staggered positions.

    Component i is sampled at ``x + h e_i / 2`` from the analytic distance
    gradients. Infinite distances (empty or whole sets) contribute nothing.
    """
    grid = pair.grid
    delta = cutoff_scale(pair)
    z = grid.zeros_vector()
    if math.isinf(delta):
        return z
    if delta < 2 * grid.h:
        raise ResolutionError(f"cutoff scale delta = {delta:.4g} is below 2h = {2 * grid.h:.4g}")
    for i in range(grid.dim):
        x = grid.staggered_coords(i)
        dm, gm, dp, gp = pair.fields_at(x)
        with np.errstate(invalid="ignore"):
            wm = np.where(np.isfinite(dm), ramp_derivative(dm, delta), 0.0)
            wp = np.where(np.isfinite(dp), ramp_derivative(dp, delta), 0.0)
        z[i] = -(wm * gm[i] + wp * gp[i])
    if check:
        worst = float(np.max(np.sqrt(np.sum(z * z, axis=0))))
        if worst > 1 + 5 * grid.h:
            raise ConstructionError(
                f"Cahn-Hoffman field has |z| = {worst:.4f} > 1 + 5h; gap or resolution too small"
            )
    return z


def project_nodes(z: np.ndarray) -> np.ndarray:
    """Scale every node's vector ``(z_1, .., z_n)`` into the closed unit ball."""
    nrm = np.sqrt(np.sum(z * z, axis=0))
    return z / np.maximum(nrm, 1.0)


# --- morphology -------------------------------------------------------------


def dilate_erode(mask: np.ndarray, rho: float, grid: PeriodicGrid) -> np.ndarray:
    """Dilation (rho > 0) or erosion (rho < 0) by a closed ball under the torus metric.

    Distances come from a Euclidean distance transform of the wrap-padded mask.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise ValueError("mask does not match the grid")
    if rho == 0:
        return mask.copy()
    if abs(rho) < grid.h:
        raise ValueError(f"|rho| = {abs(rho)} is below the grid spacing {grid.h}")
    if rho < 0:
        return ~dilate_erode(~mask, -rho, grid)
    if not mask.any():
        return mask.copy()
    if mask.all():
        return mask.copy()
    pad = min(int(math.ceil(rho / grid.h)) + 1, grid.N)
    big = np.pad(mask, pad, mode="wrap")
    dist = ndimage.distance_transform_edt(~big) * grid.h
    core = tuple(slice(pad, pad + grid.N) for _ in range(grid.dim))
    return dist[core] <= rho + 1e-9 * grid.h


# --- curvature estimates ----------------------------------------------------


@dataclass
class CurvatureEstimate:
    """``values`` is NaN off ``mask``; ``tolerance`` is an absolute bound in Lambda units."""

    values: np.ndarray
    mask: np.ndarray
    method: str
    tolerance: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ValueError("curvature estimate is not finite on its mask")

    @property
    def on_facet(self) -> np.ndarray:
        return self.values[self.mask]

    def summary(self) -> dict:
        v = self.on_facet
        return {"min": float(v.min()), "max": float(v.max()), "mean": float(v.mean())}


@dataclass
class CurvatureConfig:
    """Solver settings shared by both estimators.

    ``tol`` bounds the solver error of Lambda (absolute). ``a_levels`` must be
    strictly decreasing; each resolvent is solved to ``tol * a`` in u. When it is
    None the ladder is ``eps * delta * a_scale`` with ``delta`` the cutoff scale
    of the pair, which keeps the raised facet well inside the clamped band of psi.
    """

    a_levels: tuple | None = None
    a_scale: tuple = (0.024, 0.012)
    eps: float = 1.0
    tol: float = 0.02
    max_iter: int = 400_000
    check_every: int = 250
    margin_cells: float = 2.0

    def __post_init__(self):
        a = np.asarray(self.a_levels if self.a_levels is not None else self.a_scale, dtype=float)
        if a.size < 2:
            raise ConfigError("need at least two a-levels")
        if np.any(a <= 0) or np.any(np.diff(a) >= 0):
            raise ConfigError(f"a-levels must be positive and strictly decreasing, got {self.a_levels}")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")

    def ladder(self, pair: SmoothPair) -> tuple:
        if self.a_levels is not None:
            return tuple(float(a) for a in self.a_levels)
        delta = cutoff_scale(pair)
        if math.isinf(delta):
            delta = 1.0
        return tuple(self.eps * delta * s for s in self.a_scale)


def nonlocal_curvature_resolvent(pair: SmoothPair, cfg: CurvatureConfig | None = None) -> CurvatureEstimate:
    """Lambda from resolvent quotients of ``eps * psi``, Richardson-extrapolated in a.

    Levels are solved from the largest a down, each warm-starting the next dual
    field. Treating the quotient error as first order in a, the last two levels
    with ratio r give ``(r q_small - q_large) / (r - 1)``. The reported tolerance
    adds the largest extrapolation correction on the mask to the amplified
    solver tolerance, so it also covers the grid-scale layer near the boundary.
    """
    cfg = cfg or CurvatureConfig()
    grid = pair.grid
    f = cfg.eps * build_support_function(pair).psi
    mask = pair.interior(cfg.margin_cells)
    quotients, diagnostics = [], []
    p = None
    levels = cfg.ladder(pair)
    for a in levels:
        sol = solve_resolvent_tv(
            f, grid, ResolventConfig(a, tol=cfg.tol * a, max_iter=cfg.max_iter, check_every=cfg.check_every), p0=p
        )
        p = sol.p
        quotients.append((sol.u - f) / a)
        diagnostics.append({"a": a, "iterations": sol.iterations, "residual": sol.residual, "gap": sol.gap})
    a0, a1 = levels[-2], levels[-1]
    r = a0 / a1
    lam = (r * quotients[-1] - quotients[-2]) / (r - 1)
    # extrapolation amplifies the solver error by (r + 1) / (r - 1)
    tolerance = cfg.tol * (r + 1) / (r - 1)
    if mask.any():
        tolerance += float(np.max(np.abs(lam - quotients[-1])[mask]))
    values = np.where(mask, lam, np.nan)
    params = {"a_levels": levels, "eps": cfg.eps, "levels": diagnostics}
    params["level_means"] = [float(q[mask].mean()) for q in quotients] if mask.any() else []
    return CurvatureEstimate(values, mask, "resolvent-quotient", tolerance, params)


@dataclass
class ObstacleConfig:
    tol: float = 0.02
    max_iter: int = 200_000
    check_every: int = 500
    margin_cells: float = 2.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("tol must be positive")


def obstacle_setup(pair: SmoothPair):
    """Initial field, free-edge table and facet-node mask (all flattened)."""
    grid = pair.grid
    # at concave corners of a non-smooth pair the staggered samples straddle a
    # jump of the normal; the projection makes the start admissible there
    z = project_nodes(build_cahn_hoffman(pair, check=pair.smooth)).reshape(grid.dim, -1).copy()
    inside = pair.facet.ravel()
    nxt, _ = grid.neighbours
    free = np.stack([inside & inside[nxt[i]] for i in range(grid.dim)])
    return z, free, inside


def nonlocal_curvature_obstacle(pair: SmoothPair, cfg: ObstacleConfig | None = None, return_field: bool = False):
    """Lambda as ``div z`` for ``z`` minimising ``sum_D (div z)^2`` under ``|z| <= 1``.

    Edges with an endpoint off the facet keep their Cahn-Hoffman values, which
    carries the normal boundary conditions. Stops when the extrapolated change
    of ``div z`` on the facet interior falls below ``cfg.tol``.
    """
    cfg = cfg or ObstacleConfig()
    grid = pair.grid
    z, free, inside = obstacle_setup(pair)
    nxt, prv = grid.neighbours
    mask = pair.interior(cfg.margin_cells)
    tau = grid.h**2 / (4 * grid.dim)
    work = np.empty(grid.size)
    shape = (grid.dim,) + grid.shape

    q_prev = divergence_backward(z.reshape(shape), grid)[mask]
    changes, history = [], []
    it = 0
    remaining = math.inf
    while it < cfg.max_iter:
        _kernels.obstacle_iterations(z, free, inside, nxt, prv, 1.0 / grid.h, tau, cfg.check_every, work)
        it += cfg.check_every
        q = divergence_backward(z.reshape(shape), grid)[mask]
        changes.append(float(np.max(np.abs(q - q_prev))) if q.size else 0.0)
        q_prev = q
        remaining = _remaining(changes)
        history.append((it, remaining))
        if remaining <= cfg.tol:
            break
    else:
        raise NonConvergenceError(
            f"obstacle solver stagnated: extrapolated change {remaining:.3g} > tol {cfg.tol:g} "
            f"after {cfg.max_iter} iterations",
            residual=remaining,
        )
    lam = divergence_backward(z.reshape(shape), grid)
    est = CurvatureEstimate(
        np.where(mask, lam, np.nan),
        mask,
        "direct-obstacle",
        cfg.tol,
        {"iterations": it, "history": history},
    )
    if return_field:
        return est, z.reshape(shape)
    return est


# --- checks -----------------------------------------------------------------


def _volume(d: np.ndarray, grid: PeriodicGrid) -> float:
    """Volume of ``{d < 0}`` with linear sub-cell interpolation."""
    with np.errstate(invalid="ignore"):
        frac = np.clip(0.5 - d / grid.h, 0.0, 1.0)
    return float(np.sum(frac) * grid.cell_volume)


def perimeter(d: np.ndarray, grid: PeriodicGrid) -> float:
    """Measure of the zero level set of a sampled signed distance on the torus."""
    if not np.any(np.isfinite(d)):
        return 0.0
    d = np.clip(d, -1.0, 1.0)
    if grid.dim == 1:
        s = np.sign(d)
        return float(np.count_nonzero(s != np.roll(s, -1)))
    # append the first layer along each axis so every cell is covered once
    padded = np.pad(d, [(0, 1)] * grid.dim, mode="wrap")
    if grid.dim == 2:
        total = 0.0
        for c in measure.find_contours(padded, 0.0):
            total += float(np.sum(np.sqrt(np.sum(np.diff(c, axis=0) ** 2, axis=1))))
        return total * grid.h
    if padded.min() >= 0 or padded.max() <= 0:
        return 0.0
    verts, faces, _, _ = measure.marching_cubes(padded, 0.0, spacing=(grid.h,) * 3)
    return float(measure.mesh_surface_area(verts, faces))


def calibrable_constant(pair: SmoothPair) -> float:
    """``(|boundary Omega_plus| - |boundary Omega_minus|) / |D|`` from grid measurements."""
    grid = pair.grid
    vol = _volume(pair.d_minus, grid) - _volume(pair.d_plus, grid)
    return (perimeter(pair.d_plus, grid) - perimeter(pair.d_minus, grid)) / vol


def calibrability_check(est: CurvatureEstimate, pair: SmoothPair, rel_tol: float = 0.05):
    """``(max |Lambda - lambda| <= max(tol, rel_tol |lambda|), lambda)``."""
    lam = calibrable_constant(pair)
    allowed = max(est.tolerance, rel_tol * abs(lam))
    return bool(np.max(np.abs(est.on_facet - lam)) <= allowed), lam


def is_nested(pair1: SmoothPair, pair2: SmoothPair, slack: float = 1e-12) -> bool:
    """Omega1_minus inside Omega2_minus and Omega1_plus inside Omega2_plus."""
    return bool(
        np.all(pair1.d_minus >= pair2.d_minus - slack) and np.all(pair1.d_plus >= pair2.d_plus - slack)
    )


def monotonicity_violations(pair1, pair2, est1: CurvatureEstimate, est2: CurvatureEstimate) -> int:
    """Nodes of the common facet interior where ``Lambda1 > Lambda2 + slack``."""
    if not is_nested(pair1, pair2):
        raise ValueError("monotonicity needs nested pairs")
    common = est1.mask & est2.mask
    slack = est1.tolerance + est2.tolerance
    return int(np.count_nonzero(est1.values[common] > est2.values[common] + slack))


def monotonicity_check(pair1, pair2, est1, est2) -> bool:
    return monotonicity_violations(pair1, pair2, est1, est2) == 0


def inscribed_radius(pair: SmoothPair, cap: float = 0.25) -> np.ndarray:
    """``rho(x) = sup{r <= cap : x in B_r(y), B_r(y) inside D}`` by painting grid balls.

    Each node y carries the largest admissible radius ``min(-d_minus, d_plus, cap)``;
    every node strictly inside that ball takes the maximum over all such y.
    """
    grid = pair.grid
    r = np.minimum(np.minimum(-pair.d_minus, pair.d_plus), cap)
    r = np.where(pair.facet & (r > 0), r, 0.0).ravel() / grid.h
    reach = int(math.ceil(r.max())) if r.size else 0
    ax = np.arange(-reach, reach + 1)
    offsets = np.stack(np.meshgrid(*([ax] * grid.dim), indexing="ij"), axis=-1).reshape(-1, grid.dim)
    lengths = np.sqrt(np.sum(offsets.astype(float) ** 2, axis=1))
    keep = lengths < reach + 1
    order = np.argsort(lengths[keep], kind="stable")
    offsets, lengths = offsets[keep][order].astype(np.int64), lengths[keep][order]
    index = np.stack(np.unravel_index(np.arange(grid.size), grid.shape), axis=1).astype(np.int64)
    rho = np.zeros(grid.size)
    _kernels.paint_inscribed_radius(r, index, offsets, lengths, grid.N, rho)
    return rho.reshape(grid.shape) * grid.h


def curvature_bound_check(est: CurvatureEstimate, pair: SmoothPair, rho: np.ndarray | None = None):
    """``(max (|Lambda| - n/rho), max (|Lambda| - n/rho) / (n/rho))`` over the estimate's mask."""
    if rho is None:
        rho = inscribed_radius(pair)
    sel = est.mask & (rho > 0)
    bound = pair.grid.dim / rho[sel]
    excess = np.abs(est.values[sel]) - bound
    return float(excess.max()), float((excess / bound).max())


def write_estimate(est: CurvatureEstimate, pair: SmoothPair, outdir, stem: str = "curvature") -> Path:
    """TVF1 field (zero off the mask) plus a one-row CSV summary."""
    outdir = Path(outdir)
    write_tvf1(outdir / f"{stem}.tvf1", np.where(est.mask, est.values, 0.0), pair.grid)
    calibrable, lam = calibrability_check(est, pair)
    s = est.summary()
    return write_rows(
        outdir / f"{stem}_summary.csv",
        ["method", "min", "max", "mean", "lambda", "calibrable"],
        [[est.method, s["min"], s["max"], s["mean"], lam, calibrable]],
    )


def radial_profile_rows(est: CurvatureEstimate, grid: PeriodicGrid, center, bins: int = 64):
    """Mean Lambda in radial shells about ``center``, for plotting."""
    r = distance_to_point(grid, center)[est.mask]
    v = est.on_facet
    edges = np.linspace(0.0, r.max() + 1e-12, bins + 1)
    which = np.digitize(r, edges) - 1
    rows = []
    for b in range(bins):
        sel = which == b
        if sel.any():
            rows.append([0.5 * (edges[b] + edges[b + 1]), float(v[sel].mean()), int(sel.sum())])
    return rows


__all__ = [
    "Ball",
    "CurvatureConfig",
    "CurvatureEstimate",
    "ObstacleConfig",
    "Primitive",
    "SmoothPair",
    "Stadium",
    "SupportFunctionField",
    "WholeTorus",
    "build_cahn_hoffman",
    "build_support_function",
    "calibrability_check",
    "calibrable_constant",
    "curvature_bound_check",
    "cutoff_scale",
    "dilate_erode",
    "inscribed_radius",
    "is_nested",
    "make_pair",
    "make_pair_from_primitives",
    "monotonicity_check",
    "monotonicity_violations",
    "nonlocal_curvature_obstacle",
    "nonlocal_curvature_resolvent",
    "parse_pair",
    "perimeter",
    "write_estimate",
]
