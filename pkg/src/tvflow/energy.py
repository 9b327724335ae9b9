"""Total variation, the smoothed energies E_m and their Wulff profiles.

``W_m(p) = sqrt(|p|^2 + m^-2) + |p|^2 / m`` decreases to ``|p|`` as m grows.
Vectors carry their components on axis 0, matching the grid's vector fields.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonConvergenceError
from .grid import PeriodicGrid, distance_to_point, divergence_backward, gradient_forward


@dataclass(frozen=True)
class SmoothedEnergy:
    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")

    @property
    def eps2(self) -> float:
        return 1.0 / (self.m * self.m)

    @property
    def stiffness(self) -> float:
        """Largest eigenvalue of the Hessian of W_m (attained at p = 0)."""
        return self.m + 2.0 / self.m

    def hessian_apply(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``D^2 W_m(p) v`` pointwise, components on axis 0."""
        s = np.sum(p * p, axis=0) + self.eps2
        pv = np.sum(p * v, axis=0)
        return (v * s - p * pv) / s**1.5 + (2.0 / self.m) * v


def w_value(p, energy: SmoothedEnergy) -> np.ndarray | float:
    p = np.asarray(p, dtype=float)
    sq = np.sum(p * p, axis=0)
    return np.sqrt(sq + energy.eps2) + sq / energy.m


def w_gradient(p, energy: SmoothedEnergy) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    sq = np.sum(p * p, axis=0)
    return p * (1.0 / np.sqrt(sq + energy.eps2) + 2.0 / energy.m)


def tv_energy(u: np.ndarray, grid: PeriodicGrid) -> float:
    """Isotropic discrete total variation ``h^n sum_k |grad u_k|``."""
    g = gradient_forward(u, grid)
    return float(np.sum(np.sqrt(np.sum(g * g, axis=0))) * grid.cell_volume)


def smoothed_energy(u: np.ndarray, grid: PeriodicGrid, energy: SmoothedEnergy) -> float:
    return float(np.sum(w_value(gradient_forward(u, grid), energy)) * grid.cell_volume)


def operator_Em(u: np.ndarray, grid: PeriodicGrid, energy: SmoothedEnergy) -> np.ndarray:
    """``-d0 E_m(u) = div[(grad_p W_m)(grad u)]`` on the staggered adjoint pair."""
    return divergence_backward(w_gradient(gradient_forward(u, grid), energy), grid)


# --- Wulff profiles -------------------------------------------------------


def _radial_flux(s, energy):
    return s / np.sqrt(s * s + energy.eps2) + 2.0 * s / energy.m


def _radial_flux_slope(s, energy):
    return energy.eps2 / (s * s + energy.eps2) ** 1.5 + 2.0 / energy.m


def wulff_slope(r, energy: SmoothedEnergy, max_iter: int = 200, rtol: float = 1e-15) -> np.ndarray:
    """Radial slope ``s >= 0`` of W_m^* at radius r: the root of ``r = W_m'(s)``.

    Newton's method, falling back to bisection whenever a step leaves the bracket
    ``[0, m r / 2]`` (valid since ``W_m'(s) >= 2 s / m``).
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise ValueError("radii must be nonnegative")
    lo = np.zeros_like(r)
    hi = 0.5 * energy.m * r
    s = np.minimum(r / energy.stiffness, hi)
    done = r == 0
    for _ in range(max_iter):
        res = _radial_flux(s, energy) - r
        lo = np.where(res < 0, s, lo)
        hi = np.where(res > 0, s, hi)
        done |= np.abs(res) <= rtol * np.maximum(r, 1.0)
        done |= (hi - lo) <= 4 * np.finfo(float).eps * np.maximum(hi, 1e-300)
        if np.all(done):
            return s
        step = s - res / _radial_flux_slope(s, energy)
        bad = ~((step > lo) & (step < hi))
        step = np.where(bad, 0.5 * (lo + hi), step)
        s = np.where(done, s, step)
    worst = int(np.argmax(np.where(done, -np.inf, np.abs(_radial_flux(s, energy) - r))))
    raise NonConvergenceError(
        f"Wulff slope Newton iteration did not converge at radius {r[worst]!r}",
        residual=float(abs(_radial_flux(s[worst], energy) - r[worst])),
        where=float(r[worst]),
    )


def wulff_value(r, energy: SmoothedEnergy) -> np.ndarray:
    """``W_m^*(r) = s r - W_m(s)`` with ``s = wulff_slope(r)``."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    s = wulff_slope(r, energy)
    return s * r - (np.sqrt(s * s + energy.eps2) + s * s / energy.m)


@dataclass(frozen=True)
class RadialProfile:
    radii: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.slopes))):
            raise ValueError("profile values must be finite")
        for arr in (self.radii, self.values, self.slopes):
            arr.setflags(write=False)

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "value", "slope"])
            for row in zip(self.radii, self.values, self.slopes):
                w.writerow([repr(float(v)) for v in row])
        return path


def fenchel_conjugate_radial(energy: SmoothedEnergy, r_max: float, K: int) -> RadialProfile:
    """Sample ``W_m^*`` and its radial slope on ``K + 1`` equispaced radii in ``[0, r_max]``."""
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    if K < 16:
        raise ValueError("need at least 16 samples")
    r = np.linspace(0.0, r_max, K + 1)
    s = wulff_slope(r, energy)
    v = s * r - (np.sqrt(s * s + energy.eps2) + s * s / energy.m)
    return RadialProfile(r, v, s)


def sampled_wulff(grid: PeriodicGrid, energy: SmoothedEnergy, center=None) -> np.ndarray:
    """``W_m^*(|x - center|)`` on the grid (torus distance, not periodic in value)."""
    if center is None:
        center = np.full(grid.dim, 0.5)
    return wulff_value(distance_to_point(grid, center).ravel(), energy).reshape(grid.shape)


def wulff_identity_check(
    energy: SmoothedEnergy,
    grid: PeriodicGrid,
    radius: float = 0.25,
    slope_cap: float | None = None,
) -> float:
    """Max relative deviation of ``-d0 E_m(W_m^*)`` from ``n`` on an interior ball.

    The ball is centred at ``(1/2, ..., 1/2)`` and clipped to stay ``2h`` away from
    the edge of the fundamental domain, where the sampled profile is not periodic.
    ``slope_cap`` further restricts to nodes where the Wulff slope stays below it.
    """
    center = np.full(grid.dim, 0.5)
    r = distance_to_point(grid, center)
    radius = min(radius, 0.5 - 2 * grid.h)
    inside = r <= radius + 1e-12
    if slope_cap is not None:
        inside &= wulff_slope(r.ravel(), energy).reshape(grid.shape) <= slope_cap
    op = operator_Em(sampled_wulff(grid, energy, center), grid, energy)
    n = grid.dim
    return float(np.max(np.abs(op[inside] - n)) / n)
