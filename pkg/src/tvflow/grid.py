"""Uniform periodic grids on the unit torus T^n.

Scalar fields are numpy arrays of shape ``(N,) * n``. Vector fields are arrays
of shape ``(n, N, ..., N)`` whose component ``i`` lives on the forward-staggered
position ``x_k + h e_i / 2``. The forward gradient and backward divergence are
an exact negative-adjoint pair, which is the discrete Green identity on T^n.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class PeriodicGrid:
    """``N`` samples per axis on ``[0, 1)^dim`` with wrap-around indexing."""

    dim: int
    N: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.N < 4:
            raise ValueError(f"N must be at least 4, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def size(self) -> int:
        return self.N**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def coords(self, offset=0.0) -> np.ndarray:
        """Node coordinates, shape ``(dim, N, ..., N)``; ``offset`` in units of h per axis."""
        offset = np.broadcast_to(np.asarray(offset, dtype=float), (self.dim,))
        axes = [(np.arange(self.N) + offset[i]) * self.h for i in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def staggered_coords(self, axis: int) -> np.ndarray:
        off = np.zeros(self.dim)
        off[axis] = 0.5
        return self.coords(off)

    @cached_property
    def neighbours(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat index tables ``(nxt, prv)`` of shape ``(dim, N**dim)``."""
        idx = np.arange(self.size).reshape(self.shape)
        nxt = np.stack([np.roll(idx, -1, axis=i).ravel() for i in range(self.dim)])
        prv = np.stack([np.roll(idx, 1, axis=i).ravel() for i in range(self.dim)])
        return nxt.astype(np.int64), prv.astype(np.int64)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def zeros_vector(self) -> np.ndarray:
        return np.zeros((self.dim,) + self.shape)

    def check_scalar(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            raise ValueError(f"scalar field shape {u.shape} does not match grid {self.shape}")
        if not np.all(np.isfinite(u)):
            raise ValueError("scalar field has non-finite values")
        return u

    def check_vector(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,) + self.shape:
            raise ValueError(f"vector field shape {z.shape} does not match grid {self.shape}")
        if not np.all(np.isfinite(z)):
            raise ValueError("vector field has non-finite values")
        return z

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """h^n-weighted inner product (sums over vector components too)."""
        return float(np.sum(a * b) * self.cell_volume)

    def norm(self, a: np.ndarray) -> float:
        return float(np.sqrt(self.inner(a, a)))

    def mean(self, u: np.ndarray) -> float:
        return float(np.mean(u))


def gradient_forward(u: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Forward differences ``(u[k + e_i] - u[k]) / h`` with periodic wrap."""
    return np.stack([(np.roll(u, -1, axis=i) - u) / grid.h for i in range(grid.dim)])


def divergence_backward(z: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Backward-difference divergence; the negative adjoint of :func:`gradient_forward`."""
    out = np.zeros(grid.shape)
    for i in range(grid.dim):
        out += z[i] - np.roll(z[i], 1, axis=i)
    return out / grid.h


def gradient_central(u: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Collocated central differences, used for the gradient argument of F."""
    return np.stack(
        [(np.roll(u, -1, axis=i) - np.roll(u, 1, axis=i)) / (2 * grid.h) for i in range(grid.dim)]
    )


def lipschitz_seminorm(u: np.ndarray, grid: PeriodicGrid) -> float:
    """Largest absolute forward difference quotient over all nodes and axes."""
    return float(np.max(np.abs(gradient_forward(u, grid))))


def wrap_displacement(x: np.ndarray) -> np.ndarray:
    """Reduce coordinate differences to the nearest lattice translate, in ``[-1/2, 1/2)``."""
    return x - np.floor(x + 0.5)


def torus_distance(x, y) -> np.ndarray | float:
    """Distance on T^n between points (last axis = coordinates).

    Equivalent to minimising the Euclidean distance over the 3^n nearest
    lattice translates for points in the fundamental domain.
    """
    d = wrap_displacement(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    r = np.sqrt(np.sum(d * d, axis=-1))
    return float(r) if np.ndim(r) == 0 else r


def distance_to_point(grid: PeriodicGrid, center, offset=0.0) -> np.ndarray:
    """Torus distance from every (possibly staggered) node to ``center``."""
    x = grid.coords(offset)
    c = np.asarray(center, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
    d = wrap_displacement(x - c)
    return np.sqrt(np.sum(d * d, axis=0))
