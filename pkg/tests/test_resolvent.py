import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvflow.energy import SmoothedEnergy, operator_Em
from tvflow.errors import NonConvergenceError
from tvflow.grid import PeriodicGrid, distance_to_point, gradient_forward, lipschitz_seminorm
from tvflow.resolvent import (
    ResolventConfig,
    duality_gap,
    resolvent_comparison_check,
    resolvent_energy,
    solve_resolvent_smooth,
    solve_resolvent_tv,
    subgradient_quotient,
)


def rof_reference(f, grid, a):
    """Independent oracle: the primal problem handed to a conic solver."""
    cp = pytest.importorskip("cvxpy")
    u = cp.Variable(grid.size)
    U = cp.reshape(u, grid.shape, order="C")
    h = grid.h
    if grid.dim == 1:
        d = (cp.hstack([U[1:], U[:1]]) - U) / h
        tv = cp.sum(cp.abs(d)) * h
    else:
        dx = (cp.vstack([U[1:, :], U[:1, :]]) - U) / h
        dy = (cp.hstack([U[:, 1:], U[:, :1]]) - U) / h
        tv = cp.sum(cp.norm(cp.vstack([cp.vec(dx, order="C"), cp.vec(dy, order="C")]), 2, axis=0)) * h**2
    obj = 0.5 * cp.sum_squares(u - f.ravel()) * grid.cell_volume + a * tv
    cp.Problem(cp.Minimize(obj)).solve(solver="CLARABEL")
    return np.asarray(u.value).reshape(grid.shape)


@pytest.mark.parametrize("accelerated", [True, False])
def test_plateau_1d_exact_drop(accelerated):
    # an interval plateau of length L drops by 2a/L, the rest rises by 2a/(1-L)
    grid = PeriodicGrid(1, 128)
    f = np.zeros(grid.shape)
    f[32:64] = 1.0
    a = 0.01
    sol = solve_resolvent_tv(f, grid, ResolventConfig(a, tol=1e-8, accelerated=accelerated))
    assert np.max(np.abs(sol.u[32:64] - (1 - 2 * a / 0.25))) < 1e-7
    rest = np.r_[sol.u[:32], sol.u[64:]]
    assert np.max(np.abs(rest - 2 * a / 0.75)) < 1e-7
    assert sol.residual <= 1e-8


@pytest.mark.parametrize("dn", [(1, 32), (2, 12)])
def test_matches_conic_solver(rng, dn):
    grid = PeriodicGrid(*dn)
    f = rng.normal(size=grid.shape)
    a = 0.05
    sol = solve_resolvent_tv(f, grid, ResolventConfig(a, tol=1e-7))
    ref = rof_reference(f, grid, a)
    assert np.max(np.abs(sol.u - ref)) < 1e-5
    assert resolvent_energy(sol.u, f, grid, a) <= resolvent_energy(ref, f, grid, a) + 1e-8


def test_plain_and_accelerated_agree(rng):
    grid = PeriodicGrid(2, 16)
    f = rng.normal(size=grid.shape)
    u1 = solve_resolvent_tv(f, grid, ResolventConfig(0.01, tol=1e-8)).u
    u2 = solve_resolvent_tv(f, grid, ResolventConfig(0.01, tol=1e-8, accelerated=False)).u
    assert np.max(np.abs(u1 - u2)) < 1e-7


def test_gap_certificate_bounds_error(rng):
    grid = PeriodicGrid(2, 16)
    f = rng.normal(size=grid.shape)
    a = 0.02
    exact = solve_resolvent_tv(f, grid, ResolventConfig(a, tol=1e-10)).u
    loose = solve_resolvent_tv(f, grid, ResolventConfig(a, tol=1e-2, check_every=10))
    assert loose.gap >= 0
    # strong convexity: |u - u*|_{L2}^2 / 2 <= gap
    assert grid.norm(loose.u - exact) <= np.sqrt(2 * loose.gap) + 1e-12
    assert duality_gap(exact, np.zeros((2,) + grid.shape), grid, a) >= 0


def test_constant_and_mean(rng):
    grid = PeriodicGrid(2, 16)
    sol = solve_resolvent_tv(np.full(grid.shape, 1.5), grid, ResolventConfig(0.1))
    assert np.all(sol.u == 1.5)
    assert np.all(subgradient_quotient(np.full(grid.shape, 1.5), sol, 0.1) == 0)
    f = rng.normal(size=grid.shape)
    u = solve_resolvent_tv(f, grid, ResolventConfig(0.05)).u
    assert abs(u.mean() - f.mean()) < 1e-12


def test_lipschitz_contraction():
    grid = PeriodicGrid(2, 48)
    f = np.sin(2 * np.pi * grid.coords()[0]) * np.cos(4 * np.pi * grid.coords()[1])
    u = solve_resolvent_tv(f, grid, ResolventConfig(0.01, tol=1e-7)).u
    assert lipschitz_seminorm(u, grid) <= lipschitz_seminorm(f, grid) * (1 + 5 * grid.h)


def smooth_field(grid, rng, modes=4):
    x = grid.coords()
    u = np.zeros(grid.shape)
    for _ in range(modes):
        k = rng.integers(-3, 4, size=grid.dim)
        u += rng.normal() * np.sin(2 * np.pi * np.tensordot(k, x, axes=1) + rng.uniform(0, 2 * np.pi))
    return u


@settings(max_examples=20)
@given(st.integers(0, 2**31), st.floats(0.005, 0.05))
def test_resolvent_comparison_property_1d(seed, a):
    # in 1D the forward-difference TV is submodular, so ordering is exact
    grid = PeriodicGrid(1, 64)
    rng = np.random.default_rng(seed)
    f1 = smooth_field(grid, rng) + 0.2 * rng.normal(size=grid.shape)
    f2 = f1 + np.abs(rng.normal(size=grid.shape)) * rng.integers(0, 2, size=grid.shape)
    assert resolvent_comparison_check(f1, f2, grid, ResolventConfig(a, tol=1e-8))


@settings(max_examples=10)
@given(st.integers(0, 2**31), st.floats(-2.0, 2.0))
def test_resolvent_comparison_shift_2d(seed, c):
    grid = PeriodicGrid(2, 16)
    f = smooth_field(grid, np.random.default_rng(seed))
    cfg = ResolventConfig(0.02, tol=1e-8)
    lo, hi = sorted((f, f + c), key=lambda g: float(g.mean()))
    assert resolvent_comparison_check(lo, hi, grid, cfg)


def test_resolvent_comparison_fails_for_resolved_2d_data():
    # the isotropic TV loses ordering even for smooth data near steep fronts
    grid = PeriodicGrid(2, 24)
    rng = np.random.default_rng(0)
    f1 = smooth_field(grid, rng)
    f2 = f1 + rng.uniform(0, 1) * np.maximum(0, 0.3 - distance_to_point(grid, rng.uniform(0, 1, 2)))
    a = rng.uniform(0.005, 0.05)
    assert not resolvent_comparison_check(f1, f2, grid, ResolventConfig(a, tol=1e-7))


def test_isotropic_tv_is_not_submodular_on_noise():
    # grid-scale noise breaks the lattice property of the isotropic discrete TV,
    # so ordering is only expected for resolved data
    grid = PeriodicGrid(2, 12)
    rng = np.random.default_rng(0)
    f1 = rng.normal(size=grid.shape)
    f2 = f1 + np.abs(rng.normal(size=grid.shape)) * rng.integers(0, 2, size=grid.shape)
    a = 0.015625
    u1 = solve_resolvent_tv(f1, grid, ResolventConfig(a, tol=1e-9)).u
    u2 = solve_resolvent_tv(f2, grid, ResolventConfig(a, tol=1e-9)).u
    assert np.max(u1 - u2) > 1e-2


def test_comparison_rejects_unordered():
    grid = PeriodicGrid(1, 8)
    with pytest.raises(ValueError):
        resolvent_comparison_check(np.ones(8), np.zeros(8), grid, ResolventConfig(0.1))


def test_config_validation():
    grid = PeriodicGrid(2, 8)
    for bad in (dict(a=0.0), dict(a=1.0, tol=0.0), dict(a=1.0, max_iter=0)):
        with pytest.raises(ValueError):
            ResolventConfig(**bad)
    with pytest.raises(ValueError, match="stability"):
        ResolventConfig(1.0, tau=1.0).step(grid)
    assert ResolventConfig(1.0).step(grid) == pytest.approx(grid.h**2 / 8)


def test_nonconvergence_carries_residual(rng):
    grid = PeriodicGrid(2, 16)
    with pytest.raises(NonConvergenceError) as info:
        solve_resolvent_tv(rng.normal(size=grid.shape), grid, ResolventConfig(0.05, tol=1e-12, max_iter=200, check_every=50))
    assert info.value.residual > 1e-12


def test_warm_start_is_faster(rng):
    grid = PeriodicGrid(2, 32)
    f = rng.normal(size=grid.shape)
    cfg = ResolventConfig(0.01, tol=1e-7)
    cold = solve_resolvent_tv(f, grid, cfg)
    warm = solve_resolvent_tv(f, grid, cfg, p0=cold.p)
    assert warm.iterations < cold.iterations


def test_smooth_resolvent_residual(rng):
    grid = PeriodicGrid(2, 16)
    f = rng.normal(size=grid.shape)
    e = SmoothedEnergy(100.0)
    sol = solve_resolvent_smooth(f, grid, e, ResolventConfig(0.01, tol=1e-9))
    res = sol.u - 0.01 * operator_Em(sol.u, grid, e) - f
    assert np.max(np.abs(res)) <= 1e-9
    assert sol.method == "smoothed-newton"
    assert abs(sol.u.mean() - f.mean()) < 1e-10


def test_smooth_resolvent_converges_to_tv():
    grid = PeriodicGrid(2, 32)
    f = np.clip(1 - distance_to_point(grid, (0.5, 0.5)) / 0.3, 0, 1)
    a = 0.005
    exact = solve_resolvent_tv(f, grid, ResolventConfig(a, tol=1e-9)).u
    errs = [
        np.max(np.abs(solve_resolvent_smooth(f, grid, SmoothedEnergy(m), ResolventConfig(a, tol=1e-9)).u - exact))
        for m in (10.0, 100.0, 1000.0)
    ]
    assert errs[0] > errs[1] > errs[2]


def test_energy_decreases(rng):
    grid = PeriodicGrid(2, 16)
    f = rng.normal(size=grid.shape)
    u = solve_resolvent_tv(f, grid, ResolventConfig(0.02)).u
    assert resolvent_energy(u, f, grid, 0.02) < resolvent_energy(f, f, grid, 0.02)
    assert gradient_forward(u, grid).shape == (2,) + grid.shape
