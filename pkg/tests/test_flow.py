import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvflow.energy import SmoothedEnergy, operator_Em, wulff_value
from tvflow.errors import BarrierFailure, BlowUpError, ConstructionError
from tvflow.flow import (
    BarrierSpec,
    EllipticOperatorF,
    FlowConfig,
    _advance,
    barrier_radial,
    barrier_supersolution_check,
    build_barrier,
    comparison_probe,
    cutoff_theta,
    cutoff_theta_slope,
    evolve,
    evolve_semigroup_tv,
    radial_operator_bound,
    step_explicit,
)
from tvflow.grid import PeriodicGrid, distance_to_point, gradient_forward, lipschitz_seminorm
from tvflow.io import read_tvf1

TV = EllipticOperatorF.tv_flow()
CRYST = EllipticOperatorF.crystalline_graph(1.0)


def smooth_data(grid, rng, amp=0.2):
    x = grid.coords()
    u = np.zeros(grid.shape)
    for _ in range(3):
        k = rng.integers(-2, 3, size=grid.dim)
        u += amp * rng.normal() * np.sin(2 * np.pi * np.tensordot(k, x, axes=1) + rng.uniform(0, 6.3))
    return u


# --- operators --------------------------------------------------------------


def test_operator_values():
    p = np.array([[3.0], [4.0]])
    assert TV(p, np.array([2.0]))[0] == -2.0
    assert CRYST(p, np.array([2.0]))[0] == pytest.approx(-np.sqrt(26) * 3.0)


def test_audit_rejects_increasing_in_xi():
    with pytest.raises(ConstructionError, match="degenerate elliptic"):
        EllipticOperatorF.custom(lambda p, xi: xi)
    ok = EllipticOperatorF.custom(lambda p, xi: -np.tanh(xi) * (1 + np.sum(p * p, axis=0)))
    assert ok.ellipticity_audit() == 0
    with pytest.raises(ConstructionError):
        EllipticOperatorF("mystery")
    with pytest.raises(ConstructionError):
        EllipticOperatorF("custom")


def test_xi_lipschitz_and_sup():
    assert TV.xi_lipschitz(5.0) == 1.0
    assert CRYST.xi_lipschitz(3.0) == pytest.approx(np.sqrt(10))
    custom = EllipticOperatorF.custom(lambda p, xi: -2.0 * xi)
    assert custom.xi_lipschitz(1.0) == pytest.approx(2.0, rel=1e-6)
    assert TV.sup_abs(4.0, 7.0) == pytest.approx(7.0)
    assert CRYST.sup_abs(3.0, 2.0) == pytest.approx(np.sqrt(10) * 3.0)


# --- stepping ---------------------------------------------------------------


@pytest.mark.parametrize("dn", [(1, 32), (2, 16), (3, 8)])
@pytest.mark.parametrize("F", [TV, CRYST], ids=["tv", "crystalline"])
def test_compiled_step_matches_numpy(rng, dn, F):
    grid = PeriodicGrid(*dn)
    u = smooth_data(grid, rng)
    e = SmoothedEnergy(10.0)
    dt = 1e-5
    ref = u.copy()
    for s in range(5):
        ref = step_explicit(ref, F, e, dt, grid, s)
    out = _advance(u.copy(), F, e, dt, 5, grid, 0)
    assert np.allclose(out, ref, rtol=0, atol=1e-12)


def test_custom_operator_runs_through_numpy(rng):
    grid = PeriodicGrid(2, 16)
    u0 = smooth_data(grid, rng)
    custom = EllipticOperatorF.custom(lambda p, xi: -xi)
    cfg = FlowConfig(SmoothedEnergy(10.0), 1e-4)
    a = evolve(u0, custom, cfg, grid).final
    b = evolve(u0, TV, cfg, grid).final
    assert np.allclose(a, b, atol=1e-12)


def test_constants_and_drift():
    grid = PeriodicGrid(2, 16)
    c = np.full(grid.shape, 0.7)
    cfg = FlowConfig(SmoothedEnergy(10.0), 0.01)
    assert np.all(evolve(c, TV, cfg, grid).final == 0.7)
    # crystalline with c moves a flat function at unit speed
    out = evolve(c, EllipticOperatorF.crystalline_graph(2.0), cfg, grid).final
    assert np.allclose(out, 0.7 + 2.0 * 0.01)


def test_time_step_rule():
    grid = PeriodicGrid(2, 32)
    cfg = FlowConfig(SmoothedEnergy(100.0), 1.0)
    assert cfg.time_step(grid, TV, 1.0) == pytest.approx(0.9 * grid.h**2 / (4 * (100 + 0.02)))
    assert cfg.time_step(grid, CRYST, 3.0) == pytest.approx(cfg.time_step(grid, TV, 3.0) / np.sqrt(10))
    assert FlowConfig(SmoothedEnergy(1.0), 1.0, dt=0.1).time_step(grid, TV, 1.0) == 0.1
    for bad in (dict(T=0.0), dict(T=1.0, dt=-1.0), dict(T=1.0, safety=2.0), dict(T=1.0, snapshot_times=(2.0,))):
        with pytest.raises(ValueError):
            FlowConfig(SmoothedEnergy(1.0), **bad)


@settings(max_examples=10)
@given(st.integers(0, 2**31))
def test_max_principle_and_mean(seed):
    grid = PeriodicGrid(2, 24)
    u0 = smooth_data(grid, np.random.default_rng(seed))
    u = evolve(u0, TV, FlowConfig(SmoothedEnergy(10.0), 2e-4), grid).final
    assert u.max() <= u0.max() + 1e-12 and u.min() >= u0.min() - 1e-12
    assert abs(u.mean() - u0.mean()) < 1e-12
    assert lipschitz_seminorm(u, grid) <= lipschitz_seminorm(u0, grid) * (1 + 10 * grid.h)


def ordered_pair(grid, rng):
    u0 = smooth_data(grid, rng)
    bump = np.maximum(0, 0.3 - distance_to_point(grid, rng.uniform(0, 1, grid.dim)))
    return u0, u0 + rng.uniform(0.1, 1) * bump


@settings(max_examples=20)
@given(st.integers(0, 2**31), st.sampled_from([10.0, 100.0, 1000.0]))
def test_comparison_probe_tv_1d(seed, m):
    # in one dimension the flux is a monotone function of one difference, so the
    # explicit step is order preserving under the automatic time step
    grid = PeriodicGrid(1, 64)
    u0, v0 = ordered_pair(grid, np.random.default_rng(seed))
    cfg = FlowConfig(SmoothedEnergy(m), 1e-3, snapshot_times=(5e-4,))
    assert comparison_probe(u0, v0, TV, cfg, grid, slack=1e-12)


@settings(max_examples=10)
@given(st.integers(0, 2**31), st.sampled_from(["tv", "crystalline"]))
def test_comparison_probe_2d_within_scheme_slack(seed, kind):
    # the isotropic flux couples the axes, so the 2-d scheme is only nearly
    # monotone; ordering holds up to a small fraction of the initial gap
    grid = PeriodicGrid(2, 24)
    u0, v0 = ordered_pair(grid, np.random.default_rng(seed))
    F = TV if kind == "tv" else CRYST
    cfg = FlowConfig(SmoothedEnergy(10.0), 1e-3, snapshot_times=(5e-4,))
    assert comparison_probe(u0, v0, F, cfg, grid, slack=0.01 * float(np.max(v0 - u0)))


def test_comparison_probe_shift_is_exact():
    grid = PeriodicGrid(2, 16)
    u0 = smooth_data(grid, np.random.default_rng(3))
    cfg = FlowConfig(SmoothedEnergy(10.0), 5e-4)
    tu = evolve(u0, TV, cfg, grid).final
    tv = evolve(u0 + 1.0, TV, cfg, grid).final
    assert np.allclose(tv - tu, 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        comparison_probe(u0 + 1.0, u0, TV, cfg, grid)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_blow_up_detected(dim):
    grid = PeriodicGrid(dim, 8)
    u0 = np.random.default_rng(0).normal(size=grid.shape)
    with pytest.raises(BlowUpError) as info:
        evolve(u0, TV, FlowConfig(SmoothedEnergy(10.0), 1e4, dt=10.0), grid)
    assert info.value.step is not None and len(info.value.node) == dim


def test_trajectory_snapshots_and_files(tmp_path, rng):
    grid = PeriodicGrid(2, 16)
    cfg = FlowConfig(SmoothedEnergy(10.0), 1e-3, snapshot_times=(2.5e-4, 5e-4))
    traj = evolve(smooth_data(grid, rng), TV, cfg, grid)
    assert traj.times == [0.0, 2.5e-4, 5e-4, 1e-3]
    assert traj.steps * traj.dt == pytest.approx(1e-3)
    manifest = traj.write(tmp_path).read_text().splitlines()
    assert manifest[0] == "time,file,lipschitz,min,max,mean" and len(manifest) == 5
    u, g = read_tvf1(tmp_path / "snap_0003.tvf1")
    assert g == grid and np.array_equal(u, traj.final)


# --- semigroup --------------------------------------------------------------


def test_semigroup_plateau_1d():
    # the plateau of width L descends by 2 dt / L per implicit step
    grid = PeriodicGrid(1, 128)
    u0 = np.zeros(grid.shape)
    u0[48:80] = 1.0
    traj = evolve_semigroup_tv(u0, 0.001, 0.004, grid)
    tops = [u[64] for u in traj.snapshots]
    assert np.allclose(np.diff(tops), -2 * 0.001 / 0.25, atol=1e-6)
    assert len(traj.snapshots) == 5
    with pytest.raises(ValueError):
        evolve_semigroup_tv(u0, 0.0, 1.0, grid)


def test_semigroup_and_explicit_agree_for_large_m():
    grid = PeriodicGrid(2, 32)
    u0 = 0.5 * np.clip(1 - distance_to_point(grid, (0.5, 0.5)) / 0.3, 0, 1)
    T = 2e-3
    ref = evolve_semigroup_tv(u0, T / 10, T, grid).final
    errs = [np.max(np.abs(evolve(u0, TV, FlowConfig(SmoothedEnergy(m), T), grid).final - ref)) for m in (10.0, 100.0)]
    assert errs[1] < errs[0]


# --- barriers ---------------------------------------------------------------


@given(st.floats(0.1, 10.0), st.floats(-50, 50), st.floats(-50, 50))
def test_cutoff_theta_properties(q, s1, s2):
    lo, hi = min(s1, s2), max(s1, s2)
    assert cutoff_theta(lo, q) <= cutoff_theta(hi, q) + 1e-12
    assert abs(cutoff_theta(s1, q)) <= q + 1e-12
    if abs(s1) <= q / 2:
        assert cutoff_theta(s1, q) == s1
    if abs(s1) >= 2 * q:
        assert cutoff_theta(s1, q) == pytest.approx(np.sign(s1) * q)
    assert 0 <= cutoff_theta_slope(s1, q) <= 1 + 1e-12


def test_cutoff_theta_slope_matches_derivative():
    s = np.linspace(0.1, 9.9, 200)
    fd = (cutoff_theta(s + 1e-6, 2.5) - cutoff_theta(s - 1e-6, 2.5)) / 2e-6
    assert np.allclose(cutoff_theta_slope(s, 2.5), fd, atol=1e-5)


def test_barrier_matches_rescaled_wulff_near_center():
    spec = BarrierSpec(A=8.0, q=4.0, m=100.0)
    rho, w, slope = barrier_radial(spec, 0.5, 20000)
    e = spec.energy
    # where the slope cap is inactive, w = (W*(A rho) - W*(0)) / A
    core = slope < spec.q / 2
    expect = (wulff_value(spec.A * rho[core], e) - wulff_value(0.0, e)) / spec.A
    assert np.allclose(w[core], expect, atol=1e-6)
    assert np.all(np.diff(w) >= 0) and slope.max() <= spec.q + 1e-12


def test_barrier_spec_validation():
    with pytest.raises(ValueError, match="4/q"):
        BarrierSpec(A=1.0, q=1.0, m=3.0)
    with pytest.raises(ValueError):
        BarrierSpec(A=0.0, q=1.0, m=10.0)
    with pytest.raises(ValueError):
        BarrierSpec(A=1.0, q=1.0, m=10.0, B=-1.0)


def test_periodized_barrier():
    grid = PeriodicGrid(2, 64)
    spec = BarrierSpec(A=8.0, q=4.0, m=100.0)
    w, seam = build_barrier(spec, grid, return_seam=True)
    assert w[32, 32] == 0.0 and np.all(w >= 0)
    assert np.max(np.abs(gradient_forward(w, grid))) <= spec.q * (1 + 1e-9)
    # symmetric under the reflection through the centre and periodic across the wrap
    assert np.allclose(w[1:, 1:], w[1:, 1:][::-1, ::-1])
    assert seam[0, 0] and not seam[32, 32]


def test_radial_operator_bound_at_least_An():
    spec = BarrierSpec(A=2.0, q=4.0, m=10.0)
    assert radial_operator_bound(spec, 2, 1.0) >= 4.0
    # a steeper core gives a larger bound
    assert radial_operator_bound(BarrierSpec(A=8.0, q=4.0, m=10.0), 2, 1.0) > radial_operator_bound(spec, 2, 1.0)


def test_barrier_check_sizes_B_and_reports(rng):
    grid = PeriodicGrid(2, 64)
    spec = BarrierSpec(A=8.0, q=4.0, m=10.0)
    rep = barrier_supersolution_check(spec, CRYST, grid)
    assert rep.C >= rep.C_radial and rep.C >= rep.C_grid
    assert rep.margin >= -1e-2 * rep.B
    assert rep.B == pytest.approx(CRYST.sup_abs(spec.q, rep.C))
    # an undersized B is rejected with the failing node attached
    with pytest.raises(BarrierFailure) as info:
        barrier_supersolution_check(BarrierSpec(A=8.0, q=4.0, m=10.0, B=0.0), TV, grid)
    assert info.value.margin < 0 and len(info.value.node) == 2
    quiet = barrier_supersolution_check(BarrierSpec(A=8.0, q=4.0, m=10.0, B=0.0), TV, grid, raise_on_failure=False)
    assert quiet.margin < 0 and quiet.residual.shape == grid.shape
    xi = operator_Em(build_barrier(spec, grid), grid, spec.energy)
    assert np.allclose(quiet.residual, -xi)
