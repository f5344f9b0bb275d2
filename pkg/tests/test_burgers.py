import math

import numpy as np
import pytest

from kickflow import (GridFn, PotentialProfile, PotentialSpec, VelocityProfile,
                      centered_grid, check_monotone, g_metric, inviscid_step,
                      inviscid_velocity, sample_potential, velocity_of, velocity_profile,
                      viscous_step, viscous_velocity)
from kickflow.burgers import viscous_inviscid_gap


def zero_field(times=(0, 25), window=(-30, 30)):
    return sample_potential(PotentialSpec.zero(), times, window)


def cosine_field(seed=7, times=(0, 25), window=(-30, 30)):
    return sample_potential(
        PotentialSpec.cosine_mixture(amp_max=0.3, master_seed=seed), times, window)


def profile_from(fn, grid, k, **kw):
    return PotentialProfile(values=GridFn(grid, k, fn(grid.nodes(k)), "linear"), **kw)


def test_inviscid_one_step_quadratic():
    grid = centered_grid(8.0, 0.05)
    prof = profile_from(lambda y: 0.5 * y * y, grid, 1)
    out = inviscid_step(zero_field(), prof, 0)
    xs = grid.nodes(0)
    inner = np.abs(xs) < 4.0
    # min_y [y^2/2 + (y-x)^2/2] = x^2/4, attained at y = x/2 (on-grid for even nodes)
    assert np.max(np.abs(out.values.values[inner] - 0.25 * xs[inner] ** 2)) < grid.h ** 2


def test_inviscid_one_step_linear():
    grid = centered_grid(8.0, 0.05)
    a, b = 0.5, 1.2
    prof = profile_from(lambda y: a * y + b, grid, 1)
    out = inviscid_step(zero_field(), prof, 0)
    xs = grid.nodes(0)
    inner = np.abs(xs) < 4.0
    # vertex x - a is on-grid, so the parabola minimum is exact
    assert np.max(np.abs(out.values.values[inner] - (a * xs[inner] + b - a * a / 2))) < 1e-12


def test_inviscid_step_equals_terminal_dp_enumeration():
    fld = cosine_field(seed=3, window=(-10, 10))
    grid = centered_grid(3.5, 0.5)
    prof = profile_from(lambda y: 0.3 * y * y, grid, 2)
    out = inviscid_step(fld, prof, 0)
    nodes1, nodes2 = grid.nodes(1), grid.nodes(2)
    f1, f2 = fld.eval(1, nodes1), fld.eval(2, nodes2)
    term = prof.values.values
    for i, x in enumerate(grid.nodes(0)):
        brute = np.min(0.5 * (nodes1[:, None] - x) ** 2 + f1[:, None]
                       + 0.5 * (nodes2[None, :] - nodes1[:, None]) ** 2
                       + f2[None, :] + term[None, :])
        assert abs(out.values.values[i] - brute) < 1e-12


def test_viscous_one_step_linear_any_kappa():
    grid = centered_grid(10.0, 0.05)
    a, b = 0.5, -0.7
    prof = profile_from(lambda y: a * y + b, grid, 1)
    xs = grid.nodes(0)
    inner = np.abs(xs) < 4.0
    for kappa in (1.0, 0.5, 0.1):
        out = viscous_step(zero_field(), prof, 0, kappa)
        want = a * xs[inner] + b - a * a / 2
        assert np.max(np.abs(out.values.values[inner] - want)) < 1e-6


def test_viscous_one_step_quadratic_closed_form():
    grid = centered_grid(10.0, 0.05)
    prof = profile_from(lambda y: 0.5 * y * y, grid, 1)
    kappa = 1.0
    out = viscous_step(zero_field(), prof, 0, kappa)
    xs = grid.nodes(0)
    inner = np.abs(xs) < 3.0
    want = 0.25 * xs[inner] ** 2 + 0.5 * kappa * math.log(2.0)
    assert np.max(np.abs(out.values.values[inner] - want)) < 1e-6
    assert abs(0.5 * math.log(2.0) - 0.3466) < 1e-4


def test_operator_cocycles():
    fld = cosine_field(seed=11)
    grid = centered_grid(8.0, 0.1)
    prof = profile_from(lambda y: 0.2 * y * y, grid, 6)
    direct_v = viscous_step(fld, prof, 0, 0.4)
    comp_v = viscous_step(fld, viscous_step(fld, prof, 3, 0.4), 0, 0.4)
    assert np.max(np.abs(direct_v.values.values - comp_v.values.values)) < 1e-10
    direct_i = inviscid_step(fld, prof, 0)
    comp_i = inviscid_step(fld, inviscid_step(fld, prof, 3), 0)
    assert np.max(np.abs(direct_i.values.values - comp_i.values.values)) < 1e-10


def test_velocity_of_finite_differences():
    grid = centered_grid(4.0, 0.1)
    u = velocity_of(profile_from(lambda y: 0.5 * y * y, grid, 0))
    xs = grid.nodes(0)
    assert np.max(np.abs(u.values.values[1:-1] - xs[1:-1])) < 1e-12
    lin = velocity_of(profile_from(lambda y: 0.8 * y - 2.0, grid, 0))
    assert np.max(np.abs(lin.values.values - 0.8)) < 1e-12


def test_velocity_derivative_richardson():
    fld = cosine_field(seed=13)
    kappa = 0.5
    vals = {}
    for h in (0.1, 0.05):
        grid = centered_grid(8.0, h)
        prof = profile_from(lambda y: 0.2 * y * y, grid, 2)
        out = viscous_step(fld, prof, 1, kappa)
        u = velocity_of(out)
        i = grid.node_index(1.0)
        di = (out.values.values[i + 1] - out.values.values[i - 1]) / (2 * h)
        assert u.values.values[i] == pytest.approx(di, abs=1e-14)
        vals[h] = float(u.values.values[i])
    # centered differences converge at second order: halving h shrinks the wobble
    assert abs(vals[0.05] - vals[0.1]) < 0.01


def test_check_monotone_trivials():
    grid = centered_grid(4.0, 0.1)
    flat = VelocityProfile(values=GridFn(grid, 0, np.zeros(grid.n_nodes), "linear"))
    assert check_monotone(flat) == 0.0
    half = VelocityProfile(values=GridFn(grid, 0, grid.nodes(0) / 2, "linear"))
    assert check_monotone(half) == 0.0
    bad = VelocityProfile(values=GridFn(grid, 0, 2.0 * grid.nodes(0), "linear"))
    assert check_monotone(bad) > 0.0


def test_g_metric_trivials_and_linearity():
    grid = centered_grid(6.0, 0.1)
    u1 = VelocityProfile(values=GridFn(grid, 0, np.sin(0.3 * grid.nodes(0)) * 0.5, "linear"))
    assert g_metric(u1, u1, 4.0) == 0.0
    u2 = VelocityProfile(values=GridFn(grid, 0, u1.values.values + 0.25, "linear"))
    x = grid.nodes(0)
    w = np.maximum(0.0, 1.0 - np.abs(x) / 4.0)
    assert abs(g_metric(u1, u2, 4.0) - 0.25 * grid.h * w.sum()) < 1e-12


def test_g_metric_ignores_single_jump_node():
    grid = centered_grid(6.0, 0.1)
    x = grid.nodes(0)
    u1 = np.where(x < 0, 1.0, -1.0)
    u2 = u1.copy()
    j = grid.node_index(0.0)
    u2[j] = 1.0  # differs only at the jump node
    p1 = VelocityProfile(values=GridFn(grid, 0, u1, "linear"))
    p2 = VelocityProfile(values=GridFn(grid, 0, u2, "linear"))
    assert g_metric(p1, p2, 4.0) == 0.0


def test_monotonicity_propagates_along_orbit():
    fld = cosine_field(seed=17)
    grid = centered_grid(10.0, 0.08)
    prof = profile_from(lambda y: 0.3 * y * y, grid, 20)
    for k in range(19, -1, -1):
        prof = viscous_step(fld, prof, k, 0.4)
        viol = check_monotone(velocity_of(prof))
        assert viol <= 1e-9
    prof = profile_from(lambda y: 0.3 * y * y, grid, 20)
    for k in range(19, -1, -1):
        prof = inviscid_step(fld, prof, k)
        assert check_monotone(velocity_of(prof)) <= 1e-9


def test_slope_preservation_zero_field_exact():
    grid = centered_grid(12.0, 0.05)
    vm, vp = -0.4, 0.6
    prof = profile_from(lambda y: np.where(y < 0, vm * y, vp * y), grid, 2,
                        v_minus=vm, v_plus=vp)
    assert prof.check_slopes(tol=1e-9)
    for out in (inviscid_step(zero_field(), prof, 0),
                viscous_step(zero_field(), prof, 0, 0.3)):
        lo, hi = out.secant_slopes(edge_fraction=0.25)
        assert abs(lo - vm) < 2 * grid.h + 1e-6
        assert abs(hi - vp) < 2 * grid.h + 1e-6


def test_slope_preservation_random_field_within_amplitude_budget():
    fld = cosine_field(seed=19)
    grid = centered_grid(12.0, 0.05)
    vm, vp = -0.4, 0.6
    frac = 0.25
    span = frac * (grid.x_hi - grid.x_lo)
    # two kicks add at most their amplitude bounds to the secant numerator
    budget = 2 * (fld.slice_bound(1) + fld.slice_bound(2)) / span + 2 * grid.h
    prof = profile_from(lambda y: np.where(y < 0, vm * y, vp * y), grid, 2,
                        v_minus=vm, v_plus=vp)
    for out in (inviscid_step(fld, prof, 0), viscous_step(fld, prof, 0, 0.3)):
        lo, hi = out.secant_slopes(edge_fraction=frac)
        assert abs(lo - vm) < budget
        assert abs(hi - vp) < budget


def test_viscous_inviscid_gap_sandwich():
    fld = cosine_field(seed=23)
    grid = centered_grid(6.0, 0.1)
    prof = profile_from(lambda y: 0.25 * y * y, grid, 3)
    for kappa in (0.5, 0.2):
        gap = viscous_inviscid_gap(fld, prof, 0, kappa)
        xs = grid.nodes(0)
        inner = np.abs(xs) < 3.0
        assert np.min(gap[inner]) >= -1e-9
        assert np.max(gap[inner]) <= kappa * 3 * math.log(grid.n_nodes) + 1e-9


def test_velocity_profile_matches_pointwise_ops():
    fld = cosine_field(seed=29)
    grid = centered_grid(8.0, 0.05)
    n, N = 1, 12
    prof0 = velocity_profile(fld, n, 0.0, 0.0, N, grid)
    profk = velocity_profile(fld, n, 0.0, 0.3, N, grid)
    for x in (-1.5, 0.0, 2.0):
        i = grid.node_index(x, n)
        u_point = inviscid_velocity(fld, n, x, 0.0, N, grid).value
        assert abs(prof0.values.values[i] - u_point) < 1e-12
        v_point = viscous_velocity(fld, n, x, 0.0, 0.3, N, grid)
        assert abs(profk.values.values[i] - v_point) < 1e-9


def test_velocity_profile_monotone():
    fld = cosine_field(seed=31)
    grid = centered_grid(8.0, 0.05)
    for kappa in (0.0, 0.1, 0.4):
        u = velocity_profile(fld, 1, 0.0, kappa, 12, grid)
        assert check_monotone(u) <= 1e-9


def test_evolve_orbit_and_jsonl():
    import json as _json
    from kickflow.burgers import evolve_orbit, orbit_jsonl
    fld = cosine_field(seed=37)
    grid = centered_grid(8.0, 0.1)
    prof = profile_from(lambda y: 0.2 * y * y, grid, 5)
    orbit = evolve_orbit(fld, prof, 0, 0.3)
    assert [p.values.k for p in orbit] == [5, 4, 3, 2, 1, 0]
    text = orbit_jsonl(orbit)
    recs = [_json.loads(line) for line in text.strip().splitlines()]
    assert [r["k"] for r in recs] == [5, 4, 3, 2, 1, 0]
    assert all(r["monotone_violation"] <= 1e-9 for r in recs)


def test_velocity_profiles_viscosity_independent_without_potential():
    grid = centered_grid(8.0, 0.05)
    n, N = 1, 12
    # positive temperatures agree to quadrature accuracy on zero potential
    u_ref = velocity_profile(zero_field(), n, 0.0, 0.4, N, grid)
    for kappa in (0.2, 0.1):
        uk = velocity_profile(zero_field(), n, 0.0, kappa, N, grid)
        assert g_metric(uk, u_ref, 5.0) < 1e-6
    # the zero-temperature route is argmin-quantized: off by at most h/2 per node
    u0 = velocity_profile(zero_field(), n, 0.0, 0.0, N, grid)
    assert g_metric(u_ref, u0, 5.0) <= 0.5 * grid.h * 5.0 + 1e-9
    const = sample_potential(PotentialSpec.constant(1.1), (0, 25), (-30, 30))
    uc = velocity_profile(const, n, 0.0, 0.4, N, grid)
    assert float(np.abs(uc.values.values - u_ref.values.values).max()) < 1e-9
