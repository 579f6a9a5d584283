"""Density evolution: characteristics, regularized continuity, stiff diffusion."""

import numpy as np
import pytest

from rheoflow.fields import (
    Grid,
    ScalarField,
    VectorField,
    lp_norm,
    random_scalar_field,
    random_vector_field,
)
from rheoflow.transport import (
    DensityBounds,
    DiffusionParams,
    SemiLagrangianMap,
    advect_step,
    density_invariants,
    diffusion_estimate_ladder,
    kss_diffusion_step,
    regularized_continuity_step,
)

GRID = Grid(dim=2, n_points=64)


def rotation_flow(grid, omega=1.0, r_rigid=2.3, r_zero=3.05):
    """Solid-body rotation inside r_rigid, smooth C2 taper to rest by r_zero.

    Any radial angular-velocity profile is divergence-free, and the field is
    supported away from the periodic seam, so it lives cleanly on the torus.
    """
    cx = cy = np.pi
    X, Y = grid.mesh
    dx, dy = X - cx, Y - cy
    r = np.hypot(dx, dy)
    t = np.clip((r - r_rigid) / (r_zero - r_rigid), 0.0, 1.0)
    om = omega * (1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2))
    return VectorField(grid, np.stack([-om * dy, om * dx]))


def gaussian_blob(grid, center, sigma, base=0.5, height=1.0):
    # snap the peak onto a grid node so the sampled max equals the true max;
    # otherwise "within initial bounds" is polluted by O(h^2) sampling of the peak
    cx = grid.axis[np.argmin(np.abs(grid.axis - center[0]))]
    cy = grid.axis[np.argmin(np.abs(grid.axis - center[1]))]
    X, Y = grid.mesh
    r_sq = (X - cx) ** 2 + (Y - cy) ** 2
    return ScalarField(grid, base + height * np.exp(-0.5 * r_sq / sigma**2))


def test_params_validation():
    with pytest.raises(ValueError):
        DiffusionParams(lam=-1.0)
    with pytest.raises(ValueError):
        DensityBounds(lower=2.0, upper=1.0)
    b = DensityBounds(0.5, 1.5)
    assert b.contains(ScalarField.full(GRID, 1.0))
    assert not b.contains(ScalarField.full(GRID, 2.0))


def test_advect_zero_velocity_identity():
    rho = random_scalar_field(GRID, seed=1, kmax=4, mean=1.0)
    out = advect_step(rho, VectorField.zero(GRID), dt=0.1)
    assert np.array_equal(out.values, rho.values)


def test_advect_constant_translation():
    rho = ScalarField.from_function(GRID, lambda x, y: np.cos(x))
    speed = 0.7
    u = VectorField(GRID, np.stack([np.full(GRID.shape, speed), np.zeros(GRID.shape)]))
    dt = 0.5
    out = advect_step(rho, u, dt, order=6)
    exact = np.cos(GRID.mesh[0] - speed * dt)
    assert np.max(np.abs(out.values - exact)) < 1e-6


def test_advect_cfl_advisory_warns():
    rho = ScalarField.full(GRID, 1.0)
    u = VectorField(GRID, np.stack([np.full(GRID.shape, 30.0), np.zeros(GRID.shape)]))
    with pytest.warns(UserWarning, match="CFL"):
        advect_step(rho, u, dt=0.01)


def test_advect_forward_backward_commutation():
    rho = gaussian_blob(GRID, (np.pi + 0.5, np.pi), sigma=0.5)
    u = rotation_flow(GRID, omega=1.0)
    dt = 5e-3
    fwd = advect_step(rho, u, dt, order=6)
    back = advect_step(fwd, VectorField(GRID, -u.components), dt, order=6)
    assert np.max(np.abs(back.values - rho.values)) < 2e-6


def test_advect_maximum_principle_and_mass():
    rho = gaussian_blob(GRID, (np.pi + 0.5, np.pi), sigma=0.5)
    u = rotation_flow(GRID)
    lo, hi = rho.values.min(), rho.values.max()
    mass0 = np.sum(rho.values) * GRID.cell_volume
    cur = rho
    for _ in range(20):
        cur = advect_step(cur, u, dt=5e-3, order=6)
    assert cur.values.min() >= lo - 1e-6
    assert cur.values.max() <= hi + 1e-6
    mass1 = np.sum(cur.values) * GRID.cell_volume
    assert abs(mass1 - mass0) / mass0 < 1e-6


def test_semi_lagrangian_map_reuse_matches_stepping():
    rho = gaussian_blob(GRID, (np.pi, np.pi + 0.4), sigma=0.6)
    u = rotation_flow(GRID)
    m = SemiLagrangianMap(u, dt=5e-3, order=6)
    a = m.apply(m.apply(rho))
    b = advect_step(advect_step(rho, u, 5e-3, order=6), u, 5e-3, order=6)
    assert np.array_equal(a.values, b.values)


def test_regularized_step_steady_constant():
    c = ScalarField.full(GRID, 1.3)
    out = regularized_continuity_step(c, c, VectorField.zero(GRID), eps=0.05, dt=1e-3)
    assert np.max(np.abs(out.values - 1.3)) < 1e-13


def test_regularized_step_symbol_vs_dense_solve():
    # dense oracle on an 8x8 grid: (I(1+dt) - dt*eps*L) x = rho + dt*rho_prev
    g = Grid(dim=2, n_points=8)
    eps, dt = 0.07, 2e-2
    n = g.n_points**2
    lap_dense = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        lap_dense[:, j] = np.fft.ifftn(-g.k_squared * np.fft.fftn(e.reshape(g.shape))).real.ravel()
    rho = random_scalar_field(g, seed=2, kmax=3, mean=1.0, amplitude=0.4)
    rho_prev = random_scalar_field(g, seed=3, kmax=3, mean=1.0, amplitude=0.4)
    M = (1.0 + dt) * np.eye(n) - dt * eps * lap_dense
    expected = np.linalg.solve(M, rho.values.ravel() + dt * rho_prev.values.ravel())
    out = regularized_continuity_step(rho, rho_prev, VectorField.zero(g), eps, dt)
    assert np.max(np.abs(out.values.ravel() - expected)) < 1e-12


def test_regularized_step_maximum_principle_randomized():
    alpha, beta = 0.4, 1.6
    for trial in range(50):
        raw = random_scalar_field(GRID, seed=100 + trial, kmax=4, amplitude=1.0)
        span = raw.values.max() - raw.values.min()
        rho = ScalarField(
            GRID, alpha + (raw.values - raw.values.min()) * (beta - alpha) / span
        )
        prev = random_scalar_field(GRID, seed=200 + trial, kmax=4, amplitude=1.0)
        span_p = prev.values.max() - prev.values.min()
        rho_prev = ScalarField(
            GRID, alpha + (prev.values - prev.values.min()) * (beta - alpha) / span_p
        )
        out = regularized_continuity_step(rho, rho_prev, VectorField.zero(GRID), 0.05, 1e-3)
        assert out.values.min() >= alpha - 1e-8
        assert out.values.max() <= beta + 1e-8


def test_regularized_step_requires_positive_eps():
    c = ScalarField.full(GRID, 1.0)
    with pytest.raises(ValueError):
        regularized_continuity_step(c, c, VectorField.zero(GRID), eps=0.0, dt=1e-3)


def test_kss_single_mode_exact_decay():
    params = DiffusionParams(lam=0.8, mobility=0.3)
    k = 3
    rho = ScalarField.from_function(GRID, lambda x, y: np.cos(k * x))
    dt, n_steps = 1e-3, 200
    cur = rho
    for _ in range(n_steps):
        cur = kss_diffusion_step(cur, VectorField.zero(GRID), params, dt)
    sigma = params.lam * (k**2 + params.mobility * k**4)
    exact = np.exp(-sigma * dt * n_steps) * rho.values
    assert np.max(np.abs(cur.values - exact)) < 1e-10


def test_kss_heat_reduction_when_mobility_zero():
    params = DiffusionParams(lam=0.5, mobility=0.0)
    rho = ScalarField.from_function(GRID, lambda x, y: np.cos(2 * y))
    out = kss_diffusion_step(rho, VectorField.zero(GRID), params, dt=0.05)
    exact = np.exp(-0.5 * 4 * 0.05) * rho.values
    assert np.max(np.abs(out.values - exact)) < 1e-12


def test_kss_mean_conserved_exactly():
    params = DiffusionParams(lam=0.2, mobility=0.1)
    rho = random_scalar_field(GRID, seed=4, kmax=5, mean=0.9, amplitude=0.5)
    psi = random_vector_field(GRID, seed=5, kmax=4, amplitude=1.0, solenoidal=True)
    cur = rho
    for _ in range(50):
        cur = kss_diffusion_step(cur, psi, params, dt=1e-3)
    assert abs(cur.mean() - rho.mean()) < 1e-12


def test_kss_strict_l2_contraction_on_mean_free_data():
    params = DiffusionParams(lam=0.3, mobility=0.05)
    rho = random_scalar_field(GRID, seed=6, kmax=4, amplitude=1.0, mean=0.0)
    out = kss_diffusion_step(rho, VectorField.zero(GRID), params, dt=1e-2)
    assert lp_norm(out, 2) < lp_norm(rho, 2)


def test_ladder_free_decay_monotone_and_clean():
    params = DiffusionParams(lam=0.4, mobility=0.1)
    rho = random_scalar_field(GRID, seed=7, kmax=3, amplitude=0.5, mean=1.0)
    dt, n = 2e-3, 120
    traj = [rho]
    cur = rho
    for _ in range(n):
        cur = kss_diffusion_step(cur, VectorField.zero(GRID), params, dt)
        traj.append(cur)
    report = diffusion_estimate_ladder(traj, None, params, dt)
    assert report.ok, report.flags
    assert np.all(np.diff(np.sqrt(report.l2_sq)) <= 1e-12)


def test_ladder_single_mode_closed_form():
    params = DiffusionParams(lam=0.6, mobility=0.2)
    k, a = 2, 0.7
    rho = ScalarField.from_function(GRID, lambda x, y: 1.0 + a * np.cos(k * y))
    dt, n = 1e-3, 100
    traj = [rho]
    cur = rho
    for _ in range(n):
        cur = kss_diffusion_step(cur, VectorField.zero(GRID), params, dt)
        traj.append(cur)
    report = diffusion_estimate_ladder(traj, None, params, dt)
    sigma = params.lam * (k**2 + params.mobility * k**4)
    V = GRID.volume
    t = report.times
    # |rho|_2^2 = V + (a^2 V / 2) exp(-2 sigma t); |grad rho|^2 = k^2 (a^2 V/2) exp(-2 sigma t)
    expect_l2 = V + 0.5 * a**2 * V * np.exp(-2 * sigma * t)
    expect_grad = k**2 * 0.5 * a**2 * V * np.exp(-2 * sigma * t)
    assert np.max(np.abs(report.l2_sq - expect_l2)) / V < 1e-10
    assert np.max(np.abs(report.grad_sq - expect_grad)) / expect_grad[0] < 1e-10
    assert report.ok


def test_ladder_with_advection_no_flags():
    params = DiffusionParams(lam=0.3, mobility=0.05)
    psi = random_vector_field(GRID, seed=8, kmax=3, amplitude=0.5, solenoidal=True)
    rho = random_scalar_field(GRID, seed=9, kmax=3, amplitude=0.4, mean=1.0)
    dt, n = 1e-3, 150
    traj = [rho]
    cur = rho
    for _ in range(n):
        cur = kss_diffusion_step(cur, psi, params, dt)
        traj.append(cur)
    report = diffusion_estimate_ladder(traj, [psi] * (n + 1), params, dt)
    assert report.ok, report.flags


def test_density_invariants_constant():
    traj = [ScalarField.full(GRID, 2.0)] * 5
    rep = density_invariants(traj)
    assert rep.mass_drift() == 0.0
    assert rep.lp_drift(2) == 0.0
    assert rep.bound_violation() == 0.0


def test_density_invariants_under_rotation():
    # sigma wide enough that order-6 interpolation overshoot stays below the
    # 1e-6 bound tolerance at this resolution (tolerance is resolution-dependent)
    rho = gaussian_blob(GRID, (np.pi + 0.5, np.pi), sigma=0.7)
    u = rotation_flow(GRID)
    traj = [rho]
    cur = rho
    for _ in range(40):
        cur = advect_step(cur, u, dt=5e-3, order=6)
        traj.append(cur)
    rep = density_invariants(traj)
    assert rep.mass_drift() < 1e-7
    assert rep.lp_drift(2) < 1e-5
    assert rep.lp_drift(1) < 1e-7
    assert rep.lp_drift(4) < 1e-5
    assert rep.bound_violation() < 1e-6


def test_density_invariants_under_kss():
    params = DiffusionParams(lam=0.4, mobility=0.1)
    rho = random_scalar_field(GRID, seed=10, kmax=3, amplitude=0.4, mean=1.0)
    traj = [rho]
    cur = rho
    for _ in range(60):
        cur = kss_diffusion_step(cur, VectorField.zero(GRID), params, dt=1e-3)
        traj.append(cur)
    rep = density_invariants(traj)
    assert rep.mass_drift() < 1e-12
    l2 = rep.lp_norms[2]
    assert np.all(np.diff(l2) <= 1e-12)
