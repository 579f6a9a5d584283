"""Periodic fixed point, Picard iteration, contraction measurement."""

import numpy as np
import pytest

from rheoflow.fields import Grid, ScalarField, VectorField, lp_norm
from rheoflow.fixedpoint import (
    PeriodicProblem,
    PicardConfig,
    gks_frozen_solver,
    map_S,
    periodic_solve,
    picard_G,
    powerlaw_frozen_solver,
    replay_periodic,
)
from rheoflow.galerkin import build_basis
from rheoflow.gks import MixtureParams
from rheoflow.rheology import PowerLawParams

GRID = Grid(dim=2, n_points=64)
BASIS = build_basis(GRID, m=8)
PARAMS = PowerLawParams(mu0=1.0, p=2.5)


def make_problem(amplitude=0.05, period=0.4):
    mode = BASIS.fields[0]

    def forcing(t):
        return VectorField(GRID, amplitude * np.sin(2 * np.pi * t / period) * mode)

    return PeriodicProblem(period=period, forcing=forcing, alpha=0.8, beta=1.2, reg_eps=0.05)


def test_problem_validation():
    with pytest.raises(ValueError):
        PeriodicProblem(period=-1.0, forcing=None, alpha=0.5, beta=1.0, reg_eps=0.1)
    with pytest.raises(ValueError):
        PeriodicProblem(period=1.0, forcing=None, alpha=0.0, beta=1.0, reg_eps=0.1)
    with pytest.raises(ValueError):
        PeriodicProblem(period=1.0, forcing=None, alpha=0.5, beta=1.0, reg_eps=0.0)


def test_map_s_constant_fixed_point():
    problem = make_problem()
    const = ScalarField.full(GRID, 1.0)
    zero_u = VectorField.zero(GRID)
    out = map_S(const, problem, lambda i: zero_u, lambda i: const, dt=2e-3)
    assert np.max(np.abs(out.values - 1.0)) < 1e-12


def test_map_s_steady_state_is_discrete_fixed_point():
    # steady solution of -eps lap rho + rho = rho_prev is preserved exactly
    problem = make_problem()
    rho_prev = ScalarField.from_function(GRID, lambda x, y: 1.0 + 0.1 * np.sin(x))
    hat = np.fft.fftn(rho_prev.values)
    steady = ScalarField(GRID, np.fft.ifftn(hat / (1.0 + problem.reg_eps * GRID.k_squared)).real)
    zero_u = VectorField.zero(GRID)
    out = map_S(steady, problem, lambda i: zero_u, lambda i: rho_prev, dt=2e-3)
    assert np.max(np.abs(out.values - steady.values)) < 1e-8


def test_map_s_contraction():
    problem = make_problem()
    zero_u = VectorField.zero(GRID)
    prev = ScalarField.full(GRID, 1.0)
    a = ScalarField(GRID, 1.0 + 0.15 * np.sin(GRID.mesh[0]))
    b = ScalarField(GRID, 1.0 - 0.10 * np.cos(GRID.mesh[1]))
    Sa = map_S(a, problem, lambda i: zero_u, lambda i: prev, dt=2e-3)
    Sb = map_S(b, problem, lambda i: zero_u, lambda i: prev, dt=2e-3)
    d_in = lp_norm(ScalarField(GRID, a.values - b.values), 2)
    d_out = lp_norm(ScalarField(GRID, Sa.values - Sb.values), 2)
    assert d_out < d_in
    measured_c = -np.log(d_out / d_in) / problem.period
    assert measured_c > 0.5  # relaxation term alone gives c = 1


def test_map_s_bound_violation_aborts():
    problem = PeriodicProblem(
        period=0.1, forcing=None, alpha=0.99, beta=1.01, reg_eps=0.05
    )
    rho0 = ScalarField.full(GRID, 1.0)
    hot_prev = ScalarField.full(GRID, 1.5)  # relaxation target outside the bounds
    zero_u = VectorField.zero(GRID)
    with pytest.raises(RuntimeError, match="bounds"):
        map_S(rho0, problem, lambda i: zero_u, lambda i: hot_prev, dt=2e-3)


def test_periodic_solve_trivial_forcing():
    problem = PeriodicProblem(
        period=0.2, forcing=None, alpha=0.8, beta=1.2, reg_eps=0.05
    )
    result = periodic_solve(problem, BASIS, PARAMS, dt=2e-3, tol=1e-10)
    assert result.converged
    assert len(result.log) == 1  # constant density, zero velocity: one pass
    assert lp_norm(result.state0.velocity(), 2) < 1e-12


def test_periodic_solve_small_forcing_contracts():
    problem = make_problem(amplitude=0.05, period=0.4)
    result = periodic_solve(problem, BASIS, PARAMS, dt=2e-3, tol=1e-5, max_iters=40)
    assert result.converged
    ratios = [r["contraction_ratio"] for r in result.log if np.isfinite(r["contraction_ratio"])]
    assert ratios and all(r < 1.0 for r in ratios)
    assert result.measured_c > 0
    mismatch = replay_periodic(result, problem, BASIS, PARAMS, dt=2e-3)
    assert mismatch <= 2e-5


def test_picard_trivial_converges_first_iteration():
    rho0 = ScalarField.full(GRID, 0.9)
    solver = powerlaw_frozen_solver(rho0, None, PARAMS)
    config = PicardConfig(ball_radius=10.0, horizon=0.1, max_iters=10, tol=1e-10)
    result = picard_G(config, solver, dt=1e-3, grid=GRID)
    assert result.converged
    assert len(result.log) == 1
    assert result.final_residual < 1e-12


def small_data_solver(seed=0):
    rho0 = ScalarField.from_function(GRID, lambda x, y: 0.9 + 0.08 * np.sin(x))
    f = VectorField(GRID, 0.05 * BASIS.fields[0])
    return powerlaw_frozen_solver(rho0, f, PARAMS)


def test_picard_small_data_geometric_decay():
    solver = small_data_solver()
    config = PicardConfig(ball_radius=50.0, horizon=0.15, max_iters=25, tol=1e-8)
    result = picard_G(config, solver, dt=1e-3, grid=GRID)
    assert result.converged
    ratios = [
        r["contraction_ratio"]
        for r in result.log
        if np.isfinite(r["contraction_ratio"]) and r["iter"] >= 2
    ]
    assert ratios and all(r <= 0.8 for r in ratios)
    assert result.restarts == 0


def test_picard_two_starts_same_limit():
    solver = small_data_solver()
    config = PicardConfig(ball_radius=50.0, horizon=0.15, max_iters=25, tol=1e-8)
    res_a = picard_G(config, solver, dt=1e-3, grid=GRID)
    n = len(res_a.u_traj)
    bump = [
        VectorField(GRID, 0.02 * np.sin(np.pi * i / (n - 1)) * BASIS.fields[1])
        for i in range(n)
    ]
    res_b = picard_G(config, solver, dt=1e-3, grid=GRID, v0_traj=bump)
    assert res_b.converged
    gap = max(
        float(np.max(np.abs(a.components - b.components)))
        for a, b in zip(res_a.u_traj, res_b.u_traj)
    )
    assert gap <= 2 * config.tol * 100  # limits agree far below the data scale
    from rheoflow.fixedpoint import _traj_distance

    assert _traj_distance(res_a.u_traj, res_b.u_traj, 1e-3) <= 2 * config.tol


def test_picard_ball_violation_halves_horizon():
    rho0 = ScalarField.full(GRID, 0.9)
    f = VectorField(GRID, 0.5 * BASIS.fields[0])
    solver = powerlaw_frozen_solver(rho0, f, PARAMS)
    config = PicardConfig(ball_radius=1e-4, horizon=0.1, max_iters=5, tol=1e-8)
    result = picard_G(config, solver, dt=1e-3, grid=GRID)
    assert result.restarts >= 1
    assert result.horizon < 0.1


def test_picard_rejects_bad_initial_density():
    heavy = ScalarField.full(GRID, 1.5)  # above the rho0 <= 1 smallness window
    with pytest.raises(ValueError):
        powerlaw_frozen_solver(heavy, None, PARAMS)


def test_picard_gks_variant_runs_and_contracts():
    rho0 = ScalarField.from_function(GRID, lambda x, y: 0.9 + 0.05 * np.cos(y))
    params = MixtureParams(rho10=2.0, rho20=1.0, lam=0.05, mobility=0.02, mu=1.0)
    f = VectorField(GRID, 0.05 * BASIS.fields[0])
    solver = gks_frozen_solver(rho0, f, params)
    config = PicardConfig(ball_radius=50.0, horizon=0.1, max_iters=20, tol=1e-8)
    result = picard_G(config, solver, dt=1e-3, grid=GRID)
    assert result.converged
    ratios = [
        r["contraction_ratio"]
        for r in result.log
        if np.isfinite(r["contraction_ratio"]) and r["iter"] >= 2
    ]
    assert all(r < 1.0 for r in ratios)
