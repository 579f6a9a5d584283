"""Galerkin layer: basis, Gram matrix, RHS assembly, coupled stepping, energy."""

import numpy as np
import pytest

from rheoflow.fields import Grid, ScalarField, VectorField, divergence, sup_norm
from rheoflow.galerkin import (
    BlowupError,
    GalerkinState,
    assemble_rhs,
    build_basis,
    energy_report,
    gram_matrix,
    momentum_step,
    run_semi_galerkin,
)
from rheoflow.newtonian import reference_newtonian_step
from rheoflow.rheology import PowerLawParams

GRID = Grid(dim=2, n_points=64)
BASIS = build_basis(GRID, m=12)


def taylor_green(grid):
    return VectorField.from_functions(
        grid,
        [lambda x, y: np.sin(x) * np.cos(y), lambda x, y: -np.cos(x) * np.sin(y)],
    )


def test_basis_ordering_and_count():
    assert BASIS.m == 12
    ksq = [sum(c * c for c in mode.k) for mode in BASIS.modes]
    assert ksq == sorted(ksq)
    assert ksq[0] == 1 and ksq[4] == 2


def test_basis_modes_divergence_free():
    for i in range(BASIS.m):
        w = VectorField(GRID, BASIS.fields[i])
        assert sup_norm(divergence(w)) < 1e-13


def test_basis_orthonormal():
    G = BASIS._flat @ BASIS._flat.T * GRID.cell_volume
    assert np.max(np.abs(G - np.eye(BASIS.m))) < 1e-12


def test_basis_cutoff_and_errors():
    b = build_basis(GRID, cutoff=2)
    assert all(sum(c * c for c in m.k) <= 4 for m in b.modes)
    with pytest.raises(ValueError):
        build_basis(GRID, m=4, cutoff=2)
    with pytest.raises(ValueError):
        build_basis(GRID, cutoff=40)
    with pytest.raises(ValueError):
        build_basis(Grid(dim=2, n_points=8), m=4000)


def test_basis_3d_polarizations():
    g3 = Grid(dim=3, n_points=16)
    b3 = build_basis(g3, m=8)
    for i in range(b3.m):
        w = VectorField(g3, b3.fields[i])
        assert sup_norm(divergence(w)) < 1e-13
    G = b3._flat @ b3._flat.T * g3.cell_volume
    assert np.max(np.abs(G - np.eye(b3.m))) < 1e-12


def test_gram_identity_and_scaling():
    one = ScalarField.full(GRID, 1.0)
    A = gram_matrix(one, BASIS)
    assert np.max(np.abs(A - np.eye(BASIS.m))) < 1e-12
    two = ScalarField.full(GRID, 2.0)
    assert np.max(np.abs(gram_matrix(two, BASIS) - 2.0 * np.eye(BASIS.m))) < 1e-12


def test_gram_rejects_nonpositive_density():
    bad = ScalarField.from_function(GRID, lambda x, y: np.sin(x))
    with pytest.raises(ValueError):
        gram_matrix(bad, BASIS)


def test_gram_oracle_and_spd():
    rho = ScalarField.from_function(GRID, lambda x, y: 1.0 + 0.5 * np.sin(x))
    basis8 = build_basis(GRID, m=8)
    A = gram_matrix(rho, basis8)
    assert np.max(np.abs(A - A.T)) < 1e-12
    # dense quadrature oracle at 4x resolution
    fine = Grid(dim=2, n_points=256)
    fine_basis = build_basis(fine, m=8)
    rho_fine = 1.0 + 0.5 * np.sin(fine.mesh[0])
    W = fine_basis.fields.reshape(8, -1)
    rho_rep = np.concatenate([rho_fine.ravel()] * 2)
    A_fine = (W * rho_rep) @ W.T * fine.cell_volume
    assert np.max(np.abs(A - A_fine)) < 1e-10
    eigmin = np.linalg.eigvalsh(A).min()
    assert eigmin >= 0.5 - 1e-10


def test_assemble_rhs_trivial_cases():
    params = PowerLawParams(1.0, 2.0)
    one = ScalarField.full(GRID, 1.0)
    state = GalerkinState(np.zeros(BASIS.m), BASIS)
    H = assemble_rhs(state, one, None, params)
    assert np.max(np.abs(H)) < 1e-13
    f = VectorField(GRID, BASIS.fields[0])
    H = assemble_rhs(state, one, f, params)
    expect = np.zeros(BASIS.m)
    expect[0] = 1.0
    assert np.max(np.abs(H - expect)) < 1e-12


def test_assemble_rhs_overresolved_oracle():
    # pairings recomputed at 4x resolution with -(T, D(w_i)) instead of (div T, w_i)
    from rheoflow.rheology import deformation_tensor, effective_viscosity
    from rheoflow.fields import SYM_INDEX

    params = PowerLawParams(mu0=1.0, p=3.0)
    m = 8
    basis = build_basis(GRID, m=m)
    coeffs = 0.1 * (np.arange(1, m + 1) % 3 - 1.0)
    rho = ScalarField.from_function(GRID, lambda x, y: 1.0 + 0.2 * np.cos(y))
    f = VectorField.from_functions(
        GRID, [lambda x, y: 0.1 * np.sin(y), lambda x, y: 0.1 * np.sin(x)]
    )
    H = assemble_rhs(GalerkinState(coeffs, basis), rho, f, params)

    fine = Grid(dim=2, n_points=256)
    fb = build_basis(fine, m=m)
    u_f = fb.reconstruct(coeffs)
    rho_f = 1.0 + 0.2 * np.cos(fine.mesh[1])
    f_f = np.stack([0.1 * np.sin(fine.mesh[1]), 0.1 * np.sin(fine.mesh[0])])
    D = deformation_tensor(u_f)
    nu = effective_viscosity(D.frobenius_sq(), params)
    ks = fine.wavenumbers
    hats = [np.fft.fftn(c) for c in u_f.components]
    conv = np.stack(
        [
            sum(u_f.components[j] * np.fft.ifftn(1j * ks[j] * hats[i]).real for j in range(2))
            for i in range(2)
        ]
    )
    H_fine = np.empty(m)
    for i in range(m):
        w = fb.reconstruct(np.eye(m)[i])
        Dw = deformation_tensor(w)
        stress_pair = 0.0
        for cD, cW, (a, b) in zip(D.components, Dw.components, SYM_INDEX[2]):
            wgt = 1.0 if a == b else 2.0
            stress_pair += np.sum(wgt * 2.0 * nu * cD * cW)
        stress_pair *= fine.cell_volume
        conv_pair = np.sum(rho_f[None] * conv * w.components) * fine.cell_volume
        force_pair = np.sum(rho_f[None] * f_f * w.components) * fine.cell_volume
        H_fine[i] = -conv_pair - stress_pair + force_pair
    assert np.max(np.abs(H - H_fine)) < 1e-8


def test_convection_skew_symmetry():
    params = PowerLawParams(1.0, 2.0)
    one = ScalarField.full(GRID, 1.0)
    coeffs = 0.3 * np.sin(np.arange(BASIS.m) + 1.0)
    state = GalerkinState(coeffs, BASIS)
    H = assemble_rhs(state, one, None, params)
    # remove the stress part to isolate the convection pairing
    from rheoflow.rheology import stress_divergence_direct

    u = state.velocity()
    stress = stress_divergence_direct(u, params, apply_dealias=True)
    H_stress = BASIS.inner_with_modes(stress.components)
    conv_pair = float(coeffs @ (H - H_stress))
    assert abs(conv_pair) < 1e-10


def test_momentum_step_zero_is_equilibrium():
    params = PowerLawParams(1.0, 2.5)
    one = ScalarField.full(GRID, 1.0)
    state = GalerkinState(np.zeros(BASIS.m), BASIS)
    out = momentum_step(state, one, None, params, dt=1e-3)
    assert np.max(np.abs(out.coeffs)) < 1e-14


def test_taylor_green_exponential_decay():
    params = PowerLawParams(mu0=1.0, p=2.0)
    one = ScalarField.full(GRID, 1.0)
    c0 = BASIS.project(taylor_green(GRID))
    state = GalerkinState(c0, BASIS)
    dt, n_steps = 1e-3, 100
    for _ in range(n_steps):
        state = momentum_step(state, one, None, params, dt, gram=np.eye(BASIS.m))
    expect = c0 * np.exp(-2.0 * params.mu0 * dt * n_steps)
    assert np.max(np.abs(state.coeffs - expect)) < 1e-6


def test_galerkin_matches_reference_newtonian_stepper():
    params = PowerLawParams(mu0=0.7, p=2.0)
    one = ScalarField.full(GRID, 1.0)
    u = taylor_green(GRID)
    state = GalerkinState(BASIS.project(u), BASIS)
    for _ in range(5):
        state = momentum_step(state, one, None, params, 1e-3, gram=np.eye(BASIS.m))
        u = reference_newtonian_step(u, nu=0.7, dt=1e-3)
    diff = state.velocity().components - u.components
    assert np.max(np.abs(diff)) < 1e-10


def test_collocation_step_matches_reference_at_unit_density():
    from rheoflow.galerkin import collocation_momentum_step

    params = PowerLawParams(mu0=0.7, p=2.0)
    one = ScalarField.full(GRID, 1.0)
    u_c = u_r = taylor_green(GRID)
    for _ in range(3):
        u_c = collocation_momentum_step(u_c, one, None, params, 1e-3)
        u_r = reference_newtonian_step(u_r, nu=0.7, dt=1e-3)
    assert np.max(np.abs(u_c.components - u_r.components)) < 1e-10
    with pytest.raises(ValueError):
        collocation_momentum_step(
            u_c, ScalarField.from_function(GRID, lambda x, y: np.sin(x)), None, params, 1e-3
        )


def test_reconstructed_velocity_divergence_free():
    rho = ScalarField.from_function(GRID, lambda x, y: 1.0 + 0.5 * np.sin(x))
    traj = run_semi_galerkin(
        BASIS, rho, BASIS.project(taylor_green(GRID)),
        PowerLawParams(1.0, 2.5), dt=2e-3, t_end=0.05,
    )
    u = traj.basis.reconstruct(traj.coeffs[-1])
    assert sup_norm(divergence(u)) < 1e-12


def test_semi_galerkin_energy_monotone_without_forcing():
    rho = ScalarField.from_function(GRID, lambda x, y: 1.0 + 0.5 * np.sin(x))
    c0 = np.zeros(BASIS.m)
    c0[0] = 0.5
    traj = run_semi_galerkin(
        BASIS, rho, c0, PowerLawParams(1.0, 2.0), dt=1e-3, t_end=0.2, scheme="imex"
    )
    rep = energy_report(traj)
    assert rep.max_step_increase <= 1e-9 * rep.energy[0]
    assert not rep.flagged
    # mass of rho conserved by transport
    mass = traj.diag["mass"]
    assert np.max(np.abs(mass - mass[0])) / mass[0] < 1e-6


def test_semi_galerkin_energy_identity_accuracy():
    rho = ScalarField.from_function(GRID, lambda x, y: 1.0 + 0.5 * np.sin(x))
    c0 = np.zeros(BASIS.m)
    c0[0] = 0.5
    traj = run_semi_galerkin(
        BASIS, rho, c0, PowerLawParams(1.0, 2.5), dt=1e-3, t_end=0.2
    )
    defect = traj.diag["energy_defect"]
    assert np.max(np.abs(defect)) < 0.02 * traj.diag["energy"][0]


def test_energy_defect_shrinks_linearly_with_dt():
    rho = ScalarField.from_function(GRID, lambda x, y: 1.0 + 0.4 * np.sin(y))
    f = VectorField(GRID, 0.5 * BASIS.fields[1])
    c0 = np.zeros(BASIS.m)
    c0[0] = 0.3

    def final_defect(dt):
        traj = run_semi_galerkin(
            BASIS, rho, c0, PowerLawParams(1.0, 2.0), dt=dt, t_end=0.1, f=f
        )
        return abs(traj.diag["energy_defect"][-1])

    d1, d2 = final_defect(2e-3), final_defect(1e-3)
    assert d1 / d2 >= 1.8


def test_blowup_guard_trips():
    rho = ScalarField.full(GRID, 1.0)
    f = VectorField(GRID, 50.0 * BASIS.fields[0])
    with pytest.raises(BlowupError):
        run_semi_galerkin(
            BASIS, rho, np.zeros(BASIS.m), PowerLawParams(1.0, 2.0),
            dt=1e-3, t_end=0.05, f=f, blowup_limit=1e-2,
        )


def test_strang_splitting_runs():
    rho = ScalarField.from_function(GRID, lambda x, y: 1.0 + 0.3 * np.sin(x))
    c0 = np.zeros(BASIS.m)
    c0[0] = 0.4
    traj = run_semi_galerkin(
        BASIS, rho, c0, PowerLawParams(1.0, 2.0), dt=2e-3, t_end=0.02, splitting="strang"
    )
    assert traj.diag["energy"][-1] < traj.diag["energy"][0]


def test_energy_report_zero_solution():
    rho = ScalarField.full(GRID, 1.0)
    traj = run_semi_galerkin(
        BASIS, rho, np.zeros(BASIS.m), PowerLawParams(1.0, 2.0), dt=1e-3, t_end=0.01
    )
    rep = energy_report(traj)
    assert rep.energy[0] == 0.0
    assert rep.max_step_increase < 1e-15
    assert abs(rep.final_defect) < 1e-15


def test_three_dimensional_semi_galerkin_smoke():
    g3 = Grid(dim=3, n_points=16)
    basis3 = build_basis(g3, m=8)
    rho0 = ScalarField(g3, 1.0 + 0.2 * np.sin(g3.mesh[0]))
    c0 = np.zeros(basis3.m)
    c0[0] = 0.3
    traj = run_semi_galerkin(basis3, rho0, c0, PowerLawParams(1.0, 2.5), dt=2e-3, t_end=0.02)
    assert traj.diag["energy"][-1] < traj.diag["energy"][0]
    assert np.max(np.abs(traj.diag["mass"] - traj.diag["mass"][0])) < 1e-8
