"""Acceptance criteria and module invariant suites, runnable via the CLI
(`rheoflow check`) or from the test suite.

Every check returns one or more CheckResult rows (id, measured, tolerance,
pass).  Measured values are the quantity the criterion bounds; a check passes
iff measured <= tolerance (or, for strictly-positive criteria, measured > 0
with tolerance 0 meaning "must exceed").
"""

from __future__ import annotations

import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..constraints import L2Ball, penalty_convergence_study
from ..fields import (
    Grid,
    ScalarField,
    VectorField,
    lp_norm,
    random_scalar_field,
    random_vector_field,
)
from ..fixedpoint import (
    PeriodicProblem,
    PicardConfig,
    _traj_distance,
    periodic_solve,
    picard_G,
    powerlaw_frozen_solver,
    replay_periodic,
)
from ..galerkin import build_basis, gram_matrix, run_semi_galerkin
from ..gks import (
    GksMode,
    MixtureParams,
    concentration_maps,
    full_momentum_step,
    graffi_momentum_step,
    korteweg_force,
    korteweg_force_expanded,
    mass_to_volume_velocity,
    run_gks,
    theta,
)
from ..newtonian import reference_newtonian_step
from ..rheology import (
    PowerLawParams,
    check_structure_conditions,
    stress_divergence_coeff,
    stress_divergence_direct,
)
from ..transport import (
    DiffusionParams,
    SemiLagrangianMap,
    density_invariants,
    diffusion_estimate_ladder,
    kss_diffusion_step,
    regularized_continuity_step,
)
from .scenarios import gaussian_blob, rotating_flow, taylor_green_velocity


@dataclass
class CheckResult:
    id: str
    measured: float
    tolerance: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        note = f"  ({self.note})" if self.note else ""
        return f"{self.id:44s} measured={self.measured:.6e} tol={self.tolerance:.3e} {status}{note}"


DESK = Grid(dim=2, n_points=64)


def _bound(id_, measured, tol, note=""):
    return CheckResult(id_, float(measured), float(tol), bool(measured <= tol), note)


def _positive(id_, measured, note=""):
    return CheckResult(id_, float(measured), 0.0, bool(measured > 0.0), note)


# ---------------------------------------------------------------------------
# Acceptance criteria
# ---------------------------------------------------------------------------


def check_structure(stress_fn=None):
    """A01: monotonicity, coercivity, growth over 1000 random pairs per index."""
    worst_gap = np.inf
    worst_coer = np.inf
    worst_growth = np.inf
    for p in (1.2, 1.5, 2.0, 2.5, 4.0):
        rep = check_structure_conditions(
            PowerLawParams(mu0=1.0, p=p), dim=3, n_samples=1000,
            seed=int(100 * p), stress_fn=stress_fn,
        )
        worst_gap = min(worst_gap, rep["min_monotonicity_gap"])
        worst_coer = min(worst_coer, rep["min_coercivity_ratio"] - 1.0)
        worst_growth = min(worst_growth, rep["min_growth_margin"])
    return [
        _positive("A01.rheology.monotonicity_gap", worst_gap, note="min over 5000 pairs"),
        CheckResult(
            "A01.rheology.coercivity", worst_coer, 0.0, worst_coer >= -1e-12,
            note="min(T:A / bound) - 1",
        ),
        CheckResult(
            "A01.rheology.growth", worst_growth, 0.0, worst_growth >= -1e-12,
            note="min(bound - |T|), explicit constants",
        ),
    ]


def check_cross_form():
    """A02: direct vs coefficient-form stress divergence, 1e-8 relative."""
    worst = 0.0
    for trial in range(20):
        p = 1.5 if trial % 2 == 0 else 3.0
        params = PowerLawParams(1.0, p)
        u = random_vector_field(DESK, seed=300 + trial, kmax=3, amplitude=0.15, solenoidal=True)
        d = stress_divergence_direct(u, params).components
        c = stress_divergence_coeff(u, params).components
        worst = max(worst, float(np.max(np.abs(d - c)) / np.max(np.abs(d))))
    return [_bound("A02.rheology.cross_form_identity", worst, 1e-8, "20 band-limited fields")]


def check_energy_inequality():
    """A03: semi-Galerkin energy nonincreasing (f = 0); defect halves with dt."""
    basis = build_basis(DESK, m=8)
    rho0 = ScalarField(DESK, 1.0 + 0.5 * np.sin(DESK.mesh[0]))
    params = PowerLawParams(1.0, 2.0)
    c0 = np.zeros(basis.m)
    c0[0] = 0.5
    traj = run_semi_galerkin(basis, rho0, c0, params, dt=1e-3, t_end=1.0, scheme="imex")
    E = traj.diag["energy"]
    max_inc = float(np.max(np.diff(E), initial=0.0))
    results = [
        _bound("A03.galerkin.energy_monotone", max_inc, 1e-9 * E[0], "max per-step increase")
    ]

    f = VectorField(DESK, 0.5 * basis.fields[1])

    def defect(dt):
        t = run_semi_galerkin(basis, rho0, c0, params, dt=dt, t_end=0.25, f=f)
        return abs(t.diag["energy_defect"][-1])

    ratio = defect(2e-3) / defect(1e-3)
    results.append(
        CheckResult(
            "A03.galerkin.energy_defect_refinement", ratio, 1.8, ratio >= 1.8,
            note="defect(2dt)/defect(dt), must be >= 1.8",
        )
    )
    return results


def check_density_invariants():
    """A04: mass / L2 / bounds preservation over one rotation period at 128^2."""
    grid = Grid(dim=2, n_points=128)
    omega = 2.0 * np.pi  # period 1.0; dt = 1e-3 -> 1000 steps
    u = rotating_flow(grid, omega=omega, r_rigid=2.45, r_zero=3.05)
    center = (grid.length / 2.0 + 0.45, grid.length / 2.0)
    rho0 = gaussian_blob(grid, center, sigma=0.42, base=0.5, height=1.0)
    step = SemiLagrangianMap(u, dt=1e-3, order=6)
    traj = [rho0]
    cur = rho0
    for _ in range(1000):
        cur = step.apply(cur)
        traj.append(cur)
    rep = density_invariants(traj)
    return [
        _bound("A04.transport.mass_drift", rep.mass_drift(), 1e-6),
        _bound("A04.transport.l2_drift", rep.lp_drift(2), 1e-5),
        _bound("A04.transport.bound_violation", rep.bound_violation(), 1e-6),
    ]


def check_gram():
    """A05: Gram matrix SPD with eigmin >= min(rho); entries match a 4x oracle."""
    basis = build_basis(DESK, m=8)
    fine = Grid(dim=2, n_points=256)
    fine_basis = build_basis(fine, m=8)
    Wf = fine_basis.fields.reshape(8, -1)
    worst_eig = np.inf
    worst_entry = 0.0
    for trial in range(50):
        raw = random_scalar_field(DESK, seed=900 + trial, kmax=4, amplitude=1.0)
        rho_vals = raw.values - raw.values.min() + 0.3
        rho = ScalarField(DESK, rho_vals)
        A = gram_matrix(rho, basis)
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(A).min()))
        ratio = fine.n_points // DESK.n_points
        hat = np.fft.fftn(rho_vals)
        pad = np.zeros(fine.shape, dtype=complex)
        half = DESK.n_points // 2
        ix = np.r_[0:half, fine.n_points - half : fine.n_points]
        pad[np.ix_(ix, ix)] = hat
        rho_fine = np.fft.ifftn(pad).real * ratio**2
        rho_rep = np.concatenate([rho_fine.ravel()] * 2)
        A_fine = (Wf * rho_rep) @ Wf.T * fine.cell_volume
        worst_entry = max(worst_entry, float(np.max(np.abs(A - A_fine))))
    return [
        CheckResult(
            "A05.galerkin.gram_min_eigenvalue", worst_eig, 0.3 - 1e-10,
            worst_eig >= 0.3 - 1e-10, note="must be >= min(rho) - 1e-10",
        ),
        _bound("A05.galerkin.gram_quadrature_oracle", worst_entry, 1e-10),
    ]


def check_taylor_green():
    """A06: p = 2, rho = 1 Taylor-Green coefficients decay as exp(-2 mu0 t)."""
    basis = build_basis(DESK, m=12)
    params = PowerLawParams(mu0=1.0, p=2.0)
    rho0 = ScalarField.full(DESK, 1.0)
    c0 = basis.project(taylor_green_velocity(DESK))
    traj = run_semi_galerkin(basis, rho0, c0, params, dt=1e-3, t_end=0.1)
    expect = c0[None, :] * np.exp(-2.0 * params.mu0 * traj.times)[:, None]
    worst = float(np.max(np.abs(traj.coeffs - expect)))
    return [_bound("A06.galerkin.taylor_green_decay", worst, 1e-6, "all coefficients, t <= 0.1")]


def _vi_ball_run(kappa, dt=2e-3, t_end=1.0):
    basis = build_basis(DESK, m=8)
    params = PowerLawParams(1.0, 2.0)
    K = L2Ball(0.5)
    rho = ScalarField.full(DESK, 1.0)
    f = VectorField(DESK, 2.0 * basis.fields[0])
    traj = run_semi_galerkin(
        basis, rho, np.zeros(basis.m), params, dt=dt, t_end=t_end,
        f=f, constraint=K, kappa=kappa, stride=5,
    )
    return traj, K


def check_penalty():
    """A07: kappa sweep: |beta| strictly decreasing; 1/kappa violation floor;
    penalized energy defect refines with dt."""
    kappas = [10.0, 100.0, 1000.0, 10000.0]
    report = penalty_convergence_study(_vi_ball_run, kappas)
    norms = np.array([r.beta_l2qt_norm for r in report.rows])
    mono_margin = float(np.max(np.diff(norms)))
    results = [
        CheckResult(
            "A07.constraints.beta_norm_decreasing", mono_margin, 0.0, mono_margin < 0.0,
            note="max successive difference of |beta|_{L2(Q_T)}",
        )
    ]
    # 1/kappa scaling: final violation at kappa = 1e4 within 10x of the floor
    # extrapolated from the kappa = 1e3 run
    floor = report.rows[2].violation_final * (kappas[2] / kappas[3])
    final = report.rows[3].violation_final
    results.append(
        _bound(
            "A07.constraints.violation_floor", final, 10.0 * floor,
            note="final violation at kappa=1e4 vs 10x extrapolated floor",
        )
    )

    def defect(dt):
        traj, _ = _vi_ball_run(100.0, dt=dt, t_end=0.5)
        return abs(traj.diag["energy_defect"][-1])

    ratio = defect(4e-3) / defect(2e-3)
    results.append(
        CheckResult(
            "A07.constraints.penalized_defect_refinement", ratio, 1.5, ratio >= 1.5,
            note="defect(2dt)/defect(dt)",
        )
    )
    return results


def check_periodic():
    """A08: measured contraction < 1 each pass; T-periodic replay; trivial case."""
    basis = build_basis(DESK, m=8)
    params = PowerLawParams(1.0, 2.5)
    period = 0.4
    mode = basis.fields[0]

    def forcing(t):
        return VectorField(DESK, 0.05 * np.sin(2.0 * np.pi * t / period) * mode)

    problem = PeriodicProblem(period=period, forcing=forcing, alpha=0.8, beta=1.2, reg_eps=0.05)
    rho_init = ScalarField(DESK, 1.0 + 0.1 * np.sin(DESK.mesh[0]))
    result = periodic_solve(
        problem, basis, params, dt=2e-3, rho_init=rho_init, tol=5e-7, max_iters=60
    )
    ratios = [r["contraction_ratio"] for r in result.log if np.isfinite(r["contraction_ratio"])]
    worst_ratio = max(ratios) if ratios else float("inf")
    mismatch = replay_periodic(result, problem, basis, params, dt=2e-3)

    trivial = PeriodicProblem(period=0.2, forcing=None, alpha=0.8, beta=1.2, reg_eps=0.05)
    triv = periodic_solve(trivial, basis, params, dt=2e-3, tol=1e-10)
    return [
        CheckResult(
            "A08.fixedpoint.contraction_ratio", worst_ratio, 1.0,
            result.converged and worst_ratio < 1.0, note="max ratio over passes",
        ),
        _bound("A08.fixedpoint.replay_mismatch", mismatch, 1e-6),
        CheckResult(
            "A08.fixedpoint.trivial_one_iteration", float(len(triv.log)), 1.0,
            triv.converged and len(triv.log) == 1, note="f = 0 converges in one pass",
        ),
    ]


def check_picard():
    """A09: geometric decay of iterate distances; two starts, one limit."""
    basis = build_basis(DESK, m=8)
    params = PowerLawParams(1.0, 2.5)
    rho0 = ScalarField(DESK, 0.9 + 0.08 * np.sin(DESK.mesh[0]))
    f = VectorField(DESK, 0.05 * basis.fields[0])
    solver = powerlaw_frozen_solver(rho0, f, params)
    config = PicardConfig(ball_radius=50.0, horizon=0.15, max_iters=25, tol=1e-8)
    res_a = picard_G(config, solver, dt=1e-3, grid=DESK)
    ratios = [
        r["contraction_ratio"]
        for r in res_a.log
        if np.isfinite(r["contraction_ratio"]) and r["iter"] >= 2
    ]
    worst_ratio = max(ratios) if ratios else float("inf")

    n = len(res_a.u_traj)
    bump = [
        VectorField(DESK, 0.02 * np.sin(np.pi * i / (n - 1)) * basis.fields[1])
        for i in range(n)
    ]
    res_b = picard_G(config, solver, dt=1e-3, grid=DESK, v0_traj=bump)
    gap = _traj_distance(res_a.u_traj, res_b.u_traj, 1e-3)
    return [
        CheckResult(
            "A09.fixedpoint.picard_geometric_decay", worst_ratio, 0.8,
            res_a.converged and worst_ratio <= 0.8, note="ratios from iteration 2 on",
        ),
        _bound("A09.fixedpoint.picard_unique_limit", gap, 2.0 * config.tol),
    ]


def check_kss():
    """A10: exact single-mode decay, exact mean conservation, clean ladder."""
    params = DiffusionParams(lam=0.8, mobility=0.3)
    k = 3
    rho = ScalarField.from_function(DESK, lambda x, y: np.cos(k * x))
    cur = rho
    for _ in range(200):
        cur = kss_diffusion_step(cur, VectorField.zero(DESK), params, 1e-3)
    sigma = params.lam * (k**2 + params.mobility * k**4)
    decay_err = float(np.max(np.abs(cur.values - np.exp(-sigma * 0.2) * rho.values)))

    mean_err = 0.0
    psi = random_vector_field(DESK, seed=41, kmax=4, amplitude=1.0, solenoidal=True)
    rho2 = random_scalar_field(DESK, seed=42, kmax=4, mean=0.9, amplitude=0.5)
    cur = rho2
    for _ in range(100):
        cur = kss_diffusion_step(cur, psi, params, 1e-3)
    mean_err = abs(cur.mean() - rho2.mean())

    flagged = 0
    gentle = DiffusionParams(lam=0.3, mobility=0.05)
    for trial in range(10):
        rho0 = random_scalar_field(DESK, seed=700 + trial, kmax=3, amplitude=0.4, mean=1.0)
        psi_t = (
            random_vector_field(DESK, seed=800 + trial, kmax=3, amplitude=0.5, solenoidal=True)
            if trial % 2
            else VectorField.zero(DESK)
        )
        traj = [rho0]
        cur = rho0
        for _ in range(120):
            cur = kss_diffusion_step(cur, psi_t, gentle, 1e-3)
            traj.append(cur)
        report = diffusion_estimate_ladder(traj, [psi_t] * 121, gentle, 1e-3)
        flagged += 0 if report.ok else 1
    return [
        _bound("A10.transport.kss_symbol_decay", decay_err, 1e-10),
        _bound("A10.transport.kss_mean_conservation", mean_err, 1e-12),
        _bound("A10.transport.kss_ladder_flags", float(flagged), 0.0, "10 random smooth runs"),
    ]


def check_gks_energy():
    """A11: Graffi energy monotone; lambda -> 0 and rho-const match the reference."""
    params = MixtureParams(rho10=2.0, rho20=1.0, lam=0.05, mobility=0.02, mu=1.0)
    rho0 = ScalarField(DESK, 1.0 + 0.3 * np.sin(DESK.mesh[0]))
    u0 = taylor_green_velocity(DESK, scale=0.4)
    traj = run_gks(rho0, u0, params, dt=1e-3, t_end=0.25, mode=GksMode.GRAFFI)
    E = traj.diag["energy"]
    max_inc = float(np.max(np.diff(E), initial=0.0))

    lam0 = MixtureParams(rho10=2.0, rho20=1.0, lam=0.0, mobility=0.0, mu=0.8, m_shift=0.1)
    nu = lam0.mu / 1.1
    rho_c = ScalarField.full(DESK, 1.0)
    u_g = u_r = taylor_green_velocity(DESK, scale=0.5)
    worst_lam0 = 0.0
    for _ in range(5):
        u_g = graffi_momentum_step(u_g, rho_c, None, lam0, 1e-3)
        u_r = reference_newtonian_step(u_r, nu=nu, dt=1e-3)
        worst_lam0 = max(worst_lam0, float(np.max(np.abs(u_g.components - u_r.components))))

    lam_on = MixtureParams(rho10=2.0, rho20=1.0, lam=0.3, mobility=0.1, mu=1.0)
    u_f = u_r = taylor_green_velocity(DESK, scale=0.5)
    worst_const = 0.0
    for _ in range(5):
        u_f = full_momentum_step(u_f, rho_c, None, lam_on, 1e-3)
        u_r = reference_newtonian_step(u_r, nu=lam_on.mu / 1.1, dt=1e-3)
        worst_const = max(worst_const, float(np.max(np.abs(u_f.components - u_r.components))))
    return [
        _bound("A11.gks.energy_monotone", max_inc, 1e-9 * E[0], "max per-step increase"),
        _bound("A11.gks.reduction_lambda_zero", worst_lam0, 1e-10, "vs reference stepper"),
        _bound("A11.gks.reduction_constant_rho", worst_const, 1e-10, "vs reference stepper"),
    ]


def check_appendix_algebra():
    """A12: Korteweg form identity, dual continuity residuals, concentration maps."""
    params = MixtureParams(rho10=2.0, rho20=1.0, lam=0.4, mobility=0.15)
    rho = random_scalar_field(DESK, seed=50, kmax=3, amplitude=0.2, mean=1.5)
    th = theta(rho, 0.05)
    rb = ScalarField(DESK, rho.values + 0.1)
    a = korteweg_force(th, rb, lam=0.4).components
    b = korteweg_force_expanded(th, rb, lam=0.4).components
    kort_err = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))

    from ..fields import _div_arr, _lap_arr

    drho_dt = random_scalar_field(DESK, seed=51, kmax=3, amplitude=0.3)
    v = taylor_green_velocity(DESK, scale=0.5)
    w = mass_to_volume_velocity(v, rho, params)
    res_w = drho_dt.values + _div_arr(rho.values[None] * w.components, DESK)
    lap_th = _lap_arr(rho.values - params.mobility * _lap_arr(rho.values, DESK), DESK)
    res_v = (
        drho_dt.values
        + _div_arr(rho.values[None] * v.components, DESK)
        - params.lam * lap_th
    )
    dual_err = float(np.max(np.abs(res_w - res_v)) / max(np.max(np.abs(res_w)), 1.0))

    c, alpha, lhs, rhs = concentration_maps(rho, params)
    fick_err = float(np.max(np.abs(lhs.components - rhs.components)) / np.max(np.abs(rhs.components)))
    rho1 = alpha.values * params.rho10
    rho2 = (1.0 - alpha.values) * params.rho20
    t9_err = float(np.max(np.abs(rho1 * params.rho20 + rho2 * params.rho10 - params.rho10 * params.rho20)))
    return [
        _bound("A12.gks.korteweg_form_identity", kort_err, 1e-8),
        _bound("A12.gks.dual_continuity_residual", dual_err, 1e-8),
        _bound("A12.gks.fick_identity", fick_err, 1e-8),
        _bound("A12.gks.volume_additivity_identity", t9_err, 1e-10),
    ]


def check_determinism():
    """A13: identical config + seed reproduce diagnostics.csv bit for bit."""
    from .config import parse_config
    from .runner import run

    cfg_text = (
        "[model]\ntype = newtonian\n"
        "[grid]\nn_points = 32\n"
        "[driver]\ndt = 1e-3\nt_end = 0.02\n"
        "[galerkin]\nmodes = 8\n"
        "[scenario]\npreset = taylor-green\nseed = 7\n"
    )
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        (tmp / "run.ini").write_text(cfg_text)
        blobs = []
        for sub in ("a", "b"):
            config = parse_config(tmp / "run.ini")
            code = run(config, out_dir=tmp / sub, seed=7)
            if code != 0:
                return [CheckResult("A13.harness.determinism", 1.0, 0.0, False, "run failed")]
            blobs.append((tmp / sub / "diagnostics.csv").read_bytes())
    identical = blobs[0] == blobs[1]
    return [
        CheckResult(
            "A13.harness.determinism", 0.0 if identical else 1.0, 0.0, identical,
            note="byte-identical diagnostics.csv",
        )
    ]


# ---------------------------------------------------------------------------
# Module invariant spot checks (fast companions to the pytest suite)
# ---------------------------------------------------------------------------


def check_fields_suite():
    f = random_scalar_field(DESK, seed=60, kmax=8, amplitude=1.0)
    hat = np.fft.fftn(f.values)
    round_err = float(np.max(np.abs(np.fft.ifftn(hat).real - f.values)))
    from ..fields import divergence, gradient, leray_project, pressure_recover, sup_norm

    v = random_vector_field(DESK, seed=61, kmax=5)
    p = leray_project(v)
    div_err = sup_norm(divergence(p))
    comps = v.components - v.components.mean(axis=(1, 2), keepdims=True)
    v0 = VectorField(DESK, comps)
    recon = leray_project(v0).components + gradient(pressure_recover(v0)).components
    helm_err = float(np.max(np.abs(recon - v0.components)))
    return [
        _bound("fields.roundtrip", round_err, 1e-12),
        _bound("fields.leray_divergence", div_err, 1e-12),
        _bound("fields.helmholtz_decomposition", helm_err, 1e-10),
    ]


def check_rheology_suite():
    from ..fields import laplacian

    params = PowerLawParams(mu0=0.7, p=2.0)
    u = random_vector_field(DESK, seed=62, kmax=4, solenoidal=True)
    force = stress_divergence_direct(u, params)
    lap = laplacian(u)
    newt_err = float(np.max(np.abs(force.components - 0.7 * lap.components)))
    return [_bound("rheology.newtonian_reduction", newt_err, 1e-10)]


def check_transport_suite():
    alpha, beta = 0.4, 1.6
    worst = 0.0
    for trial in range(10):
        raw = random_scalar_field(DESK, seed=63 + trial, kmax=4, amplitude=1.0)
        span = raw.values.max() - raw.values.min()
        rho = ScalarField(DESK, alpha + (raw.values - raw.values.min()) * (beta - alpha) / span)
        out = regularized_continuity_step(rho, rho, VectorField.zero(DESK), 0.05, 1e-3)
        worst = max(worst, alpha - out.values.min(), out.values.max() - beta)
    return [_bound("transport.maximum_principle", worst, 1e-8)]


def check_constraints_suite():
    K = L2Ball(0.5)
    worst = 0.0
    for seed in range(20):
        a = random_vector_field(DESK, seed=500 + seed, kmax=3, amplitude=1.0)
        b = random_vector_field(DESK, seed=600 + seed, kmax=3, amplitude=1.0)
        pa, pb = K.project(a), K.project(b)
        d_out = lp_norm(VectorField(DESK, pa.components - pb.components), 2)
        d_in = lp_norm(VectorField(DESK, a.components - b.components), 2)
        worst = max(worst, d_out - d_in)
    return [_bound("constraints.projection_nonexpansive", worst, 1e-12)]


REGISTRY = [
    ("A01.rheology", check_structure),
    ("A02.rheology", check_cross_form),
    ("A03.galerkin", check_energy_inequality),
    ("A04.transport", check_density_invariants),
    ("A05.galerkin", check_gram),
    ("A06.galerkin", check_taylor_green),
    ("A07.constraints", check_penalty),
    ("A08.fixedpoint", check_periodic),
    ("A09.fixedpoint", check_picard),
    ("A10.transport", check_kss),
    ("A11.gks", check_gks_energy),
    ("A12.gks", check_appendix_algebra),
    ("A13.harness", check_determinism),
    ("fields", check_fields_suite),
    ("rheology", check_rheology_suite),
    ("transport", check_transport_suite),
    ("constraints", check_constraints_suite),
]


def run_checks(filter_substr: str | None = None) -> list[CheckResult]:
    """Run every registered suite (optionally filtered by id substring).

    RHEOFLOW_THREADS > 1 runs independent suites concurrently.
    """
    selected = [
        fn for prefix, fn in REGISTRY
        if filter_substr is None or filter_substr in prefix
    ]
    threads = int(os.environ.get("RHEOFLOW_THREADS", "1") or "1")
    results: list[CheckResult] = []
    if threads > 1 and len(selected) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for chunk in pool.map(lambda f: f(), selected):
                results.extend(chunk)
    else:
        for fn in selected:
            results.extend(fn())
    if filter_substr is not None:
        results = [r for r in results if filter_substr in r.id]
    return results
