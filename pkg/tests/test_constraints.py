"""Convex sets, penalty operator, penalized stepping and the study reports."""

import numpy as np
import pytest

from rheoflow.constraints import (
    L2Ball,
    PointwiseBall,
    penalized_momentum_step,
    penalty,
    penalty_convergence_study,
    project,
    time_translation_diagnostic,
)
from rheoflow.fields import (
    Grid,
    ScalarField,
    VectorField,
    l2_inner,
    lp_norm,
    random_vector_field,
)
from rheoflow.galerkin import GalerkinState, build_basis, momentum_step, run_semi_galerkin
from rheoflow.rheology import PowerLawParams

GRID = Grid(dim=2, n_points=64)
BASIS = build_basis(GRID, m=8)


def test_set_validation():
    with pytest.raises(ValueError):
        L2Ball(radius=0.0)
    with pytest.raises(ValueError):
        PointwiseBall(bound=-1.0)
    # 0 is in every set
    zero = VectorField.zero(GRID)
    assert L2Ball(1.0).contains(zero)
    assert PointwiseBall(1.0).contains(zero)


def test_l2ball_projection_radial():
    K = L2Ball(radius=1.0)
    v = random_vector_field(GRID, seed=1, kmax=4)
    v = VectorField(GRID, v.components * (2.0 / lp_norm(v, 2)))  # |v|_2 = 2
    p = project(v, K)
    assert np.max(np.abs(p.components - 0.5 * v.components)) < 1e-12
    inside = VectorField(GRID, 0.3 * v.components)
    assert np.array_equal(project(inside, K).components, inside.components)


def test_pointwise_ball_projection_oracle():
    K = PointwiseBall(bound=0.8)
    v = random_vector_field(GRID, seed=2, kmax=4, amplitude=1.5)
    p = project(v, K)
    # per-point closed form: clip magnitude, keep direction
    mag = v.magnitude()
    for idx in [(0, 0), (10, 20), (33, 47), (63, 1)]:
        expect = v.components[(slice(None),) + idx]
        m = mag[idx]
        if m > 0.8:
            expect = expect * (0.8 / m)
        got = p.components[(slice(None),) + idx]
        assert np.max(np.abs(got - expect)) < 1e-13
    assert float(np.max(p.magnitude())) <= 0.8 + 1e-12


def test_projection_idempotent_and_nonexpansive():
    for K in (L2Ball(0.7), PointwiseBall(0.5)):
        for seed in range(10):
            a = random_vector_field(GRID, seed=100 + seed, kmax=4, amplitude=1.2)
            b = random_vector_field(GRID, seed=200 + seed, kmax=4, amplitude=1.2)
            pa, pb = project(a, K), project(b, K)
            ppa = project(pa, K)
            assert np.max(np.abs(ppa.components - pa.components)) < 1e-12
            da = VectorField(GRID, pa.components - pb.components)
            dab = VectorField(GRID, a.components - b.components)
            assert lp_norm(da, 2) <= lp_norm(dab, 2) + 1e-12


def test_projection_variational_characterization():
    for K in (L2Ball(0.6), PointwiseBall(0.6)):
        v = random_vector_field(GRID, seed=3, kmax=4, amplitude=1.5)
        pv = project(v, K)
        resid = VectorField(GRID, v.components - pv.components)
        for seed in range(8):
            z = project(random_vector_field(GRID, seed=300 + seed, kmax=4, amplitude=1.5), K)
            gap = l2_inner(resid, VectorField(GRID, z.components - pv.components))
            assert gap <= 1e-10


def test_penalty_zero_iff_member():
    K = L2Ball(1.0)
    inside = random_vector_field(GRID, seed=4, kmax=3, amplitude=0.4)
    assert lp_norm(inside, 2) < 1.0
    assert np.max(np.abs(penalty(inside, K).components)) == 0.0
    v = random_vector_field(GRID, seed=5, kmax=3)
    v = VectorField(GRID, v.components * (2.0 / lp_norm(v, 2)))
    beta = penalty(v, K)
    assert np.max(np.abs(beta.components - 0.5 * v.components)) < 1e-12


def test_penalty_displayed_inequalities():
    for K in (L2Ball(0.5), PointwiseBall(0.4)):
        v = random_vector_field(GRID, seed=6, kmax=4, amplitude=1.0)
        beta = penalty(v, K)
        pv = project(v, K)
        assert l2_inner(beta, pv) >= -1e-12
        for seed in range(6):
            z = project(random_vector_field(GRID, seed=400 + seed, kmax=4), K)
            assert l2_inner(beta, VectorField(GRID, pv.components - z.components)) >= -1e-10


def test_penalty_monotone():
    K = L2Ball(0.5)
    for seed in range(1000):
        a = random_vector_field(GRID, seed=1000 + seed, kmax=2, amplitude=1.0)
        b = random_vector_field(GRID, seed=5000 + seed, kmax=2, amplitude=1.0)
        d_beta = VectorField(GRID, penalty(a, K).components - penalty(b, K).components)
        d = VectorField(GRID, a.components - b.components)
        assert l2_inner(d_beta, d) >= -1e-11


def test_penalized_step_reduces_to_plain_inside_K():
    params = PowerLawParams(1.0, 2.0)
    one = ScalarField.full(GRID, 1.0)
    c0 = np.zeros(BASIS.m)
    c0[0] = 0.1  # |u|_2 = 0.1, well inside the unit ball
    K = L2Ball(1.0)
    state = GalerkinState(c0, BASIS)
    plain = momentum_step(state, one, None, params, 1e-3)
    pen = penalized_momentum_step(state, one, None, params, K, kappa=1e3, dt=1e-3)
    assert np.max(np.abs(plain.coeffs - pen.coeffs)) < 1e-13


def vi_ball_run(kappa, t_end=1.0, dt=2e-3):
    """Outward-forced L2 ball: unconstrained |u|_2 tends to 2, radius is 0.5.

    On the lowest mode the dynamics reduce to dc/dt = -c + 2 - kappa max(0, 1 - r/c) c,
    so the steady violation is (2 - r)/(1 + kappa): a clean 1/kappa sweep.
    """
    params = PowerLawParams(1.0, 2.0)
    K = L2Ball(0.5)
    rho = ScalarField.full(GRID, 1.0)
    f = VectorField(GRID, 2.0 * BASIS.fields[0])
    traj = run_semi_galerkin(
        BASIS, rho, np.zeros(BASIS.m), params, dt=dt, t_end=t_end,
        f=f, constraint=K, kappa=kappa, stride=5,
    )
    return traj, K


def test_penalty_work_nonnegative_and_norm_bounded():
    traj, K = vi_ball_run(kappa=1e3, t_end=0.8)
    for i in range(len(traj.snap_times)):
        u = traj.velocity_at_snap(i)
        beta = penalty(u, K)
        assert l2_inner(beta, u) >= -1e-12
        assert lp_norm(u, 2) <= K.radius + 1.5 / 1e3 + 1e-6


def test_penalty_convergence_study_monotone():
    report = penalty_convergence_study(vi_ball_run, [10.0, 100.0, 1000.0])
    assert report.monotone
    norms = [r.beta_l2qt_norm for r in report.rows]
    assert norms[0] > norms[1] > norms[2] > 0
    assert report.decay_slope < -0.5  # roughly 1/kappa here


def test_penalty_study_trivial_when_inside():
    def quiet_run(kappa):
        params = PowerLawParams(1.0, 2.0)
        rho = ScalarField.full(GRID, 1.0)
        K = L2Ball(5.0)
        c0 = np.zeros(BASIS.m)
        c0[0] = 0.1
        traj = run_semi_galerkin(
            BASIS, rho, c0, params, dt=2e-3, t_end=0.05,
            constraint=K, kappa=kappa, stride=2,
        )
        return traj, K

    report = penalty_convergence_study(quiet_run, [10.0, 100.0, 1000.0])
    for row in report.rows:
        assert row.beta_l2qt_norm <= 1e-10
        assert row.constraint_violation_max <= 1e-10


def test_penalized_energy_defect_refines_with_dt():
    def defect(dt):
        traj, _ = vi_ball_run(kappa=100.0, t_end=0.5, dt=dt)
        return abs(traj.diag["energy_defect"][-1])

    assert defect(4e-3) / defect(2e-3) >= 1.7


def test_time_translation_steady_state_zero():
    params = PowerLawParams(1.0, 2.0)
    rho = ScalarField.full(GRID, 1.0)
    traj = run_semi_galerkin(
        BASIS, rho, np.zeros(BASIS.m), params, dt=2e-3, t_end=0.1, stride=5
    )
    rep = time_translation_diagnostic(traj, [1, 2, 4])
    assert np.max(rep.integrals) < 1e-25


def test_time_translation_smooth_decay_alpha_two():
    params = PowerLawParams(1.0, 2.0)
    rho = ScalarField.full(GRID, 1.0)
    c0 = np.zeros(BASIS.m)
    c0[0] = 1.0
    traj = run_semi_galerkin(BASIS, rho, c0, params, dt=1e-3, t_end=0.4, stride=10)
    rep = time_translation_diagnostic(traj, [1, 2, 4, 8])
    assert rep.alpha > 0
    assert 1.7 < rep.alpha < 2.2
    assert np.all(np.diff(rep.integrals) > 0)  # integral grows with h, i.e. -> 0 as h -> 0


def test_monotone_growing_ball_average_membership():
    # K(t) = L2Ball(r(t)) with growing r: averaged projections stay in K(t_end)
    radii = np.linspace(0.3, 0.8, 6)
    projections = []
    for i, r in enumerate(radii):
        v = random_vector_field(GRID, seed=700 + i, kmax=3, amplitude=2.0)
        projections.append(project(v, L2Ball(float(r))).components)
    avg = VectorField(GRID, np.mean(projections, axis=0))
    assert lp_norm(avg, 2) <= radii[-1] + 1e-12
