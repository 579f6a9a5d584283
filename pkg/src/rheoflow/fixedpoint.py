"""Fixed-point drivers: the periodic-solution iteration (map S on the density,
map Z on the weighted momentum, phased per level against assigned
trajectories) and the local well-posedness Picard iteration over
frozen-coefficient linear solves.

Contraction constants are always measured from iterate distances, never taken
from theory, and a run aborts when contraction is lost for several consecutive
passes.  The Picard driver is generic over the frozen solver, so the same loop
serves the power-law system and the mixture system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Grid, ScalarField, VectorField, _grad_arr, _leray_arr
from .galerkin import BasisSet, GalerkinState, gram_matrix
from .gks import MixtureParams, korteweg_force, theta
from .rheology import PowerLawParams, stress_coefficient_apply, stress_divergence_direct
from .transport import advect_step, kss_diffusion_step, regularized_continuity_step

ITER_LOG_COLUMNS = ("iter", "residual", "contraction_ratio", "horizon")


@dataclass(frozen=True)
class PeriodicProblem:
    """Time-periodic forcing problem with density bounds and regularization."""

    period: float
    forcing: object  # callable t -> VectorField | None
    alpha: float
    beta: float
    reg_eps: float

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if not (0 < self.alpha <= self.beta):
            raise ValueError("need 0 < alpha <= beta")
        if self.reg_eps <= 0:
            raise ValueError("reg_eps must be positive")


class ContractionLost(RuntimeError):
    """Raised when the measured contraction ratio stays >= 1 for 5 passes."""


def map_S(
    rho0: ScalarField,
    problem: PeriodicProblem,
    u_provider,
    rho_prev_provider,
    dt: float,
    order: int = 4,
    bound_tol: float = 1e-8,
) -> ScalarField:
    """Integrate the regularized continuity equation over one period.

    u_provider(i) and rho_prev_provider(i) supply the advecting velocity and
    the relaxation target at step i.  The maximum principle is enforced:
    leaving [alpha, beta] by more than bound_tol aborts.
    """
    n_steps = int(round(problem.period / dt))
    rho = rho0
    for i in range(n_steps):
        rho = regularized_continuity_step(
            rho, rho_prev_provider(i), u_provider(i), problem.reg_eps, dt, order=order
        )
        lo, hi = float(rho.values.min()), float(rho.values.max())
        if lo < problem.alpha - bound_tol or hi > problem.beta + bound_tol:
            raise RuntimeError(
                f"density bounds violated in map_S: [{lo:.6g}, {hi:.6g}] "
                f"outside [{problem.alpha}, {problem.beta}]"
            )
    return rho


def _linearized_rhs(
    basis: BasisSet,
    coeffs: np.ndarray,
    rho: ScalarField,
    rho_prev: ScalarField,
    u_prev: VectorField,
    f: VectorField | None,
    params: PowerLawParams,
    eps: float,
) -> np.ndarray:
    """RHS of the linearized periodic momentum system: convection travels with
    the previous iterate and the symmetrizing zero-order term
    -(1/2)(eps lap rho - rho + rho_prev) u balances the density relaxation."""
    grid = basis.grid
    u = basis.reconstruct(coeffs)
    ks = grid.wavenumbers
    hats = [np.fft.fftn(c) for c in u.components]
    conv = np.empty_like(u.components)
    for i in range(grid.dim):
        conv[i] = sum(
            u_prev.components[j] * np.fft.ifftn(1j * ks[j] * hats[i]).real
            for j in range(grid.dim)
        )
    lap_rho = np.fft.ifftn(-grid.k_squared * np.fft.fftn(rho.values)).real
    zero_order = 0.5 * (eps * lap_rho - rho.values + rho_prev.values)
    integrand = -rho.values[None] * conv - zero_order[None] * u.components
    integrand += stress_divergence_direct(u, params, apply_dealias=True).components
    if f is not None:
        integrand += rho.values[None] * f.components
    return basis.inner_with_modes(integrand)


@dataclass
class PeriodicResult:
    rho0: ScalarField
    state0: GalerkinState
    rho_traj: list
    coeff_traj: np.ndarray
    rho_assigned: list
    coeff_assigned: np.ndarray
    log: list
    converged: bool
    measured_c: float

    def log_rows(self):
        return [(r["iter"], r["residual"], r["contraction_ratio"], r["horizon"]) for r in self.log]


def _rho_pass(problem, basis, rho_start, rho_asgn, coeff_asgn, dt, n_steps, advect_order):
    """One application of the density map S: integrate the regularized
    continuity equation over a period against assigned trajectories."""
    rho = rho_start
    out = [rho]
    for i in range(n_steps):
        u_prev = basis.reconstruct(coeff_asgn[i])
        rho = regularized_continuity_step(
            rho, rho_asgn[i], u_prev, problem.reg_eps, dt, order=advect_order
        )
        lo, hi = float(rho.values.min()), float(rho.values.max())
        if lo < problem.alpha - 1e-8 or hi > problem.beta + 1e-8:
            raise RuntimeError(
                f"density bounds violated in periodic pass: [{lo:.6g}, {hi:.6g}] "
                f"outside [{problem.alpha}, {problem.beta}]"
            )
        out.append(rho)
    return out


def _momentum_pass(problem, basis, params, coeff_start, rho_traj, rho_asgn, coeff_asgn,
                   dt, n_steps):
    """One application of the weighted-momentum map Z: integrate the linearized
    momentum system over a period against the (periodic) density trajectory."""
    coeffs = coeff_start
    out = np.zeros((n_steps + 1, basis.m))
    out[0] = coeffs
    for i in range(n_steps):
        t = i * dt
        rho = rho_traj[i + 1]
        u_prev = basis.reconstruct(coeff_asgn[i])
        A = gram_matrix(rho, basis)
        ft = problem.forcing(t) if problem.forcing is not None else None

        def H(c):
            return _linearized_rhs(
                basis, c, rho, rho_asgn[i], u_prev, ft, params, problem.reg_eps
            )

        k1 = np.linalg.solve(A, H(coeffs))
        k2 = np.linalg.solve(A, H(coeffs + 0.5 * dt * k1))
        k3 = np.linalg.solve(A, H(coeffs + 0.5 * dt * k2))
        k4 = np.linalg.solve(A, H(coeffs + dt * k3))
        coeffs = coeffs + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        out[i + 1] = coeffs
    return out


def _combined_mismatch(basis, rho_traj, coeff_traj):
    cell = basis.grid.cell_volume
    rho0, rhoT = rho_traj[0], rho_traj[-1]
    u0 = basis.reconstruct(coeff_traj[0])
    uT = basis.reconstruct(coeff_traj[-1])
    drho = float(np.sqrt(np.sum((rhoT.values - rho0.values) ** 2) * cell))
    dmom = float(
        np.sqrt(
            np.sum(
                (
                    np.sqrt(rhoT.values)[None] * uT.components
                    - np.sqrt(rho0.values)[None] * u0.components
                )
                ** 2
            )
            * cell
        )
    )
    return drho, dmom


def periodic_solve(
    problem: PeriodicProblem,
    basis: BasisSet,
    params: PowerLawParams,
    dt: float,
    rho_init: ScalarField | None = None,
    max_iters: int = 60,
    tol: float = 1e-6,
    outer_iters: int = 2,
    advect_order: int = 4,
) -> PeriodicResult:
    """Find a time-periodic (rho, u) pair by iterating the maps S and Z.

    Against assigned trajectories (the previous level's density and velocity,
    held fixed), the density endpoint map S contracts like exp(-cT) thanks to
    the relaxation term, and the weighted momentum map Z contracts through
    dissipation; each is iterated to tolerance and logged.  The assigned
    trajectories are then refreshed from the converged orbits and the phases
    repeat (outer_iters passes), mirroring the level-by-level construction in
    which each stage relaxes toward the previous stage's data.

    The returned state is T-periodic, to tol in the combined metric
    |rho(T) - rho(0)|_2 + |sqrt(rho) u (T) - sqrt(rho) u (0)|_2, for the system
    with the final assigned trajectories; replay_periodic re-integrates it.
    """
    grid = basis.grid
    n_steps = int(round(problem.period / dt))
    if n_steps < 1:
        raise ValueError("period shorter than one step")
    rho_start = rho_init if rho_init is not None else ScalarField.full(
        grid, 0.5 * (problem.alpha + problem.beta)
    )
    coeff_start = np.zeros(basis.m)

    rho_asgn = [rho_start] * (n_steps + 1)
    coeff_asgn = np.zeros((n_steps + 1, basis.m))

    log = []
    it = 0
    bad_streak = 0
    converged = False
    rho_traj = list(rho_asgn)
    coeff_traj = coeff_asgn.copy()
    half_tol = 0.5 * tol

    def record(residual, prev):
        nonlocal it, bad_streak
        it += 1
        ratio = residual / prev if prev not in (None, 0.0) else float("nan")
        log.append(
            {
                "iter": it,
                "residual": residual,
                "contraction_ratio": ratio,
                "horizon": problem.period,
            }
        )
        if np.isfinite(ratio) and ratio >= 1.0:
            bad_streak += 1
            if bad_streak >= 5:
                raise ContractionLost("contraction ratio >= 1 for 5 consecutive passes")
        else:
            bad_streak = 0

    def s_pass():
        nonlocal rho_traj, rho_start
        rho_traj = _rho_pass(
            problem, basis, rho_start, rho_asgn, coeff_asgn, dt, n_steps, advect_order
        )
        rho_start = rho_traj[-1]
        return _combined_mismatch(basis, rho_traj, np.zeros_like(coeff_traj))[0]

    def z_pass():
        nonlocal coeff_traj, coeff_start
        coeff_traj = _momentum_pass(
            problem, basis, params, coeff_start, rho_traj, rho_asgn, coeff_asgn,
            dt, n_steps,
        )
        coeff_start = coeff_traj[-1]
        return _combined_mismatch(basis, rho_traj, coeff_traj)[1]

    for outer in range(outer_iters):
        if outer > 0:
            # next level: relax toward the orbit just computed
            rho_asgn = list(rho_traj)
            coeff_asgn = coeff_traj.copy()

        # joint probe: one pass of each map; if the state is already periodic
        # under the current assigned data, this level (and the solve) is done
        drho = s_pass()
        dmom = z_pass()
        record(drho + dmom, None)
        if drho + dmom <= tol:
            converged = True
            break

        # S refinement to half tolerance
        prev = drho
        for _ in range(max_iters):
            if drho <= half_tol:
                break
            drho = s_pass()
            record(drho, prev)
            prev = drho

        # Z refinement against the converged periodic density
        prev = None
        for _ in range(max_iters):
            dmom = z_pass()
            record(dmom, prev)
            prev = dmom
            if dmom <= half_tol:
                break

        converged = (drho + dmom) <= tol
        if not converged:
            break

    ratios = [r["contraction_ratio"] for r in log if np.isfinite(r["contraction_ratio"])]
    measured_c = (
        float(-np.log(np.median(ratios)) / problem.period) if ratios else float("nan")
    )
    return PeriodicResult(
        rho0=rho_traj[0],
        state0=GalerkinState(coeff_traj[0], basis, 0.0),
        rho_traj=rho_traj,
        coeff_traj=coeff_traj,
        rho_assigned=rho_asgn,
        coeff_assigned=coeff_asgn,
        log=log,
        converged=converged,
        measured_c=measured_c,
    )


def replay_periodic(
    result: PeriodicResult,
    problem: PeriodicProblem,
    basis: BasisSet,
    params: PowerLawParams,
    dt: float,
    advect_order: int = 4,
) -> float:
    """Re-integrate one period from the converged state against the stored
    assigned trajectories; returns the endpoint mismatch in the combined metric."""
    n_steps = int(round(problem.period / dt))
    rho_traj = _rho_pass(
        problem, basis, result.rho0, result.rho_assigned, result.coeff_assigned,
        dt, n_steps, advect_order,
    )
    coeff_traj = _momentum_pass(
        problem, basis, params, result.state0.coeffs, rho_traj,
        result.rho_assigned, result.coeff_assigned, dt, n_steps,
    )
    rho_traj[0] = result.rho0
    drho, dmom = _combined_mismatch(basis, rho_traj, coeff_traj)
    return drho + dmom


# ---------------------------------------------------------------------------
# Picard iteration over frozen-coefficient solves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PicardConfig:
    ball_radius: float
    horizon: float
    max_iters: int = 30
    tol: float = 1e-6

    def __post_init__(self):
        if min(self.ball_radius, self.horizon, self.tol) <= 0 or self.max_iters < 1:
            raise ValueError("PicardConfig fields must be positive")


@dataclass
class PicardResult:
    rho_traj: list
    u_traj: list
    log: list
    converged: bool
    horizon: float
    restarts: int
    ball_norm: float
    smallness: float

    def log_rows(self):
        return [(r["iter"], r["residual"], r["contraction_ratio"], r["horizon"]) for r in self.log]

    @property
    def final_residual(self) -> float:
        return self.log[-1]["residual"] if self.log else float("nan")


def _traj_distance(a, b, dt: float) -> float:
    """L2(Q) distance between two velocity trajectories (trapezoid in time)."""
    sq = np.array(
        [
            np.sum((ua.components - ub.components) ** 2) * ua.grid.cell_volume
            for ua, ub in zip(a, b)
        ]
    )
    w = np.full(len(sq), dt)
    w[0] = w[-1] = 0.5 * dt
    return float(np.sqrt(np.sum(sq * w)))


def _ball_norm(u_traj, dt: float) -> float:
    """Surrogate for the mixed ball norm: max of ||u||_{L2(0,T;H2)} and
    ||d_t u||_{L2(Q)} measured spectrally / by finite differences."""
    grid = u_traj[0].grid
    h2 = []
    for u in u_traj:
        total = 0.0
        for c in u.components:
            hat = np.fft.fftn(c)
            w = (1.0 + grid.k_squared) ** 2
            total += float(np.sum(w * np.abs(hat) ** 2) / c.size**2 * grid.volume)
        h2.append(total)
    h2 = np.array(h2)
    wts = np.full(len(h2), dt)
    wts[0] = wts[-1] = 0.5 * dt
    l2h2 = float(np.sqrt(np.sum(h2 * wts)))
    dtsq = np.array(
        [
            np.sum((u_traj[i + 1].components - u_traj[i].components) ** 2)
            * grid.cell_volume
            / dt**2
            for i in range(len(u_traj) - 1)
        ]
    )
    l2dt = float(np.sqrt(np.sum(dtsq * dt)))
    return max(l2h2, l2dt)


def picard_G(
    config: PicardConfig,
    frozen_solver,
    dt: float,
    grid: Grid,
    v0_traj=None,
) -> PicardResult:
    """Iterate v -> (rho, u) = frozen_solver(v) until u is a fixed point.

    frozen_solver(v_traj, n_steps, dt) must integrate the frozen-coefficient
    system over the current horizon and return (rho_traj, u_traj) sampled at
    every step.  Iterate distances are measured in L2(Q); when an iterate
    leaves the ball B(r) (surrogate norm), the horizon is halved and the
    iteration restarts, up to 5 times.
    """
    horizon = config.horizon
    restarts = 0
    log = []

    while True:
        n_steps = max(2, int(round(horizon / dt)))
        if v0_traj is not None and len(v0_traj) >= n_steps + 1:
            v_traj = list(v0_traj[: n_steps + 1])
        else:
            v_traj = [VectorField.zero(grid) for _ in range(n_steps + 1)]
        prev_dist = None
        left_ball = False
        converged = False
        ball = float("nan")
        smallness = float("nan")

        for it in range(1, config.max_iters + 1):
            rho_traj, u_traj = frozen_solver(v_traj, n_steps, dt)
            ball = _ball_norm(u_traj, dt)
            if it == 1:
                rho0v = rho_traj[0].values
                smallness = 2.0 * (ball / max(config.ball_radius, 1e-30)) * float(
                    np.max(1.0 - rho0v)
                )
            if ball > config.ball_radius:
                left_ball = True
                break
            dist = _traj_distance(u_traj, v_traj, dt)
            ratio = dist / prev_dist if prev_dist not in (None, 0.0) else float("nan")
            log.append(
                {"iter": it, "residual": dist, "contraction_ratio": ratio, "horizon": horizon}
            )
            v_traj = u_traj
            if dist <= config.tol:
                converged = True
                break
            prev_dist = dist

        if left_ball and restarts < 5:
            restarts += 1
            horizon *= 0.5
            log.append(
                {
                    "iter": 0,
                    "residual": float("nan"),
                    "contraction_ratio": float("nan"),
                    "horizon": horizon,
                }
            )
            continue
        return PicardResult(
            rho_traj=rho_traj,
            u_traj=u_traj,
            log=log,
            converged=converged,
            horizon=horizon,
            restarts=restarts,
            ball_norm=ball,
            smallness=smallness,
        )


def powerlaw_frozen_solver(rho0: ScalarField, f, params: PowerLawParams, advect_order: int = 4):
    """Frozen solver for the quasilinear power-law system: transport rho along
    the frozen iterate v, then solve the linear momentum equation
    d_t u + T_p(v) u = (1 - rho) d_t v - rho v.grad v + rho f,  u(0) = 0."""
    if not (0 < rho0.values.min() and rho0.values.max() <= 1.0):
        raise ValueError("Picard smallness setup requires 0 < rho0 <= 1")
    grid = rho0.grid
    forcing = f if callable(f) else (lambda t: f)

    def solve(v_traj, n_steps, dt):
        rho_traj = [rho0]
        rho = rho0
        for i in range(n_steps):
            if np.any(v_traj[i].components):
                rho = advect_step(rho, v_traj[i], dt, order=advect_order)
            rho_traj.append(rho)

        # semi-implicit Euler: the constant mu0-Laplacian part of the frozen
        # operator is inverted spectrally, the state-dependent remainder is
        # explicit, so the step is stable regardless of the grid Nyquist range
        implicit = 1.0 + dt * params.mu0 * grid.k_squared
        u_traj = [VectorField.zero(grid)]
        u = u_traj[0]
        ks = grid.wavenumbers
        for i in range(n_steps):
            v = v_traj[i]
            v_next = v_traj[i + 1]
            dv_dt = (v_next.components - v.components) / dt
            rho_i = rho_traj[i].values
            ft = forcing(i * dt)
            hats = [np.fft.fftn(c) for c in v.components]
            conv = np.empty_like(v.components)
            for a in range(grid.dim):
                conv[a] = sum(
                    v.components[b] * np.fft.ifftn(1j * ks[b] * hats[a]).real
                    for b in range(grid.dim)
                )
            force = (1.0 - rho_i)[None] * dv_dt - rho_i[None] * conv
            if ft is not None:
                force += rho_i[None] * ft.components

            lin = stress_coefficient_apply(v, u, params).components
            visc0 = np.stack(
                [np.fft.ifftn(-grid.k_squared * np.fft.fftn(c)).real for c in u.components]
            )
            explicit = _leray_arr(lin - params.mu0 * visc0 + force, grid)
            new = np.stack(
                [
                    np.fft.ifftn(np.fft.fftn(u.components[a] + dt * explicit[a]) / implicit).real
                    for a in range(grid.dim)
                ]
            )
            u = VectorField(grid, _leray_arr(new, grid))
            u_traj.append(u)
        return rho_traj, u_traj

    return solve


def gks_frozen_solver(rho0: ScalarField, f, params: MixtureParams):
    """Frozen solver for the mixture system: the density follows the stiff
    diffusion equation driven by the iterate v, and the velocity solves the
    Stokes-type problem with all coupling terms evaluated at (v, rho)."""
    grid = rho0.grid
    forcing = f if callable(f) else (lambda t: f)
    diffusion = params.diffusion()

    def solve(v_traj, n_steps, dt):
        rho_traj = [rho0]
        rho = rho0
        for i in range(n_steps):
            rho = kss_diffusion_step(rho, v_traj[i], diffusion, dt)
            rho_traj.append(rho)

        # semi-implicit Euler with nu_bar = mu / min(rho_bar) inverted
        # spectrally; the explicit remainder (mu/rho_bar - nu_bar) lap u is
        # damped by the implicit factor, so the split is unconditionally stable
        u_traj = [VectorField.zero(grid)]
        u = u_traj[0]
        ks = grid.wavenumbers
        for i in range(n_steps):
            v = v_traj[i]
            rho_i = rho_traj[i]
            rb = rho_i.values + params.m_shift
            if rb.min() <= 0:
                raise RuntimeError("shifted density lost positivity in Picard pass")
            th = theta(rho_i, params.mobility)
            gt = _grad_arr(th.values, grid)
            hats = [np.fft.fftn(c) for c in v.components]
            force = np.zeros_like(v.components)
            for a in range(grid.dim):
                conv = sum(
                    v.components[b] * np.fft.ifftn(1j * ks[b] * hats[a]).real
                    for b in range(grid.dim)
                )
                grad_coupling = sum(
                    gt[b] * np.fft.ifftn(1j * ks[b] * hats[a]).real
                    for b in range(grid.dim)
                )
                hess_a = _grad_arr(gt[a], grid)
                transport_t = sum(v.components[b] * hess_a[b] for b in range(grid.dim))
                force[a] = -rb * conv + params.lam * (grad_coupling + transport_t)
            force += korteweg_force(th, ScalarField(grid, rb), params.lam).components
            ft = forcing(i * dt)
            if ft is not None:
                force += rb[None] * ft.components

            nu_bar = params.mu / float(rb.min())
            implicit = 1.0 + dt * nu_bar * grid.k_squared
            visc = np.stack(
                [
                    params.mu * np.fft.ifftn(-grid.k_squared * np.fft.fftn(c)).real
                    for c in u.components
                ]
            )
            lap_u = visc / params.mu
            explicit = _leray_arr(
                (visc + force) / rb[None] - nu_bar * lap_u, grid
            )
            new = np.stack(
                [
                    np.fft.ifftn(np.fft.fftn(u.components[a] + dt * explicit[a]) / implicit).real
                    for a in range(grid.dim)
                ]
            )
            u = VectorField(grid, _leray_arr(new, grid))
            u_traj.append(u)
        return rho_traj, u_traj

    return solve
