"""Graffi-Kazhikhov-Smagulov phase-field mixture model.

The density obeys  d_t rho + u.grad rho - lam*lap(theta) = 0  with
theta = rho - Dm*lap(rho); the momentum balance couples to grad(theta).
Throughout, the shifted density rho_bar = rho + m_shift weights the inertial
terms so the system stays parabolic even when the fourth-order diffusion
(which has no maximum principle) drags rho toward zero.

Momentum variants:
  * graffi: keeps only the +lam (grad theta . grad) u coupling; with f = 0 the
    shifted kinetic energy |sqrt(rho_bar) u|_2^2 is dissipated monotonically.
  * full:   adds +lam (u.grad) grad theta and the capillary (Korteweg) block
    -lam^2 div(grad theta x grad theta / rho_bar).
  * ks:     mobility Dm = 0, so theta = rho (the classical small-diffusion model).

Sign conventions follow the full-system statement; the printed Graffi variant
with the opposite sign on (grad theta . grad) u (which breaks the energy
identity) is available behind theta_grad_sign = -1 for comparison only.
Pressure is eliminated by Leray projection (a gauge choice: the modified
pressure absorbing d_t theta and lap log rho is never reconstructed).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .fields import (
    Grid,
    ScalarField,
    VectorField,
    _dealias_arr,
    _grad_arr,
    _lap_arr,
    _leray_arr,
)
from .galerkin import BlowupError
from .transport import DiffusionParams, kss_diffusion_step


@dataclass(frozen=True)
class MixtureParams:
    """Unmixed densities, diffusion/mobility coefficients, viscosity, shift."""

    rho10: float
    rho20: float
    lam: float = 0.0
    mobility: float = 0.0
    mu: float = 1.0
    m_shift: float = 0.1

    def __post_init__(self):
        if self.rho10 <= 0 or self.rho20 <= 0:
            raise ValueError("unmixed densities must be positive")
        if self.rho10 == self.rho20:
            raise ValueError("rho10 and rho20 must differ")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.lam < 0 or self.mobility < 0 or self.m_shift < 0:
            raise ValueError("lam, mobility and m_shift must be nonnegative")

    def diffusion(self) -> DiffusionParams:
        return DiffusionParams(lam=self.lam, mobility=self.mobility)


class GksMode(enum.Enum):
    GRAFFI = "graffi"
    FULL = "full"
    KS = "ks"


def validate_mode(mode: GksMode, params: MixtureParams) -> None:
    if mode is GksMode.KS and params.mobility != 0.0:
        raise ValueError("KS mode requires mobility = 0 (theta = rho)")


def theta(rho: ScalarField, mobility: float) -> ScalarField:
    """theta = rho - Dm * lap(rho); linear, mean-preserving."""
    if mobility == 0.0:
        return rho
    return ScalarField(rho.grid, rho.values - mobility * _lap_arr(rho.values, rho.grid))


def chemical_potential(c: ScalarField, mobility: float) -> ScalarField:
    """omega(c) = c - Dm * lap(c); structurally identical to theta."""
    return theta(c, mobility)


def _rho_bar(rho: ScalarField, params: MixtureParams) -> np.ndarray:
    rb = rho.values + params.m_shift
    if rb.min() <= 0:
        raise ValueError(f"shifted density lost positivity (min = {rb.min():.3e})")
    return rb


def korteweg_force(theta_f: ScalarField, rho_bar: ScalarField, lam: float) -> VectorField:
    """Capillary force -lam^2 div(grad theta x grad theta / rho_bar), conservative form."""
    grid = theta_f.grid
    if rho_bar.values.min() <= 0:
        raise ValueError("rho_bar must be positive")
    if lam == 0.0:
        return VectorField.zero(grid)
    gt = _grad_arr(theta_f.values, grid)
    ks = grid.wavenumbers
    out = np.zeros((grid.dim,) + grid.shape)
    for i in range(grid.dim):
        for j in range(grid.dim):
            flux = gt[j] * gt[i] / rho_bar.values
            out[i] -= np.fft.ifftn(1j * ks[j] * np.fft.fftn(flux)).real
    return VectorField(grid, lam**2 * out)


def korteweg_force_expanded(theta_f: ScalarField, rho_bar: ScalarField, lam: float) -> VectorField:
    """The same force in the expanded form
    -(lam^2/rho_bar)((grad theta . grad) grad theta
                     - (grad rho_bar . grad theta) grad theta / rho_bar
                     + lap theta grad theta);
    agrees with the conservative form up to spectral product error."""
    grid = theta_f.grid
    rb = rho_bar.values
    if rb.min() <= 0:
        raise ValueError("rho_bar must be positive")
    if lam == 0.0:
        return VectorField.zero(grid)
    gt = _grad_arr(theta_f.values, grid)
    grb = _grad_arr(rb, grid)
    lap_t = _lap_arr(theta_f.values, grid)
    hess = [_grad_arr(gt[i], grid) for i in range(grid.dim)]  # hess[i][j] = d2 theta / dxi dxj
    dot_rt = sum(grb[a] * gt[a] for a in range(grid.dim))
    out = np.zeros((grid.dim,) + grid.shape)
    for i in range(grid.dim):
        advective = sum(gt[j] * hess[i][j] for j in range(grid.dim))
        out[i] = -(lam**2 / rb) * (advective - dot_rt * gt[i] / rb + lap_t * gt[i])
    return VectorField(grid, out)


def _pressure_project(force: np.ndarray, rho_bar: np.ndarray, grid: Grid,
                      tol: float = 1e-10, max_iter: int = 200,
                      cache: list | None = None) -> np.ndarray:
    """Variable-density projection: return (force - grad pi)/rho_bar with
    div((force - grad pi)/rho_bar) = 0.

    Unlike a plain Leray projection of force/rho_bar, the subtracted gradient
    pairs to zero against every divergence-free field, so the weighted energy
    identity holds exactly in the semi-discrete system.  The coefficient
    Poisson problem div(grad(pi)/rho_bar) = div(force/rho_bar) is solved by
    Richardson iteration preconditioned with the constant-coefficient inverse
    Laplacian; convergence factor (kappa-1)/(kappa+1) in the density contrast.
    cache, when given, is a one-element list holding the previous pi_hat as a
    warm start (successive RK stages differ only at O(dt)).
    """
    b = 1.0 / rho_bar
    ks = grid.wavenumbers
    bF_hat = [np.fft.fftn(b * force[ax]) for ax in range(grid.dim)]
    rhs_hat = sum(1j * k * h for k, h in zip(ks, bF_hat))
    scale = float(np.max(np.abs(rhs_hat))) / force[0].size
    if scale < 1e-300:
        return b[None] * force
    b_ref = 0.5 * (float(b.min()) + float(b.max()))
    b_dev = b - b_ref
    inv = -1.0 / (b_ref * grid.k_squared_safe)
    zero = (0,) * grid.dim

    pi_hat = None
    if cache is not None and cache and cache[0] is not None and cache[0].shape == rhs_hat.shape:
        pi_hat = cache[0]
    if pi_hat is None:
        pi_hat = inv * rhs_hat
        pi_hat[zero] = 0.0
    for _ in range(max_iter):
        # residual_hat = rhs_hat - [b_ref lap(pi) + div(b_dev grad(pi))]
        flux_hat = [
            np.fft.fftn(b_dev * np.fft.ifftn(1j * k * pi_hat).real) for k in ks
        ]
        var_hat = sum(1j * k * h for k, h in zip(ks, flux_hat))
        res_hat = rhs_hat + b_ref * grid.k_squared * pi_hat - var_hat
        res_hat[zero] = 0.0
        if float(np.max(np.abs(res_hat))) / force[0].size <= tol * scale:
            break
        pi_hat = pi_hat + inv * res_hat
        pi_hat[zero] = 0.0
    if cache is not None:
        cache[:] = [pi_hat]
    grad_pi = np.stack([np.fft.ifftn(1j * k * pi_hat).real for k in ks])
    # clean the remaining O(tol) divergence; the associated gauge error is
    # far below the time-splitting defect
    return _leray_arr(b[None] * (force - grad_pi), grid)


def _momentum_tendency(
    comps: np.ndarray,
    rho: ScalarField,
    f: VectorField | None,
    params: MixtureParams,
    mode: GksMode,
    theta_grad_sign: float,
    cache: list | None = None,
) -> np.ndarray:
    grid = rho.grid
    rb = _rho_bar(rho, params)
    th = theta(rho, params.mobility)
    gt = _grad_arr(th.values, grid)
    ks = grid.wavenumbers

    hats = [np.fft.fftn(c) for c in comps]
    tend = np.empty_like(comps)
    for i in range(grid.dim):
        conv = np.zeros(grid.shape)
        theta_coupling = np.zeros(grid.shape)
        for j in range(grid.dim):
            du_ij = np.fft.ifftn(1j * ks[j] * hats[i]).real
            conv += comps[j] * du_ij
            theta_coupling += gt[j] * du_ij
        conv = _dealias_arr(conv, grid)
        theta_coupling = _dealias_arr(theta_coupling, grid)
        visc = params.mu * np.fft.ifftn(-grid.k_squared * hats[i]).real
        acc = visc - rb * conv + theta_grad_sign * params.lam * theta_coupling
        if f is not None:
            acc += rb * f.components[i]
        tend[i] = acc

    if mode is GksMode.FULL:
        hess_t = [_grad_arr(gt[i], grid) for i in range(grid.dim)]
        for i in range(grid.dim):
            transport_t = sum(comps[j] * hess_t[i][j] for j in range(grid.dim))
            tend[i] += params.lam * _dealias_arr(transport_t, grid)
        kort = korteweg_force(th, ScalarField(grid, rb), params.lam)
        tend += kort.components

    return _pressure_project(tend, rb, grid, cache=cache)


def _rk4_velocity(comps, rhs, dt):
    k1 = rhs(comps)
    k2 = rhs(comps + 0.5 * dt * k1)
    k3 = rhs(comps + 0.5 * dt * k2)
    k4 = rhs(comps + dt * k3)
    return comps + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def graffi_momentum_step(
    u: VectorField,
    rho: ScalarField,
    f: VectorField | None,
    params: MixtureParams,
    dt: float,
    theta_grad_sign: float = 1.0,
    pressure_cache: list | None = None,
) -> VectorField:
    """One RK4 step of the simplified (Graffi) momentum equation
    rho_bar d_t u + rho_bar u.grad u - lam (grad theta . grad) u - mu lap u = rho_bar f."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cache = [None] if pressure_cache is None else pressure_cache

    def rhs(c):
        return _momentum_tendency(c, rho, f, params, GksMode.GRAFFI, theta_grad_sign, cache)

    return VectorField(u.grid, _rk4_velocity(u.components, rhs, dt))


def full_momentum_step(
    u: VectorField,
    rho: ScalarField,
    f: VectorField | None,
    params: MixtureParams,
    dt: float,
    pressure_cache: list | None = None,
) -> VectorField:
    """One RK4 step of the full mixture momentum equation including the
    lam (u.grad) grad theta transport term and the Korteweg block."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cache = [None] if pressure_cache is None else pressure_cache

    def rhs(c):
        return _momentum_tendency(c, rho, f, params, GksMode.FULL, 1.0, cache)

    return VectorField(u.grid, _rk4_velocity(u.components, rhs, dt))


# ---------------------------------------------------------------------------
# Coupled driver
# ---------------------------------------------------------------------------

GKS_DIAG_COLUMNS = (
    "time",
    "energy",
    "dissipation_integral",
    "mass",
    "rho_min",
    "rho_max",
    "lp_norm_rho_2",
    "energy_defect",
    "theta_l2",
    "korteweg_work",
    "mean_rho",
    "rho_bar_min",
)


@dataclass
class GksTrajectory:
    grid: Grid
    mode: GksMode
    times: np.ndarray
    diag: dict
    snap_times: np.ndarray
    rho_snaps: list
    u_snaps: list
    params: MixtureParams | None = None


def run_gks(
    rho0: ScalarField,
    u0: VectorField,
    params: MixtureParams,
    dt: float,
    t_end: float,
    f=None,
    mode: GksMode = GksMode.FULL,
    theta_grad_sign: float = 1.0,
    stride: int = 1,
    blowup_limit: float = 1e6,
) -> GksTrajectory:
    """Couple the density equation (exact-symbol stiff integrator) with the
    requested momentum variant under Lie splitting.

    The mean of rho is conserved exactly; positivity of rho_bar is enforced
    (an exception aborts the run).  Diagnostics track the shifted energy
    E = |sqrt(rho_bar) u|_2^2, its inequality defect against the viscous
    dissipation, and the Korteweg work rate.
    """
    validate_mode(mode, params)
    grid = rho0.grid
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    # the viscous term is explicit (RK4); its stability limit is the usual
    # spectral one, nu |k|_max^2 dt < 2.79 with nu = mu / min(rho_bar)
    k2max = float(np.max(grid.k_squared))
    stiffness = params.mu / max(float(rho0.values.min()) + params.m_shift, 1e-30) * k2max * dt
    if stiffness > 2.79:
        warnings.warn(
            f"explicit viscous step outside the RK4 stability interval "
            f"(nu k^2 dt = {stiffness:.2f} > 2.79); reduce dt or resolution",
            stacklevel=2,
        )
    diffusion = params.diffusion()
    forcing = f if callable(f) else (lambda t: f)

    rho, u = rho0, u0
    n_steps = int(round(t_end / dt))

    def diag_row(t, rho_, u_, diss_int, defect):
        rb = rho_.values + params.m_shift
        th = theta(rho_, params.mobility)
        kw = korteweg_force(th, ScalarField(grid, rb), params.lam) if params.lam else None
        kwork = (
            float(np.sum(kw.components * u_.components) * grid.cell_volume) if kw else 0.0
        )
        E = float(np.sum(rb[None] * u_.components**2) * grid.cell_volume)
        return {
            "time": t,
            "energy": E,
            "dissipation_integral": diss_int,
            "mass": float(np.sum(rho_.values) * grid.cell_volume),
            "rho_min": float(rho_.values.min()),
            "rho_max": float(rho_.values.max()),
            "lp_norm_rho_2": float(np.sqrt(np.sum(rho_.values**2) * grid.cell_volume)),
            "energy_defect": defect,
            "theta_l2": float(np.sqrt(np.sum(th.values**2) * grid.cell_volume)),
            "korteweg_work": kwork,
            "mean_rho": float(np.mean(rho_.values)),
            "rho_bar_min": float(rb.min()),
        }

    def grad_sq(u_):
        total = 0.0
        for c in u_.components:
            hat = np.fft.fftn(c)
            total += float(np.sum(grid.k_squared * np.abs(hat) ** 2) / c.size**2 * grid.volume)
        return total

    def work_rate(rho_, u_, t):
        ft = forcing(t)
        if ft is None:
            return 0.0
        rb = rho_.values + params.m_shift
        return 2.0 * float(np.sum(rb[None] * ft.components * u_.components) * grid.cell_volume)

    rows = [diag_row(0.0, rho, u, 0.0, 0.0)]
    E0 = rows[0]["energy"]
    diss_prev = 2.0 * params.mu * grad_sq(u)
    work_prev = work_rate(rho, u, 0.0)
    diss_int = 0.0
    work_int = 0.0

    snap_times = [0.0]
    rho_snaps = [rho]
    u_snaps = [u]
    times = [0.0]

    pressure_cache = [None]
    step_fns = {
        GksMode.GRAFFI: lambda u_, rho_, ft: graffi_momentum_step(
            u_, rho_, ft, params, dt, theta_grad_sign=theta_grad_sign,
            pressure_cache=pressure_cache,
        ),
        GksMode.FULL: lambda u_, rho_, ft: full_momentum_step(
            u_, rho_, ft, params, dt, pressure_cache=pressure_cache
        ),
        GksMode.KS: lambda u_, rho_, ft: full_momentum_step(
            u_, rho_, ft, params, dt, pressure_cache=pressure_cache
        ),
    }
    momentum = step_fns[mode]

    for n in range(n_steps):
        t = n * dt
        rho = kss_diffusion_step(rho, u, diffusion, dt)
        u = momentum(u, rho, forcing(t))
        t_next = t + dt

        if float(np.max(np.abs(u.components))) > blowup_limit:
            raise BlowupError(f"velocity magnitude exceeded {blowup_limit:g} at t = {t_next:.6g}")

        diss_now = 2.0 * params.mu * grad_sq(u)
        work_now = work_rate(rho, u, t_next)
        diss_int += dt * 0.5 * (diss_prev + diss_now)
        work_int += dt * 0.5 * (work_prev + work_now)
        diss_prev, work_prev = diss_now, work_now

        rows.append(diag_row(t_next, rho, u, diss_int, 0.0))
        rows[-1]["energy_defect"] = rows[-1]["energy"] + diss_int - E0 - work_int
        times.append(t_next)
        if (n + 1) % stride == 0 or n == n_steps - 1:
            snap_times.append(t_next)
            rho_snaps.append(rho)
            u_snaps.append(u)

    diag = {col: np.array([r[col] for r in rows]) for col in GKS_DIAG_COLUMNS}
    return GksTrajectory(
        grid=grid,
        mode=mode,
        times=np.array(times),
        diag=diag,
        snap_times=np.array(snap_times),
        rho_snaps=rho_snaps,
        u_snaps=u_snaps,
        params=params,
    )


# ---------------------------------------------------------------------------
# Mixture algebra (velocity transformation, concentrations)
# ---------------------------------------------------------------------------


def mass_to_volume_velocity(v: VectorField, rho: ScalarField, params: MixtureParams) -> VectorField:
    """Mean-mass velocity from the divergence-free mean-volume velocity:
    w = v - (lam/rho)(grad rho - Dm grad lap rho)."""
    grid = v.grid
    if rho.values.min() <= 0:
        raise ValueError("rho must be positive")
    if params.lam == 0.0:
        return v
    flux = _diffusive_drift(rho, params)
    return VectorField(grid, v.components - flux)


def volume_velocity_from_mass(w: VectorField, rho: ScalarField, params: MixtureParams) -> VectorField:
    """Inverse of mass_to_volume_velocity (exact, same arithmetic)."""
    if rho.values.min() <= 0:
        raise ValueError("rho must be positive")
    if params.lam == 0.0:
        return w
    flux = _diffusive_drift(rho, params)
    return VectorField(w.grid, w.components + flux)


def _diffusive_drift(rho: ScalarField, params: MixtureParams) -> np.ndarray:
    grid = rho.grid
    grad_rho = _grad_arr(rho.values, grid)
    if params.mobility != 0.0:
        grad_lap = _grad_arr(_lap_arr(rho.values, grid), grid)
        flux = grad_rho - params.mobility * grad_lap
    else:
        flux = grad_rho
    return params.lam * flux / rho.values[None]


def concentration_maps(rho: ScalarField, params: MixtureParams):
    """Mass concentration c, volume concentration alpha, and the two sides of
    the Fick identity grad(c)/c = rho20 grad(rho) / (rho (rho - rho20)).

    Requires rho strictly between the unmixed densities pointwise.
    """
    grid = rho.grid
    lo, hi = sorted((params.rho10, params.rho20))
    rv = rho.values
    if rv.min() <= lo or rv.max() >= hi:
        raise ValueError(
            f"density range [{rv.min():.4g}, {rv.max():.4g}] leaves the physical "
            f"mixture interval ({lo:.4g}, {hi:.4g})"
        )
    alpha_vals = (rv - params.rho20) / (params.rho10 - params.rho20)
    c_vals = alpha_vals * params.rho10 / rv
    c = ScalarField(grid, c_vals)
    alpha = ScalarField(grid, alpha_vals)
    grad_c = _grad_arr(c_vals, grid)
    fick_lhs = VectorField(grid, grad_c / c_vals[None])
    grad_rho = _grad_arr(rv, grid)
    fick_rhs = VectorField(grid, params.rho20 * grad_rho / (rv * (rv - params.rho20))[None])
    return c, alpha, fick_lhs, fick_rhs
