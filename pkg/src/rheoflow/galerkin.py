"""Semi-Faedo-Galerkin discretization of the momentum equation.

Velocity lives on a finite, L2-orthonormal, divergence-free Fourier basis
(on the torus these are exactly the eigenfunctions of the Stokes spectral
problem, ordered by |k|^2); density is transported fully resolved by
characteristics.  The density-weighted Gram matrix A(rho) couples modes and is
symmetric positive definite whenever min(rho) > 0, with smallest eigenvalue at
least min(rho) by orthonormality.

The coupled stepper uses first-order Lie splitting by default (transport, then
momentum against the fresh density), which mirrors the decoupled construction
of the continuous scheme; Strang splitting is available as an option.  A
"collocation" step (pointwise division by rho plus projection) is provided for
large mode counts but is not the Galerkin scheme and is labeled accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Grid, ScalarField, VectorField, _dealias_arr, _leray_arr
from .rheology import PowerLawParams, dissipation, stress_divergence_direct
from .transport import advect_step


class BlowupError(RuntimeError):
    """Raised when the coefficient vector exceeds the blow-up guard."""


@dataclass(frozen=True)
class BasisMode:
    k: tuple
    polarization: int
    phase: int  # 0 = cos, 1 = sin


def _canonical_wavevectors(dim: int, kmax_sq: int):
    """Half-lattice representatives (first nonzero component positive)."""
    rng = int(np.floor(np.sqrt(kmax_sq)))
    out = []
    axes = [range(-rng, rng + 1)] * dim
    for idx in np.ndindex(*[2 * rng + 1] * dim):
        k = tuple(i - rng for i in idx)
        if all(c == 0 for c in k):
            continue
        if sum(c * c for c in k) > kmax_sq:
            continue
        nz = next(c for c in k if c != 0)
        if nz < 0:
            continue
        out.append(k)
    out.sort(key=lambda k: (sum(c * c for c in k), k))
    return out


def _polarizations(k: tuple) -> list[np.ndarray]:
    kv = np.asarray(k, dtype=float)
    if len(k) == 2:
        e = np.array([-kv[1], kv[0]]) / np.linalg.norm(kv)
        return [e]
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(kv)))] = 1.0
    e1 = np.cross(kv, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(kv, e1)
    e2 /= np.linalg.norm(e2)
    return [e1, e2]


class BasisSet:
    """Real divergence-free Fourier modes, L2-orthonormal on the torus."""

    def __init__(self, grid: Grid, modes: list[BasisMode]):
        self.grid = grid
        self.modes = modes
        self.m = len(modes)
        scale = grid.length / (2.0 * np.pi)
        norm = np.sqrt(2.0 / grid.volume)
        fields = np.empty((self.m, grid.dim) + grid.shape)
        ksq = np.empty(self.m)
        for idx, mode in enumerate(modes):
            kphys = np.asarray(mode.k, dtype=float) * 2.0 * np.pi / grid.length
            phase = sum(kphys[ax] * grid.mesh[ax] for ax in range(grid.dim))
            osc = np.cos(phase) if mode.phase == 0 else np.sin(phase)
            e = _polarizations(mode.k)[mode.polarization]
            for ax in range(grid.dim):
                fields[idx, ax] = norm * e[ax] * osc
            ksq[idx] = float(np.sum(kphys**2))
        fields.setflags(write=False)
        self.fields = fields
        self.k_squared = ksq
        self._flat = fields.reshape(self.m, -1)

    def reconstruct(self, coeffs: np.ndarray) -> VectorField:
        comps = np.tensordot(coeffs, self.fields, axes=(0, 0))
        return VectorField(self.grid, comps)

    def project(self, u: VectorField) -> np.ndarray:
        """L2 coefficients of u against the basis (exact for in-span fields)."""
        return self._flat @ u.components.ravel() * self.grid.cell_volume

    def inner_with_modes(self, comps: np.ndarray) -> np.ndarray:
        return self._flat @ comps.ravel() * self.grid.cell_volume


def build_basis(grid: Grid, m: int | None = None, cutoff: float | None = None) -> BasisSet:
    """First m modes ordered by |k|^2 (ties lexicographic), or all modes up to
    integer wavenumber |k| <= cutoff."""
    if (m is None) == (cutoff is None):
        raise ValueError("specify exactly one of m or cutoff")
    nyquist = grid.n_points // 2
    if cutoff is not None:
        if cutoff > nyquist - 1:
            raise ValueError(f"cutoff {cutoff} exceeds grid Nyquist range {nyquist - 1}")
        kmax_sq = int(cutoff**2)
    else:
        if m < 1:
            raise ValueError("m must be >= 1")
        per_k = (1 if grid.dim == 2 else 2) * 2
        kmax_sq = 1
        while True:
            count = len(_canonical_wavevectors(grid.dim, kmax_sq)) * per_k
            if count >= m:
                break
            kmax_sq += 1
            if np.sqrt(kmax_sq) > nyquist - 1:
                raise ValueError(f"m = {m} requires modes beyond the grid Nyquist range")
    modes = []
    for k in _canonical_wavevectors(grid.dim, kmax_sq):
        for pol in range(1 if grid.dim == 2 else 2):
            for phase in (0, 1):
                modes.append(BasisMode(k=k, polarization=pol, phase=phase))
    if m is not None:
        modes = modes[:m]
    return BasisSet(grid, modes)


@dataclass(frozen=True)
class GalerkinState:
    coeffs: np.ndarray
    basis: BasisSet
    time: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64)
        if c.shape != (self.basis.m,):
            raise ValueError("coefficient vector length does not match the basis")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def velocity(self) -> VectorField:
        return self.basis.reconstruct(self.coeffs)


def gram_matrix(rho: ScalarField, basis: BasisSet) -> np.ndarray:
    """Density-weighted Gram matrix A_ij = int rho w_i . w_j dx."""
    rho_min = float(rho.values.min())
    if rho_min <= 0:
        raise ValueError(f"gram_matrix requires min(rho) > 0, got {rho_min}")
    weighted = basis.fields * rho.values[None, None]
    A = weighted.reshape(basis.m, -1) @ basis._flat.T * basis.grid.cell_volume
    return 0.5 * (A + A.T)


def _convection(comps: np.ndarray, grid: Grid) -> np.ndarray:
    """(u.grad)u, dealiased."""
    hats = [np.fft.fftn(c) for c in comps]
    ks = grid.wavenumbers
    out = np.empty_like(comps)
    for i in range(grid.dim):
        acc = np.zeros(grid.shape)
        for j in range(grid.dim):
            acc += comps[j] * np.fft.ifftn(1j * ks[j] * hats[i]).real
        out[i] = _dealias_arr(acc, grid)
    return out


def assemble_rhs(
    state: GalerkinState,
    rho: ScalarField,
    f: VectorField | None,
    params: PowerLawParams,
    constraint=None,
    kappa: float = 0.0,
) -> np.ndarray:
    """Galerkin right-hand side H_i = -(rho u.grad u, w_i) - (T(D u), D w_i)
    + (rho f, w_i) [- kappa (beta(u), w_i) when a constraint is active]."""
    basis = state.basis
    grid = basis.grid
    u = state.velocity()
    integrand = -rho.values[None] * _convection(u.components, grid)
    integrand += stress_divergence_direct(u, params, apply_dealias=True).components
    if f is not None:
        integrand += rho.values[None] * f.components
    if constraint is not None and kappa != 0.0:
        beta = u.components - constraint.project(u).components
        integrand -= kappa * beta
    return basis.inner_with_modes(integrand)


def momentum_step(
    state: GalerkinState,
    rho: ScalarField,
    f: VectorField | None,
    params: PowerLawParams,
    dt: float,
    scheme: str = "rk4",
    gram: np.ndarray | None = None,
    constraint=None,
    kappa: float = 0.0,
) -> GalerkinState:
    """Advance the coefficient ODE A(rho) dc/dt = H(c) by one step.

    scheme "rk4" is fully explicit; "imex" treats the mu0-Laplacian part of the
    stress implicitly (diagonal in this basis) and the rest explicitly.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    A = gram if gram is not None else gram_matrix(rho, state.basis)
    basis = state.basis

    def H(c):
        return assemble_rhs(
            GalerkinState(c, basis, state.time), rho, f, params,
            constraint=constraint, kappa=kappa,
        )

    c0 = state.coeffs
    if scheme == "rk4":
        k1 = np.linalg.solve(A, H(c0))
        k2 = np.linalg.solve(A, H(c0 + 0.5 * dt * k1))
        k3 = np.linalg.solve(A, H(c0 + 0.5 * dt * k2))
        k4 = np.linalg.solve(A, H(c0 + dt * k3))
        c1 = c0 + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    elif scheme == "imex":
        lap = params.mu0 * basis.k_squared
        rhs = A @ c0 + dt * (H(c0) + lap * c0)
        c1 = np.linalg.solve(A + dt * np.diag(lap), rhs)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return GalerkinState(c1, basis, state.time + dt)


def collocation_momentum_step(
    u: VectorField, rho: ScalarField, f: VectorField | None, params: PowerLawParams, dt: float
) -> VectorField:
    """Grid-space step dividing the momentum equation pointwise by rho and
    Leray-projecting.  NOT the Galerkin scheme; intended for large mode counts."""
    grid = u.grid
    rv = rho.values
    if rv.min() <= 0:
        raise ValueError("collocation step requires positive density")

    def rhs(comps):
        tend = -_convection(comps, grid)
        tend += stress_divergence_direct(
            VectorField(grid, comps), params, apply_dealias=True
        ).components / rv[None]
        if f is not None:
            tend += f.components
        return _leray_arr(tend, grid)

    c0 = u.components
    k1 = rhs(c0)
    k2 = rhs(c0 + 0.5 * dt * k1)
    k3 = rhs(c0 + 0.5 * dt * k2)
    k4 = rhs(c0 + dt * k3)
    return VectorField(grid, c0 + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0)


# ---------------------------------------------------------------------------
# Coupled driver and energy accounting
# ---------------------------------------------------------------------------

DIAG_COLUMNS = (
    "time",
    "energy",
    "dissipation_integral",
    "mass",
    "rho_min",
    "rho_max",
    "lp_norm_rho_2",
    "energy_defect",
)


@dataclass
class Trajectory:
    grid: Grid
    basis: BasisSet
    times: np.ndarray
    coeffs: np.ndarray          # (n_steps+1, m), every step
    diag: dict                  # column -> array over steps
    snap_times: np.ndarray
    rho_snaps: list
    coeff_snaps: np.ndarray
    params: PowerLawParams | None = None

    def velocity_at_snap(self, i: int) -> VectorField:
        return self.basis.reconstruct(self.coeff_snaps[i])


def _diag_row(t, energy, diss_int, rho, grid, defect):
    v = rho.values
    return {
        "time": t,
        "energy": energy,
        "dissipation_integral": diss_int,
        "mass": float(np.sum(v) * grid.cell_volume),
        "rho_min": float(v.min()),
        "rho_max": float(v.max()),
        "lp_norm_rho_2": float(np.sqrt(np.sum(v**2) * grid.cell_volume)),
        "energy_defect": defect,
    }


def run_semi_galerkin(
    basis: BasisSet,
    rho0: ScalarField,
    u0,
    params: PowerLawParams,
    dt: float,
    t_end: float,
    f=None,
    scheme: str = "rk4",
    splitting: str = "lie",
    advect_order: int = 4,
    constraint=None,
    kappa: float = 0.0,
    stride: int = 1,
    blowup_limit: float = 1e6,
) -> Trajectory:
    """Alternate characteristics transport of rho with Galerkin momentum steps.

    u0 may be a coefficient vector or a VectorField (projected onto the basis).
    f may be None, a steady VectorField, or a callable t -> VectorField.
    Emits per-step diagnostics including the cumulative energy-inequality
    defect  E(t) + int 2*dissipation - E(0) - int 2*(rho f, u).
    """
    grid = basis.grid
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    params.warn_if_subcritical(grid.dim)
    coeffs0 = u0 if isinstance(u0, np.ndarray) else basis.project(u0)
    state = GalerkinState(coeffs0, basis, 0.0)
    rho = rho0

    n_steps = int(round(t_end / dt))
    forcing = f if callable(f) else (lambda t: f)

    def energy_of(rho_, state_):
        u = state_.velocity()
        return float(np.sum(rho_.values[None] * u.components**2) * grid.cell_volume)

    def work_rate(rho_, state_, t):
        ft = forcing(t)
        if ft is None:
            return 0.0, None
        u = state_.velocity()
        return (
            2.0 * float(np.sum(rho_.values[None] * ft.components * u.components) * grid.cell_volume),
            ft,
        )

    times = [0.0]
    coeff_hist = [state.coeffs]
    diag_rows = []
    snap_times = [0.0]
    rho_snaps = [rho]
    coeff_snaps = [state.coeffs]

    u = state.velocity()
    diss_prev = dissipation(u, params)
    if constraint is not None and kappa != 0.0:
        beta = u.components - constraint.project(u).components
        diss_prev += kappa * float(np.sum(beta * u.components) * grid.cell_volume)
    work_prev, _ = work_rate(rho, state, 0.0)
    E0 = energy_of(rho, state)
    diss_int = 0.0
    work_int = 0.0
    diag_rows.append(_diag_row(0.0, E0, 0.0, rho, grid, 0.0))

    for n in range(n_steps):
        t = n * dt
        ft = forcing(t)
        if splitting == "strang":
            rho = advect_step(rho, state.velocity(), 0.5 * dt, order=advect_order)
            A = gram_matrix(rho, basis)
            state = momentum_step(
                state, rho, ft, params, dt, scheme=scheme, gram=A,
                constraint=constraint, kappa=kappa,
            )
            rho = advect_step(rho, state.velocity(), 0.5 * dt, order=advect_order)
        elif splitting == "lie":
            rho = advect_step(rho, state.velocity(), dt, order=advect_order)
            A = gram_matrix(rho, basis)
            state = momentum_step(
                state, rho, ft, params, dt, scheme=scheme, gram=A,
                constraint=constraint, kappa=kappa,
            )
        else:
            raise ValueError(f"unknown splitting {splitting!r}")

        if float(np.max(np.abs(state.coeffs))) > blowup_limit:
            raise BlowupError(
                f"coefficient magnitude exceeded {blowup_limit:g} at t = {state.time:.6g}"
            )

        u = state.velocity()
        diss_now = dissipation(u, params)
        if constraint is not None and kappa != 0.0:
            beta = u.components - constraint.project(u).components
            diss_now += kappa * float(np.sum(beta * u.components) * grid.cell_volume)
        work_now, _ = work_rate(rho, state, state.time)
        diss_int += dt * 0.5 * (diss_prev + diss_now) * 2.0
        work_int += dt * 0.5 * (work_prev + work_now)
        diss_prev, work_prev = diss_now, work_now

        E = energy_of(rho, state)
        defect = E + diss_int - E0 - work_int
        times.append(state.time)
        coeff_hist.append(state.coeffs)
        diag_rows.append(_diag_row(state.time, E, diss_int, rho, grid, defect))
        if (n + 1) % stride == 0 or n == n_steps - 1:
            snap_times.append(state.time)
            rho_snaps.append(rho)
            coeff_snaps.append(state.coeffs)

    diag = {col: np.array([row[col] for row in diag_rows]) for col in DIAG_COLUMNS}
    return Trajectory(
        grid=grid,
        basis=basis,
        times=np.array(times),
        coeffs=np.stack(coeff_hist),
        diag=diag,
        snap_times=np.array(snap_times),
        rho_snaps=rho_snaps,
        coeff_snaps=np.stack(coeff_snaps),
        params=params,
    )


@dataclass
class EnergyReport:
    times: np.ndarray
    energy: np.ndarray
    defect: np.ndarray
    max_step_increase: float
    final_defect: float
    flagged: bool


def energy_report(traj: Trajectory, tol: float | None = None) -> EnergyReport:
    """Per-step energy-inequality defect for a stored trajectory.

    max_step_increase is the largest positive jump of E between consecutive
    steps (exactly zero or negative in exact arithmetic without forcing).
    """
    E = traj.diag["energy"]
    defect = traj.diag["energy_defect"]
    steps = np.diff(E)
    max_inc = float(np.max(steps, initial=0.0))
    final = float(defect[-1])
    tol = tol if tol is not None else 1e-9 * max(E[0], 1e-30)
    return EnergyReport(
        times=traj.times,
        energy=E,
        defect=defect,
        max_step_increase=max_inc,
        final_defect=final,
        flagged=bool(max_inc > tol),
    )
