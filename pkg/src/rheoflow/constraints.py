"""Convex constraint sets, the penalty operator beta = I - P_K, the penalized
momentum step, and the penalty-convergence / time-translation diagnostics.

The penalty strength kappa is deliberately decoupled from the Galerkin
dimension: the construction only needs kappa -> infinity, so sweeping kappa at
fixed basis size is the natural numerical experiment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, VectorField, lp_norm
from .galerkin import GalerkinState, Trajectory, momentum_step
from .rheology import PowerLawParams


class ConvexSet:
    """Closed convex set with 0 in it; subclasses supply projection and membership."""

    def project(self, v: VectorField) -> VectorField:
        raise NotImplementedError

    def contains(self, v: VectorField, tol: float = 1e-12) -> bool:
        raise NotImplementedError

    def violation(self, v: VectorField) -> float:
        """Distance-like measure of how far v sits outside the set (0 inside)."""
        raise NotImplementedError


@dataclass(frozen=True)
class L2Ball(ConvexSet):
    """{ v : |v|_2 <= radius } in the field L2 norm."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def project(self, v: VectorField) -> VectorField:
        norm = lp_norm(v, 2)
        if norm <= self.radius:
            return v
        return VectorField(v.grid, v.components * (self.radius / norm))

    def contains(self, v: VectorField, tol: float = 1e-12) -> bool:
        return lp_norm(v, 2) <= self.radius + tol

    def violation(self, v: VectorField) -> float:
        return max(0.0, lp_norm(v, 2) - self.radius)


@dataclass(frozen=True)
class PointwiseBall(ConvexSet):
    """{ v : |v(x)| <= bound at every point }."""

    bound: float

    def __post_init__(self):
        if not self.bound > 0:
            raise ValueError("bound must be positive")

    def project(self, v: VectorField) -> VectorField:
        mag = v.magnitude()
        over = mag > self.bound
        if not np.any(over):
            return v
        scale = np.ones_like(mag)
        scale[over] = self.bound / mag[over]
        return VectorField(v.grid, v.components * scale[None])

    def contains(self, v: VectorField, tol: float = 1e-12) -> bool:
        return float(np.max(v.magnitude())) <= self.bound + tol

    def violation(self, v: VectorField) -> float:
        return max(0.0, float(np.max(v.magnitude())) - self.bound)


def project(v: VectorField, K: ConvexSet) -> VectorField:
    return K.project(v)


def penalty(v: VectorField, K: ConvexSet) -> VectorField:
    """beta(v) = v - P_K v; monotone, and zero exactly on K."""
    return VectorField(v.grid, v.components - K.project(v).components)


def penalized_momentum_step(
    state: GalerkinState,
    rho: ScalarField,
    f: VectorField | None,
    params: PowerLawParams,
    K: ConvexSet,
    kappa: float,
    dt: float,
    scheme: str = "rk4",
    gram=None,
) -> GalerkinState:
    """Galerkin momentum step with the extra term -kappa (beta(u), w_i)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return momentum_step(
        state, rho, f, params, dt, scheme=scheme, gram=gram, constraint=K, kappa=kappa
    )


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

STUDY_COLUMNS = ("kappa", "beta_l2qt_norm", "constraint_violation_max")


@dataclass
class PenaltyStudyRow:
    kappa: float
    beta_l2qt_norm: float
    constraint_violation_max: float
    violation_final: float


@dataclass
class PenaltyStudyReport:
    rows: list
    monotone: bool
    decay_slope: float

    def as_csv_rows(self):
        return [
            (r.kappa, r.beta_l2qt_norm, r.constraint_violation_max) for r in self.rows
        ]


def beta_qt_norm(traj: Trajectory, K: ConvexSet) -> float:
    """|| beta(u) ||_{L2(Q_T)} from stored snapshots, trapezoid in time."""
    sq = []
    for i in range(len(traj.snap_times)):
        u = traj.velocity_at_snap(i)
        sq.append(lp_norm(penalty(u, K), 2) ** 2)
    sq = np.array(sq)
    return float(np.sqrt(np.trapezoid(sq, traj.snap_times)))


def penalty_convergence_study(run_one, kappas) -> PenaltyStudyReport:
    """Sweep penalty strengths; run_one(kappa) must return (trajectory, K).

    Reports the L2(Q_T) norm of beta(u_kappa) per kappa, asserts monotone
    decrease across the sweep, and fits the empirical decay slope
    d log |beta| / d log kappa (the theory gives convergence without a rate).
    Kappa values run concurrently when RHEOFLOW_THREADS > 1.
    """
    import os
    from concurrent.futures import ThreadPoolExecutor

    kappas = sorted(float(k) for k in kappas)
    if len(kappas) < 3:
        raise ValueError("need at least 3 kappa values")

    def one(kappa):
        traj, K = run_one(kappa)
        norm = beta_qt_norm(traj, K)
        violations = [
            K.violation(traj.velocity_at_snap(i)) for i in range(len(traj.snap_times))
        ]
        return PenaltyStudyRow(
            kappa=kappa,
            beta_l2qt_norm=norm,
            constraint_violation_max=float(max(violations)),
            violation_final=float(violations[-1]),
        )

    threads = int(os.environ.get("RHEOFLOW_THREADS", "1") or "1")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, kappas))
    else:
        rows = [one(k) for k in kappas]
    norms = np.array([r.beta_l2qt_norm for r in rows])
    # strictly decreasing, except that a run of exact zeros may trail (the
    # constraint can go fully inactive once the penalty is strong enough)
    monotone = bool(
        all(
            b < a or (a == 0.0 and b == 0.0)
            for a, b in zip(norms[:-1], norms[1:])
        )
    )
    # exact zeros mean the constraint went inactive at the stored strides
    # (strong-penalty chatter); exclude them from the decay fit
    positive = norms > 0
    if np.count_nonzero(positive) >= 2:
        slope = float(
            np.polyfit(np.log(np.asarray(kappas)[positive]), np.log(norms[positive]), 1)[0]
        )
    else:
        slope = float("nan")
    return PenaltyStudyReport(rows=rows, monotone=monotone, decay_slope=slope)


@dataclass
class TranslationReport:
    h_values: np.ndarray
    integrals: np.ndarray
    alpha: float


def time_translation_diagnostic(traj: Trajectory, h_strides) -> TranslationReport:
    """Measure int_0^{T-h} | sqrt(rho(t+h)) (u(t+h) - u(t)) |_2^2 dt per shift h.

    h values are multiples of the snapshot stride.  Fits the exponent alpha in
    c h^alpha over the supplied shifts; smooth-in-time trajectories give
    alpha close to 2.
    """
    times = traj.snap_times
    n = len(times)
    us = [traj.velocity_at_snap(i).components for i in range(n)]
    rhos = [traj.rho_snaps[i].values for i in range(n)]
    cell = traj.grid.cell_volume

    h_values = []
    integrals = []
    for h in h_strides:
        h = int(h)
        if h < 1 or h >= n:
            raise ValueError(f"stride shift {h} outside stored range")
        vals = np.array(
            [
                float(np.sum(rhos[i + h][None] * (us[i + h] - us[i]) ** 2) * cell)
                for i in range(n - h)
            ]
        )
        h_values.append(times[h] - times[0])
        integrals.append(float(np.trapezoid(vals, times[: n - h])))
    h_values = np.array(h_values)
    integrals = np.array(integrals)
    positive = integrals > 1e-300
    if np.count_nonzero(positive) >= 2:
        alpha = float(
            np.polyfit(np.log(h_values[positive]), np.log(integrals[positive]), 1)[0]
        )
    else:
        alpha = float("nan")
    return TranslationReport(h_values=h_values, integrals=integrals, alpha=alpha)
