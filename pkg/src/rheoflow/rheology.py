"""Power-law constitutive law, stress divergence forms, structure conditions.

Conventions
-----------
The effective viscosity is nu_eff(s) = mu0 * (1 + s)^((p-2)/2) with s the
squared Frobenius norm of the deformation tensor D.  The pointwise stress
returned by stress_tensor is T = nu_eff(|D|^2) D; that is the object the
monotonicity / coercivity / growth checks apply to.

The force density entering the momentum balance carries the classical factor
two: both divergence evaluations compute div(2 nu_eff(|D|^2) D), so that p = 2
reduces exactly to the constant-viscosity force mu0 * lap(u) on divergence-free
fields, and `dissipation` is the matching power 2 * int nu_eff |D|^2 dx, so the
energy identity d/dt |sqrt(rho) u|^2 + 2*dissipation = 2*(rho f, u) closes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fields import (
    SYM_INDEX,
    Grid,
    SymTensorField,
    VectorField,
    _dealias_arr,
)


@dataclass(frozen=True)
class PowerLawParams:
    """Viscosity scale mu0 > 0 and power-law index p > 1."""

    mu0: float
    p: float

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError(f"mu0 must be positive, got {self.mu0}")
        if not self.p > 1:
            raise ValueError(f"power-law index must satisfy p > 1, got {self.p}")

    def weak_existence_ok(self, dim: int) -> bool:
        """Index large enough for the weak-existence threshold p >= 1 + 2n/(n+1)."""
        return self.p >= 1.0 + 2.0 * dim / (dim + 1.0)

    @property
    def convective_ok(self) -> bool:
        """Index large enough to control the convective term, p >= 11/5."""
        return self.p >= 11.0 / 5.0

    def warn_if_subcritical(self, dim: int) -> None:
        if not self.weak_existence_ok(dim):
            warnings.warn(
                f"p = {self.p} is below the weak-existence threshold "
                f"{1 + 2 * dim / (dim + 1):.4g} in dimension {dim}",
                stacklevel=2,
            )
        elif not self.convective_ok:
            warnings.warn(
                f"p = {self.p} is below the convective threshold 11/5", stacklevel=2
            )


def effective_viscosity(s, params: PowerLawParams):
    """nu_eff(s) = mu0 (1+s)^((p-2)/2); shear-thinning for p < 2, thickening for p > 2."""
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("squared shear rate must be nonnegative")
    out = params.mu0 * (1.0 + s) ** ((params.p - 2.0) / 2.0)
    return float(out) if out.ndim == 0 else out


def viscosity_derivative(s, params: PowerLawParams):
    """d nu_eff / ds."""
    s = np.asarray(s, dtype=np.float64)
    out = params.mu0 * ((params.p - 2.0) / 2.0) * (1.0 + s) ** ((params.p - 4.0) / 2.0)
    return float(out) if out.ndim == 0 else out


def deformation_tensor(u: VectorField) -> SymTensorField:
    """Symmetric part of the velocity gradient, d_ij = (du_i/dx_j + du_j/dx_i)/2."""
    grid = u.grid
    hats = [np.fft.fftn(c) for c in u.components]
    comps = []
    for i, j in SYM_INDEX[grid.dim]:
        dij = 0.5 * (
            np.fft.ifftn(1j * grid.wavenumbers[j] * hats[i]).real
            + np.fft.ifftn(1j * grid.wavenumbers[i] * hats[j]).real
        )
        comps.append(dij)
    return SymTensorField(grid, np.stack(comps))


def stress_tensor(D: SymTensorField, params: PowerLawParams) -> SymTensorField:
    """Pointwise stress T = nu_eff(|D|^2) D."""
    nu = effective_viscosity(D.frobenius_sq(), params)
    return SymTensorField(D.grid, D.components * nu[None])


def _sym_divergence(comps: np.ndarray, grid: Grid) -> np.ndarray:
    """Row divergence of a symmetric tensor given in upper-triangle storage."""
    out = np.zeros((grid.dim,) + grid.shape)
    for comp, (i, j) in zip(comps, SYM_INDEX[grid.dim]):
        hat = np.fft.fftn(comp)
        out[i] += np.fft.ifftn(1j * grid.wavenumbers[j] * hat).real
        if i != j:
            out[j] += np.fft.ifftn(1j * grid.wavenumbers[i] * hat).real
    return out


def stress_divergence_direct(
    u: VectorField, params: PowerLawParams, apply_dealias: bool = False
) -> VectorField:
    """Force density div(2 nu_eff(|D|^2) D(u)) by spectral product differentiation."""
    grid = u.grid
    D = deformation_tensor(u)
    nu = effective_viscosity(D.frobenius_sq(), params)
    T = 2.0 * nu[None] * D.components
    if apply_dealias:
        T = np.stack([_dealias_arr(c, grid) for c in T])
    return VectorField(grid, _sym_divergence(T, grid))


def stress_coefficient_apply(
    v: VectorField, u: VectorField, params: PowerLawParams
) -> VectorField:
    """Apply the quasi-linear operator with coefficients frozen at v to u:

        out_i = sum_jkl t_ij^kl(v) d2 u_j / dx_k dx_l,
        t_ij^kl = nu(|D(v)|^2) delta_kl delta_ij + 4 nu'(|D(v)|^2) d_ik(v) d_jl(v).

    With u = v this is the coefficient-form stress divergence; with v fixed it
    is the frozen-coefficient linearization used by the Picard driver.
    """
    grid = u.grid
    dim = grid.dim
    D = deformation_tensor(v)
    s = D.frobenius_sq()
    nu = effective_viscosity(s, params)
    nup = viscosity_derivative(s, params)

    hats = [np.fft.fftn(c) for c in u.components]
    ks = grid.wavenumbers
    second = {}  # (j, k, l) with k <= l -> d^2 u_j / dx_k dx_l
    for j in range(dim):
        for k in range(dim):
            for l in range(k, dim):
                second[(j, k, l)] = np.fft.ifftn(-ks[k] * ks[l] * hats[j]).real

    def d2(j, k, l):
        return second[(j, min(k, l), max(k, l))]

    out = np.empty((dim,) + grid.shape)
    for i in range(dim):
        acc = nu * sum(d2(i, k, k) for k in range(dim))
        coupling = np.zeros(grid.shape)
        for j in range(dim):
            for k in range(dim):
                d_ik = D.entry(i, k)
                for l in range(dim):
                    coupling += d_ik * D.entry(j, l) * d2(j, k, l)
        out[i] = acc + 4.0 * nup * coupling
    return VectorField(grid, out)


def stress_divergence_coeff(u: VectorField, params: PowerLawParams) -> VectorField:
    """Force density via the coefficient expansion
    div(2 nu D)_i = nu(|D|^2) lap(u_i) + 4 nu'(|D|^2) sum_jkl d_ik d_jl d2u_j/dxk dxl."""
    return stress_coefficient_apply(u, u, params)


def dissipation(u: VectorField, params: PowerLawParams) -> float:
    """Dissipated power int 2 nu_eff(|D|^2) |D|^2 dx (= mu0 |grad u|_2^2 at p = 2)."""
    D = deformation_tensor(u)
    s = D.frobenius_sq()
    return float(np.sum(2.0 * effective_viscosity(s, params) * s) * u.grid.cell_volume)


def korn_norm(u: VectorField, p: float) -> float:
    """(int |D(u)|^p dx)^(1/p), the gradient-equivalent dissipation norm."""
    if p < 1:
        raise ValueError("p must be >= 1")
    s = deformation_tensor(u).frobenius_sq()
    return float((np.sum(s ** (p / 2.0)) * u.grid.cell_volume) ** (1.0 / p))


def monotonicity_gap(D1: SymTensorField, D2: SymTensorField, params: PowerLawParams) -> float:
    """Pointwise minimum of (T(D1) - T(D2)) : (D1 - D2); > 0 wherever D1 != D2."""
    T1 = stress_tensor(D1, params)
    T2 = stress_tensor(D2, params)
    gap = np.zeros(D1.grid.shape)
    for c1, c2, e1, e2, (i, j) in zip(
        T1.components, T2.components, D1.components, D2.components, SYM_INDEX[D1.grid.dim]
    ):
        w = 1.0 if i == j else 2.0
        gap += w * (c1 - c2) * (e1 - e2)
    return float(np.min(gap))


# ---------------------------------------------------------------------------
# Matrix-level helpers for the structure-condition suite
# ---------------------------------------------------------------------------


def stress_matrix(A: np.ndarray, params: PowerLawParams) -> np.ndarray:
    """T(A) = nu_eff(|A|_F^2) A for a single symmetric matrix."""
    s = float(np.sum(A * A))
    return effective_viscosity(s, params) * A


def matrix_gap(A: np.ndarray, B: np.ndarray, params: PowerLawParams) -> float:
    """(T(A) - T(B)) : (A - B) for symmetric matrices."""
    return float(np.sum((stress_matrix(A, params) - stress_matrix(B, params)) * (A - B)))


def growth_bound_constants(params: PowerLawParams) -> tuple[float, float]:
    """Explicit (g, c) with |T(A)| <= g + c |A|^(p-1) for p >= 2.

    Uses (1+s)^q <= 2^q (1 + s^q) and |A| <= 1 + |A|^(p-1).
    """
    if params.p < 2:
        raise ValueError("explicit growth constants are stated for p >= 2")
    scale = params.mu0 * 2.0 ** ((params.p - 2.0) / 2.0)
    return scale, 2.0 * scale


def check_structure_conditions(
    params: PowerLawParams,
    dim: int = 3,
    n_samples: int = 1000,
    seed: int = 0,
    stress_fn=None,
) -> dict:
    """Randomized verification of continuity surrogate, growth, coercivity and
    strict monotonicity for the power-law stress on symmetric matrix pairs.

    stress_fn may override the stress map (used by the mutation smoke test).
    Returns a report dict with the worst margins observed.
    """
    from .fields import counter_uniform

    stress = stress_fn or (lambda A: stress_matrix(A, params))
    n_entries = dim * dim
    raw = counter_uniform(seed, 0, 2 * n_samples * n_entries) * 6.0 - 3.0
    raw = raw.reshape(2 * n_samples, dim, dim)
    mats = 0.5 * (raw + np.transpose(raw, (0, 2, 1)))

    min_gap = np.inf
    min_coercivity = np.inf
    worst_growth_margin = np.inf
    for k in range(n_samples):
        A, B = mats[2 * k], mats[2 * k + 1]
        gap = float(np.sum((stress(A) - stress(B)) * (A - B)))
        min_gap = min(min_gap, gap)

        normA = float(np.sqrt(np.sum(A * A)))
        TA = stress(A)
        if normA > 0:
            coer = float(np.sum(TA * A)) / (
                params.mu0 * min(1.0, (1.0 + normA**2) ** ((params.p - 2.0) / 2.0)) * normA**2
            )
            min_coercivity = min(min_coercivity, coer)
        if params.p >= 2:
            g, c = growth_bound_constants(params)
            bound = g + c * normA ** (params.p - 1.0)
        else:
            bound = params.mu0 * min(normA, normA ** (params.p - 1.0)) if normA > 0 else 0.0
        worst_growth_margin = min(
            worst_growth_margin, bound - float(np.sqrt(np.sum(TA * TA)))
        )

    return {
        "p": params.p,
        "n_samples": n_samples,
        "min_monotonicity_gap": min_gap,
        "min_coercivity_ratio": min_coercivity,
        "min_growth_margin": worst_growth_margin,
        "monotone": min_gap > 0,
        "coercive": min_coercivity >= 1.0 - 1e-12,
        "growth_ok": worst_growth_margin >= -1e-12,
    }
