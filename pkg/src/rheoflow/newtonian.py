"""Independent constant-viscosity reference stepper.

Deliberately self-contained: the tendency is written out directly against the
FFT rather than through the rheology/galerkin machinery, so it can serve as an
independent cross-check for the p = 2 and lambda -> 0 reductions.
"""

from __future__ import annotations

import numpy as np

from .fields import Grid, VectorField


def newtonian_tendency(comps: np.ndarray, grid: Grid, nu: float, f_comps=None) -> np.ndarray:
    """P[nu lap(u) - (u.grad)u + f] for constant kinematic viscosity nu."""
    dim = grid.dim
    hats = [np.fft.fftn(c) for c in comps]
    ks = grid.wavenumbers
    mask = grid.dealias_mask

    tend = np.empty_like(comps)
    for i in range(dim):
        conv = np.zeros(grid.shape)
        for j in range(dim):
            du_ij = np.fft.ifftn(1j * ks[j] * hats[i]).real
            conv += comps[j] * du_ij
        conv = np.fft.ifftn(mask * np.fft.fftn(conv)).real
        visc = np.fft.ifftn(-grid.k_squared * hats[i]).real
        tend[i] = nu * visc - conv
        if f_comps is not None:
            tend[i] += f_comps[i]

    # Leray projection of the tendency
    t_hats = [np.fft.fftn(t) for t in tend]
    kdot = sum(k * h for k, h in zip(ks, t_hats))
    scale = kdot / grid.k_squared_safe
    out = np.empty_like(tend)
    for i in range(dim):
        out[i] = np.fft.ifftn(t_hats[i] - ks[i] * scale).real
    return out


def reference_newtonian_step(u: VectorField, nu: float, dt: float, f: VectorField | None = None) -> VectorField:
    """One RK4 step of the incompressible constant-viscosity equations."""
    grid = u.grid
    fc = f.components if f is not None else None

    def rhs(c):
        return newtonian_tendency(c, grid, nu, fc)

    c0 = u.components
    k1 = rhs(c0)
    k2 = rhs(c0 + 0.5 * dt * k1)
    k3 = rhs(c0 + 0.5 * dt * k2)
    k4 = rhs(c0 + dt * k3)
    return VectorField(grid, c0 + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0)
