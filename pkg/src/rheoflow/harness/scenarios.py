"""Named initial states and forcings for the run harness and the demos.

Every preset is deterministic given the config seed; random fields come from
the counter-based generator in rheoflow.fields.
"""

from __future__ import annotations

import numpy as np

from ..constraints import L2Ball, PointwiseBall
from ..fields import Grid, ScalarField, VectorField, leray_project
from ..galerkin import BasisSet


def taylor_green_velocity(grid: Grid, scale: float = 1.0) -> VectorField:
    if grid.dim == 2:
        return VectorField.from_functions(
            grid,
            [
                lambda x, y: scale * np.sin(x) * np.cos(y),
                lambda x, y: -scale * np.cos(x) * np.sin(y),
            ],
        )
    return VectorField.from_functions(
        grid,
        [
            lambda x, y, z: scale * np.sin(x) * np.cos(y) * np.cos(z),
            lambda x, y, z: -scale * np.cos(x) * np.sin(y) * np.cos(z),
            lambda x, y, z: np.zeros_like(z),
        ],
    )


def shear_layer_state(grid: Grid, width: float = 0.3, perturb: float = 0.05):
    """Double shear layer with a density stripe riding on it."""
    X, Y = grid.mesh[0], grid.mesh[1]
    band = np.where(
        Y <= np.pi,
        np.tanh((Y - np.pi / 2.0) / width),
        np.tanh((3.0 * np.pi / 2.0 - Y) / width),
    )
    comps = np.zeros((grid.dim,) + grid.shape)
    comps[0] = band
    comps[1] = perturb * np.sin(X)
    u0 = leray_project(VectorField(grid, comps))
    rho0 = ScalarField(grid, 1.0 + 0.25 * band)
    return rho0, u0


def gaussian_blob(grid: Grid, center, sigma: float, base: float = 1.0, height: float = 0.3):
    """Node-centered Gaussian bump (peak snapped onto the grid)."""
    snapped = [grid.axis[np.argmin(np.abs(grid.axis - c))] for c in center]
    r_sq = sum((m - c) ** 2 for m, c in zip(grid.mesh, snapped))
    return ScalarField(grid, base + height * np.exp(-0.5 * r_sq / sigma**2))


def rotating_flow(grid: Grid, omega: float, r_rigid: float, r_zero: float) -> VectorField:
    """Solid-body rotation inside r_rigid with a smooth taper to rest by r_zero.

    Radial angular-velocity profiles are divergence-free; the taper keeps the
    field supported away from the periodic seam.
    """
    center = grid.length / 2.0
    dx = grid.mesh[0] - center
    dy = grid.mesh[1] - center
    r = np.hypot(dx, dy)
    t = np.clip((r - r_rigid) / (r_zero - r_rigid), 0.0, 1.0)
    om = omega * (1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2))
    comps = np.zeros((grid.dim,) + grid.shape)
    comps[0] = -om * dy
    comps[1] = om * dx
    return VectorField(grid, comps)


def build_scenario(name: str, grid: Grid, basis: BasisSet | None, config) -> dict:
    """Initial state + forcing + constraint for a named preset.

    Returns a dict with keys rho0, u0 (VectorField or coefficient vector),
    forcing (None | VectorField | callable), constraint, kappa.
    """
    amp = config["scenario.amplitude"]
    out = {"constraint": None, "kappa": 0.0, "forcing": None}

    if name == "taylor-green":
        out["rho0"] = ScalarField.full(grid, 1.0)
        out["u0"] = taylor_green_velocity(grid)
    elif name == "shear-layer":
        rho0, u0 = shear_layer_state(grid)
        out["rho0"], out["u0"] = rho0, u0
    elif name == "mixing-blob":
        center = (grid.length / 2.0 + 0.5, grid.length / 2.0)
        out["rho0"] = gaussian_blob(grid, center, sigma=0.6)
        out["u0"] = taylor_green_velocity(grid, scale=0.3)
    elif name == "vi-ball":
        if basis is None:
            raise ValueError("vi-ball needs a Galerkin basis")
        out["rho0"] = ScalarField.full(grid, 1.0)
        out["u0"] = np.zeros(basis.m)
        out["forcing"] = VectorField(grid, 2.0 * basis.fields[0])
        ctype = config["constraint.type"] or "l2ball"
        if ctype == "l2ball":
            out["constraint"] = L2Ball(config["constraint.radius"])
        else:
            out["constraint"] = PointwiseBall(config["constraint.bound"])
        out["kappa"] = config["constraint.kappa"]
    elif name == "periodic-forcing":
        if basis is None:
            raise ValueError("periodic-forcing needs a Galerkin basis")
        period = config["driver.period"]
        mode = basis.fields[0]

        def forcing(t):
            return VectorField(grid, amp * np.sin(2.0 * np.pi * t / period) * mode)

        out["rho0"] = ScalarField(grid, 1.0 + 0.1 * np.sin(grid.mesh[0]))
        out["u0"] = np.zeros(basis.m)
        out["forcing"] = forcing
    else:
        raise ValueError(f"unknown preset {name!r}")
    return out
