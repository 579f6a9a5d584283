"""Semi-Galerkin benchmark: Taylor-Green decay and the energy inequality.

With p = 2 and unit density the coupled solver reduces to spectral
Navier-Stokes and the Taylor-Green vortex decays as exp(-2 mu0 t) mode by
mode.  With a genuinely variable density the weighted energy
E = |sqrt(rho) u|_2^2 obeys  E(t) + int 2*dissipation = E(0) + work  up to a
first-order splitting defect that the diagnostics track per step.
"""

import numpy as np

from rheoflow import Grid, PowerLawParams, ScalarField, build_basis, energy_report, run_semi_galerkin
from rheoflow.harness.scenarios import taylor_green_velocity

grid = Grid(dim=2, n_points=64)
basis = build_basis(grid, m=12)

print("-- Taylor-Green, p = 2, rho = 1 --")
params = PowerLawParams(mu0=1.0, p=2.0)
c0 = basis.project(taylor_green_velocity(grid))
traj = run_semi_galerkin(basis, ScalarField.full(grid, 1.0), c0, params, dt=1e-3, t_end=0.1)
expect = c0[None, :] * np.exp(-2.0 * traj.times)[:, None]
print(f"coefficient error vs exp(-2 mu0 t): {np.max(np.abs(traj.coeffs - expect)):.2e}")

print("\n-- variable density, shear-thickening p = 2.5, f = 0 --")
rho0 = ScalarField(grid, 1.0 + 0.5 * np.sin(grid.mesh[0]))
c0 = np.zeros(basis.m)
c0[0] = 0.5
traj = run_semi_galerkin(basis, rho0, c0, PowerLawParams(1.0, 2.5), dt=1e-3, t_end=0.5, scheme="imex")
rep = energy_report(traj)
print(f"energy E(0) = {rep.energy[0]:.6f} -> E(t_end) = {rep.energy[-1]:.6f}")
print(f"largest per-step energy increase:   {rep.max_step_increase:.2e}  (must be <= 1e-9 E0)")
print(f"final energy-identity defect:       {rep.final_defect:.2e}")
print(f"density mass drift:                 "
      f"{np.max(np.abs(traj.diag['mass'] - traj.diag['mass'][0])) / traj.diag['mass'][0]:.2e}")
