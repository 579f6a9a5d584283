"""Graffi-Kazhikhov-Smagulov mixture: stiff diffusion, energy decay, algebra.

The density obeys a fourth-order advection-diffusion law whose stiff linear
part is integrated exactly per Fourier mode, so the mean is conserved to
machine precision; the Graffi momentum variant dissipates the shifted kinetic
energy monotonically.  The appendix algebra ties the divergence-free
mean-volume velocity to the mean-mass velocity and the concentration fields.
"""

import numpy as np

from rheoflow import (
    GksMode,
    Grid,
    MixtureParams,
    ScalarField,
    concentration_maps,
    korteweg_force,
    korteweg_force_expanded,
    mass_to_volume_velocity,
    run_gks,
    theta,
)
from rheoflow.fields import divergence, random_scalar_field, sup_norm
from rheoflow.harness.scenarios import gaussian_blob, taylor_green_velocity

grid = Grid(dim=2, n_points=64)
params = MixtureParams(rho10=2.0, rho20=1.0, lam=0.05, mobility=0.02, mu=1.0)

print("-- mixing blob under the Graffi model, f = 0 --")
center = (grid.length / 2 + 0.5, grid.length / 2)
rho0 = gaussian_blob(grid, center, sigma=0.6, base=1.0, height=0.3)
traj = run_gks(rho0, taylor_green_velocity(grid, 0.4), params, dt=1e-3, t_end=0.25,
               mode=GksMode.GRAFFI)
E = traj.diag["energy"]
print(f"energy {E[0]:.5f} -> {E[-1]:.5f}; largest per-step increase {np.max(np.diff(E)):.2e}")
print(f"mean density drift: {np.max(np.abs(traj.diag['mean_rho'] - traj.diag['mean_rho'][0])):.2e}")
print(f"min shifted density along the run: {np.min(traj.diag['rho_bar_min']):.4f}")

print("\n-- capillary force: conservative vs expanded form --")
rho = random_scalar_field(grid, seed=5, kmax=3, amplitude=0.2, mean=1.5)
th = theta(rho, 0.05)
rb = ScalarField(grid, rho.values + 0.1)
a = korteweg_force(th, rb, lam=0.4).components
b = korteweg_force_expanded(th, rb, lam=0.4).components
print(f"form identity defect: {np.max(np.abs(a - b)) / np.max(np.abs(a)):.2e}")

print("\n-- mixture algebra --")
v = taylor_green_velocity(grid, 0.5)
w = mass_to_volume_velocity(v, rho, MixtureParams(rho10=2.0, rho20=1.0, lam=0.4, mobility=0.15))
print(f"div v (volume velocity):   {sup_norm(divergence(v)):.2e}")
print(f"div w (mass velocity):     {sup_norm(divergence(w)):.2e}  (generally nonzero)")
c, alpha, fick_lhs, fick_rhs = concentration_maps(rho, params)
print(f"concentration range: c in [{c.values.min():.3f}, {c.values.max():.3f}], "
      f"alpha in [{alpha.values.min():.3f}, {alpha.values.max():.3f}]")
err = np.max(np.abs(fick_lhs.components - fick_rhs.components)) / np.max(np.abs(fick_rhs.components))
print(f"Fick identity grad(c)/c residual: {err:.2e}")
