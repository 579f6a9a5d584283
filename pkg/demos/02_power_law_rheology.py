"""The power-law constitutive law and its structure conditions.

The stress is T = nu_eff(|D|^2) D with nu_eff(s) = mu0 (1+s)^((p-2)/2):
shear-thinning below p = 2, Newtonian at p = 2, shear-thickening above.
The momentum force carries the classical factor two, div(2 nu_eff D), so the
p = 2 case is plain mu0-viscous flow.  Monotonicity, coercivity and growth of
the stress map are checked on random symmetric matrices; the quasi-linear
coefficient expansion of the divergence is cross-checked against the direct
spectral evaluation.
"""

import numpy as np

from rheoflow import (
    Grid,
    PowerLawParams,
    effective_viscosity,
    random_vector_field,
    stress_divergence_coeff,
    stress_divergence_direct,
)
from rheoflow.rheology import check_structure_conditions

print("effective viscosity vs squared shear rate")
s = np.array([0.0, 0.5, 1.0, 2.0, 4.0, 8.0])
for p in (1.5, 2.0, 3.0):
    nu = effective_viscosity(s, PowerLawParams(mu0=1.0, p=p))
    kind = "thinning" if p < 2 else ("newtonian" if p == 2 else "thickening")
    print(f"  p={p:3.1f} ({kind:10s}): " + "  ".join(f"{v:6.3f}" for v in nu))

print("\nstructure conditions on 1000 random symmetric pairs per index")
for p in (1.2, 1.5, 2.0, 2.5, 4.0):
    rep = check_structure_conditions(PowerLawParams(1.0, p), dim=3, n_samples=1000, seed=int(10 * p))
    print(
        f"  p={p:3.1f}: min gap {rep['min_monotonicity_gap']:9.3e}  "
        f"coercive {rep['coercive']}  growth ok {rep['growth_ok']}"
    )

print("\ncoefficient-form identity (eq-of-divergence cross-check)")
grid = Grid(dim=2, n_points=64)
for p in (1.5, 3.0):
    params = PowerLawParams(1.0, p)
    worst = 0.0
    for t in range(5):
        u = random_vector_field(grid, seed=300 + t, kmax=3, amplitude=0.15, solenoidal=True)
        d = stress_divergence_direct(u, params).components
        c = stress_divergence_coeff(u, params).components
        worst = max(worst, np.max(np.abs(d - c)) / np.max(np.abs(d)))
    print(f"  p={p}: max relative difference {worst:.2e}")
