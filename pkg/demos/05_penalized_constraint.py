"""Variational-inequality machinery: penalty sweep against an L2 ball.

A steady force pushes the flow toward |u|_2 = 2 while the constraint set is
the ball of radius 0.5.  The penalty term -kappa beta(u) with beta = I - P_K
enforces the constraint up to a violation that scales like 1/kappa; the
L2(Q_T) norm of beta(u) decreases monotonically along the sweep.
"""

import numpy as np

from rheoflow import Grid, L2Ball, PowerLawParams, ScalarField, VectorField, build_basis, run_semi_galerkin
from rheoflow.constraints import penalty_convergence_study

grid = Grid(dim=2, n_points=64)
basis = build_basis(grid, m=8)
K = L2Ball(0.5)


def run_one(kappa):
    traj = run_semi_galerkin(
        basis,
        ScalarField.full(grid, 1.0),
        np.zeros(basis.m),
        PowerLawParams(1.0, 2.0),
        dt=2e-3,
        t_end=1.0,
        f=VectorField(grid, 2.0 * basis.fields[0]),
        constraint=K,
        kappa=kappa,
        stride=5,
    )
    return traj, K


report = penalty_convergence_study(run_one, [10.0, 100.0, 1000.0, 10000.0])
print(f"{'kappa':>10s} {'|beta|_L2(Q_T)':>16s} {'max violation':>15s}")
for row in report.rows:
    print(f"{row.kappa:10.0f} {row.beta_l2qt_norm:16.6e} {row.constraint_violation_max:15.6e}")
print(f"\nmonotone decrease: {report.monotone}")
print(f"empirical decay slope d log|beta| / d log kappa: {report.decay_slope:.2f}")
print("(the theory guarantees beta -> 0 with no rate; the slope is measured)")
