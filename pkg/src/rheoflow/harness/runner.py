"""Dispatch a validated configuration to the right driver and persist results.

Every run writes into its own output directory: diagnostics.csv (or the
iteration log for fixed-point drivers), a final checkpoint in the shared
binary format, and a copy of the resolved configuration.  Given the same
config and seed the outputs are bit-identical.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from ..fields import Grid, ScalarField, VectorField, load_checkpoint, save_checkpoint
from ..fixedpoint import (
    ITER_LOG_COLUMNS,
    ContractionLost,
    PeriodicProblem,
    PicardConfig,
    gks_frozen_solver,
    periodic_solve,
    picard_G,
    powerlaw_frozen_solver,
)
from ..galerkin import DIAG_COLUMNS, BlowupError, build_basis, run_semi_galerkin
from ..gks import GKS_DIAG_COLUMNS, GksMode, MixtureParams, run_gks
from ..rheology import PowerLawParams
from .config import SimulationConfig
from .scenarios import build_scenario

SCHEMA_VERSION = "rheoflow.diagnostics.v1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, columns, rows, schema: str = SCHEMA_VERSION) -> None:
    """CSV with a schema-stamped comment header and shortest exact float text."""
    with open(path, "w") as fh:
        fh.write(f"# schema={schema}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _diag_rows(diag: dict, columns):
    n = len(diag[columns[0]])
    return [[diag[c][i] for c in columns] for i in range(n)]


def write_penalty_study(report, path) -> None:
    """Persist a penalty sweep as CSV: kappa, beta_l2qt_norm, constraint_violation_max."""
    from ..constraints import STUDY_COLUMNS

    write_csv(path, STUDY_COLUMNS, report.as_csv_rows(), schema="rheoflow.penalty_study.v1")


def _power_params(config) -> PowerLawParams:
    return PowerLawParams(mu0=config["powerlaw.mu0"], p=config["powerlaw.p"])


def _mixture_params(config) -> MixtureParams:
    return MixtureParams(
        rho10=config["mixture.rho10"],
        rho20=config["mixture.rho20"],
        lam=config["mixture.lambda"],
        mobility=config["mixture.mobility"],
        mu=config["mixture.mu"],
        m_shift=config["mixture.m_shift"],
    )


def _initial_state(config, grid, basis):
    ckpt = config["scenario.checkpoint"]
    if ckpt:
        ck_grid, fields = load_checkpoint(ckpt)
        if (ck_grid.dim, ck_grid.n_points) != (grid.dim, grid.n_points):
            raise ValueError("checkpoint grid does not match the configured grid")
        rho0 = ScalarField(grid, fields["rho"])
        comps = np.stack([fields[f"u_{ax}"] for ax in "xyz"[: grid.dim]])
        u0 = VectorField(grid, comps)
        return {"rho0": rho0, "u0": u0, "forcing": None, "constraint": None, "kappa": 0.0}
    return build_scenario(config["scenario.preset"], grid, basis, config)


def run(config: SimulationConfig, out_dir=None, seed: int | None = None) -> int:
    """Execute the configured run; returns a process exit code."""
    out = Path(out_dir if out_dir is not None else config["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    if seed is not None:
        config.values["scenario"]["seed"] = int(seed)
    (out / "config.ini").write_text(config.dump())

    grid = Grid(
        dim=config["grid.dim"],
        n_points=config["grid.n_points"],
        length=config["grid.length"],
    )
    model = config.model
    try:
        if config.driver == "direct":
            if model in ("powerlaw", "newtonian"):
                _run_direct_powerlaw(config, grid, out)
            else:
                _run_direct_gks(config, grid, out)
        elif config.driver == "periodic":
            _run_periodic(config, grid, out)
        else:
            _run_picard(config, grid, out)
    except (BlowupError, ContractionLost, RuntimeError, ValueError) as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _run_direct_powerlaw(config, grid, out: Path) -> None:
    basis = build_basis(grid, m=config["galerkin.modes"])
    scenario = _initial_state(config, grid, basis)
    params = _power_params(config)
    u0 = scenario["u0"]
    if isinstance(u0, VectorField):
        u0 = basis.project(u0)
    traj = run_semi_galerkin(
        basis,
        scenario["rho0"],
        u0,
        params,
        dt=config["driver.dt"],
        t_end=config["driver.t_end"],
        f=scenario["forcing"],
        scheme=config["galerkin.scheme"],
        splitting=config["galerkin.splitting"],
        constraint=scenario["constraint"],
        kappa=scenario["kappa"],
        stride=config["output.stride"],
    )
    write_csv(out / "diagnostics.csv", DIAG_COLUMNS, _diag_rows(traj.diag, DIAG_COLUMNS))
    u_final = traj.basis.reconstruct(traj.coeffs[-1])
    save_checkpoint(out / "final.nnf", grid, {"rho": traj.rho_snaps[-1], "u": u_final})


def _run_direct_gks(config, grid, out: Path) -> None:
    scenario = _initial_state(config, grid, None)
    params = _mixture_params(config)
    mode = {"graffi": GksMode.GRAFFI, "fullgks": GksMode.FULL, "ks": GksMode.KS}[config.model]
    u0 = scenario["u0"]
    if not isinstance(u0, VectorField):
        u0 = VectorField.zero(grid)
    traj = run_gks(
        scenario["rho0"],
        u0,
        params,
        dt=config["driver.dt"],
        t_end=config["driver.t_end"],
        f=scenario["forcing"],
        mode=mode,
        stride=config["output.stride"],
    )
    write_csv(
        out / "diagnostics.csv", GKS_DIAG_COLUMNS, _diag_rows(traj.diag, GKS_DIAG_COLUMNS)
    )
    save_checkpoint(
        out / "final.nnf", grid, {"rho": traj.rho_snaps[-1], "u": traj.u_snaps[-1]}
    )


def _run_periodic(config, grid, out: Path) -> None:
    basis = build_basis(grid, m=config["galerkin.modes"])
    scenario = _initial_state(config, grid, basis)
    params = _power_params(config)
    problem = PeriodicProblem(
        period=config["driver.period"],
        forcing=scenario["forcing"],
        alpha=0.8,
        beta=1.2,
        reg_eps=config["diffusion.reg_eps"],
    )
    result = periodic_solve(
        problem,
        basis,
        params,
        dt=config["driver.dt"],
        rho_init=scenario["rho0"],
        max_iters=config["driver.max_iters"],
        tol=config["driver.tol"],
    )
    write_csv(out / "iterations.csv", ITER_LOG_COLUMNS, result.log_rows())
    save_checkpoint(
        out / "final.nnf", grid, {"rho": result.rho0, "u": result.state0.velocity()}
    )
    if not result.converged:
        raise RuntimeError("periodic iteration did not converge within max_iters")


def _run_picard(config, grid, out: Path) -> None:
    basis = build_basis(grid, m=config["galerkin.modes"])
    scenario = _initial_state(config, grid, basis)
    forcing = scenario["forcing"]
    if config.model in ("powerlaw", "newtonian"):
        solver = powerlaw_frozen_solver(scenario["rho0"], forcing, _power_params(config))
    else:
        solver = gks_frozen_solver(scenario["rho0"], forcing, _mixture_params(config))
    pconf = PicardConfig(
        ball_radius=config["driver.ball_radius"],
        horizon=config["driver.horizon"],
        max_iters=config["driver.max_iters"],
        tol=config["driver.tol"],
    )
    result = picard_G(pconf, solver, dt=config["driver.dt"], grid=grid)
    write_csv(out / "iterations.csv", ITER_LOG_COLUMNS, result.log_rows())
    save_checkpoint(
        out / "final.nnf", grid, {"rho": result.rho_traj[-1], "u": result.u_traj[-1]}
    )
    if not result.converged:
        raise RuntimeError("Picard iteration did not converge within max_iters")
