"""rheoflow: a spectral laboratory for density-dependent power-law flow and
Kazhikhov-Smagulov mixtures on the periodic torus.

Submodules
----------
fields       grids, spectral operators, norms, interpolation, checkpoints
rheology     power-law stress, divergence forms, structure conditions
transport    characteristics, regularized continuity, stiff mixture diffusion
galerkin     divergence-free Fourier basis, Gram matrix, semi-Galerkin driver
constraints  convex sets, penalty operator, penalty & translation studies
fixedpoint   periodic fixed point and Picard well-posedness drivers
gks          Graffi / full mixture momentum, Korteweg force, mixture algebra
newtonian    independent constant-viscosity reference stepper
harness      configuration, scenario presets, run orchestration, check suites
"""

from .fields import (
    Grid,
    ScalarField,
    SymTensorField,
    VectorField,
    bilaplacian,
    dealias,
    divergence,
    gradient,
    interpolate,
    l2_inner,
    laplacian,
    leray_project,
    load_checkpoint,
    lp_norm,
    pressure_recover,
    random_scalar_field,
    random_vector_field,
    save_checkpoint,
    sup_norm,
    to_physical,
    to_spectral,
)
from .rheology import (
    PowerLawParams,
    deformation_tensor,
    dissipation,
    effective_viscosity,
    korn_norm,
    monotonicity_gap,
    stress_divergence_coeff,
    stress_divergence_direct,
    stress_tensor,
)
from .transport import (
    DensityBounds,
    DiffusionParams,
    advect_step,
    density_invariants,
    diffusion_estimate_ladder,
    kss_diffusion_step,
    regularized_continuity_step,
)
from .galerkin import (
    BasisSet,
    BlowupError,
    GalerkinState,
    Trajectory,
    assemble_rhs,
    build_basis,
    energy_report,
    gram_matrix,
    momentum_step,
    run_semi_galerkin,
)
from .constraints import (
    L2Ball,
    PointwiseBall,
    penalized_momentum_step,
    penalty,
    penalty_convergence_study,
    project,
    time_translation_diagnostic,
)
from .fixedpoint import (
    PeriodicProblem,
    PicardConfig,
    gks_frozen_solver,
    map_S,
    periodic_solve,
    picard_G,
    powerlaw_frozen_solver,
    replay_periodic,
)
from .gks import (
    GksMode,
    MixtureParams,
    chemical_potential,
    concentration_maps,
    full_momentum_step,
    graffi_momentum_step,
    korteweg_force,
    korteweg_force_expanded,
    mass_to_volume_velocity,
    run_gks,
    theta,
    volume_velocity_from_mass,
)
from .newtonian import reference_newtonian_step

__version__ = "0.1.0"
