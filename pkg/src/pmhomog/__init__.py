"""Stochastic homogenization of porous-medium type equations.

Media (:mod:`.medium`), pointwise and effective fluxes (:mod:`.flux`,
:mod:`.effective`), an implicit finite-volume solver (:mod:`.solver`),
kinetic diagnostics (:mod:`.kinetic`) and epsilon sweeps (:mod:`.experiment`).
"""

from .effective import EffectiveFlux, check_fbar_properties, default_p_grid, effective_f, effective_g
from .errors import ConfigError, ExperimentError, NumericalError, PMHError, PropertyCheckFailure, SolverError
from .experiment import ConvergenceReport, HomogenizationConfig, corrector_field, l1_error, run_homogenization, two_scale_pairing
from .flux import CAP, CoefficientTriple, dg_dp, f_eval, g_eval
from .kinetic import (
    Bump,
    KineticDefect,
    SpaceTimeTest,
    check_defect_bound,
    chi_minus,
    chi_plus,
    defect_histogram,
    entropy_identity_gap,
    eta_bound,
    kinetic_residual,
    layer_cake_reconstruct,
)
from .medium import MediumRealization, MediumSpec, ensemble_mean, evaluate, sample_realization, shift, spatial_mean
from .profiles import Profile
from .solver import (
    CoefficientField,
    Field,
    Grid1D,
    SolverConfig,
    Trajectory,
    assemble_coefficients,
    solve,
    solve_homogenized,
    step_implicit,
    well_prepared_initial,
)

__version__ = "0.1.0"
