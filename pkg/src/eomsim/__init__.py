"""Simulation engine for a driven optical-cavity / membrane / LC-circuit system.

Mean-field dynamics, multistable steady states, linearized-fluctuation
covariance matrices, and the derived quantum observables: bipartite
logarithmic negativities, effective phonon number and mechanical
quadrature squeezing.
"""

from .params import (
    ConfigError, PhysicalConfig, DerivedRates,
    thermal_occupation, drive_amplitude, derive_couplings,
    load_config, loads_config, dumps_config,
)
from .meanfield import (
    MeanFieldError, MeanFieldState, MeanFieldTrajectory, AdiabaticTrajectory,
    SteadyBranch, default_initial_state,
    integrate_full, integrate_adiabatic, steady_states, multistability_scan,
)
from .fluct import (
    FluctError, DriftMatrix, DiffusionMatrix, CovarianceMatrix,
    build_drift, build_diffusion, is_stable_eigen, routh_hurwitz,
    solve_lyapunov, symplectic_form, physicality_defect,
)
from .gaussian import (
    BipartiteCM, ObservableRecord,
    reduce_bipartition, log_negativity, effective_phonon,
    squeezing_db, equipartition_gap,
)
from .sweep import (
    SweepSpec, run_sweep, evaluate_point, critical_temperature,
)

__version__ = "0.1.0"
