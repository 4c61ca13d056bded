"""Cooperative emission of N two-level atoms in the permutation-invariant sector."""

from .analytic import (
    TwoAtomState,
    meanfield_delay_estimate,
    meanfield_delay_ratio,
    meanfield_height,
    meanfield_intensity,
    meanfield_trajectory,
    subradiant_intensity,
    subradiant_population,
    two_atom_intensity,
    two_atom_solution,
)
from .dynamics import (
    IntegrationError,
    PulseMetrics,
    RateTable,
    SystemParams,
    Trajectory,
    build_rate_table,
    critical_dgamma_formula,
    critical_dgamma_numeric,
    evolve,
    intensity,
    intensity_derivative,
    pulse_metrics,
    rhs,
)
from .full_oracle import CapacityError, FullState, kossakowski_spectrum, run_equivalence
from .motional import (
    ConvergenceError,
    CustomIsotropic,
    GaussianGround,
    ThermalBose,
    ThermalCloud,
    ThomasFermi,
    TransitionKind,
    UnsupportedFeatureError,
    delta_from_density,
    gamma_from_density,
    gamma_of,
)
from .pi_state import PIState, expect_Jz, fully_excited, ground_state, init_dicke, trace
from .spin_algebra import (
    BlockIndex,
    DomainError,
    alpha,
    block_list,
    ladder_coefficients,
    multiplicity,
    parameter_count,
)

__version__ = "0.1.0"
