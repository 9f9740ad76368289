"""Recurrence classification for half-strip Markov chains and Monte Carlo
verification of centre-of-mass limit theorems."""

__version__ = "0.1.0"

from .halfstrip import (  # noqa: E402,F401
    CorrelatedRWModel,
    DriftProfile,
    HalfStripModel,
    LyapunovSpec,
    RegularityParams,
    correlated_rw_profile,
    empirical_moments,
    fit_drift_profile,
    lamperti_model,
    lyapunov_drift_check,
    lyapunov_value,
    profile_kernel_model,
    tabular_model,
)
from .classifier import (  # noqa: E402,F401
    ClassifierReport,
    classify,
    compute_UV,
    moment_threshold,
    solve_shifts,
    stationary_distribution,
    transform_to_lamperti,
)
from .mc import (  # noqa: E402,F401
    EnsembleResult,
    SimulationPlan,
    estimate_tail_index,
    occupation_fractions,
    simulate,
)
from .comwalk import (  # noqa: E402,F401
    IncrementLaw,
    escape_exponent,
    gaussian_density_com,
    gaussian_density_walk,
    heavy_tail_law,
    lazy_ssrw_law,
    llt_check,
    recurrence_probe_1d,
    sample_heavy_tail_increment,
    ssrw_law,
    stable_density,
    stable_density_com,
    step_com,
    table_law,
)
from .lattice import (  # noqa: E402,F401
    LatticeSpec,
    builtin_lattice,
    minimal_lattice_1d,
    minimality_check,
    phi,
    support_membership,
)
from .scenarios import Scenario, load_scenario, run, write_scenario  # noqa: E402,F401
