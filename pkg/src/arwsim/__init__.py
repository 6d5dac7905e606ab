"""arwsim: simulation laboratory for one-dimensional activated random walk
under the sitewise (stack-of-instructions) representation."""

from .core import (
    POLICIES,
    Configuration,
    NonfixationSuspected,
    Odometer,
    StabilizationResult,
    is_stable_on,
    legal_topple,
    mass_balance_residual,
    sample_bernoulli_config,
    sample_uniform_k_particle_config,
    stabilize,
)
from .extended import (
    ChatEstimate,
    EnumerationResult,
    ExtendedOdometer,
    InfectionPath,
    enumerate_stable_extended,
    estimate_chat,
    greedy_stable_odometer,
    minimal_odometer,
    to_infection_path,
)
from .experiments import (
    DrivenDissipativeResult,
    FitResult,
    MeanEstimate,
    MinimalGrowthResult,
    PhaseScanResult,
    RhoCEstimate,
    SupercriticalResult,
    TailEstimate,
    driven_dissipative_rho_c,
    fit_stretched_exponential,
    fixation_phase_scan,
    mean_odometer,
    minimal_odometer_concentration,
    supercritical_experiment,
    tail_experiment,
)
from .stacks import (
    LEFT,
    RIGHT,
    SLEEP,
    FixtureStacks,
    Instruction,
    InstructionStacks,
    StackSearchError,
    derive_seed,
    instruction_at,
    law_thresholds,
    raw64,
)

__all__ = [
    "POLICIES",
    "Configuration",
    "NonfixationSuspected",
    "Odometer",
    "StabilizationResult",
    "is_stable_on",
    "legal_topple",
    "mass_balance_residual",
    "sample_bernoulli_config",
    "sample_uniform_k_particle_config",
    "stabilize",
    "ChatEstimate",
    "EnumerationResult",
    "ExtendedOdometer",
    "InfectionPath",
    "enumerate_stable_extended",
    "estimate_chat",
    "greedy_stable_odometer",
    "minimal_odometer",
    "to_infection_path",
    "DrivenDissipativeResult",
    "FitResult",
    "MeanEstimate",
    "MinimalGrowthResult",
    "PhaseScanResult",
    "RhoCEstimate",
    "SupercriticalResult",
    "TailEstimate",
    "driven_dissipative_rho_c",
    "fit_stretched_exponential",
    "fixation_phase_scan",
    "mean_odometer",
    "minimal_odometer_concentration",
    "supercritical_experiment",
    "tail_experiment",
    "LEFT",
    "RIGHT",
    "SLEEP",
    "FixtureStacks",
    "Instruction",
    "InstructionStacks",
    "StackSearchError",
    "derive_seed",
    "instruction_at",
    "law_thresholds",
    "raw64",
]
