"""Channel-training design for energy-harvesting point-to-point links."""

from .dwf import (
    PowerAllocation,
    SuffixHull,
    TrainingDecision,
    dwf_allocate,
    dwf_suffix,
    incremental_update,
    training_split,
)
from .energy_model import (
    ChannelParams,
    EnergyProfile,
    RngSpec,
    average_eh_rate,
    check_energy_neutral,
    constant_profile,
    cumulative_available,
    generate_poisson_profile,
    load_profile,
)
from .policies import (
    FixedMode,
    PolicyOutcome,
    asymptotic_training_period,
    constant_rate_optimum,
    fixed_policy,
    optimal_exhaustive,
    suboptimal_constant_rate,
    suboptimal_dwf_rate,
    upper_bound_non_eh,
    upper_bound_perfect_csi,
)
from .special_fns import e1, exp_e1
from .throughput import (
    block_throughput,
    estimation_error_variance,
    k_factor,
    mc_throughput_oracle,
    perfect_csi_throughput,
    slot_rate_term,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "EnergyProfile",
    "FixedMode",
    "PolicyOutcome",
    "PowerAllocation",
    "RngSpec",
    "SuffixHull",
    "TrainingDecision",
    "asymptotic_training_period",
    "average_eh_rate",
    "block_throughput",
    "check_energy_neutral",
    "constant_profile",
    "constant_rate_optimum",
    "cumulative_available",
    "dwf_allocate",
    "dwf_suffix",
    "e1",
    "estimation_error_variance",
    "exp_e1",
    "fixed_policy",
    "generate_poisson_profile",
    "incremental_update",
    "k_factor",
    "load_profile",
    "mc_throughput_oracle",
    "optimal_exhaustive",
    "perfect_csi_throughput",
    "slot_rate_term",
    "suboptimal_constant_rate",
    "suboptimal_dwf_rate",
    "training_split",
    "upper_bound_non_eh",
    "upper_bound_perfect_csi",
]
