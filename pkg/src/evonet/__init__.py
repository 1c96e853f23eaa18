"""Steady degree distributions of evolving networks with affine kernels."""
from .errors import (
    ConfigError,
    Deadlock,
    DenominatorVanishes,
    Divergent,
    DomainError,
    EvonetError,
    InfeasibleSeed,
    InsufficientTail,
    NoConvergence,
    NotConverged,
    NumericalError,
    RateOverflow,
    RequiresLinearRoute,
    RewireSkipped,
    SeamMismatch,
    SingularSystem,
)
from .kernels import (
    InitialDegreeLaw,
    KernelParams,
    ModelPreset,
    TransitionRates,
    eval_limit_kernels,
    preset_rates,
    preset_to_kernels,
    transition_rates,
)
from .solver import (
    DegreeDistribution,
    asymptotic_prefactor,
    build_head_system,
    classify,
    normalization_check,
    solve_distribution,
    solve_p0,
    tail_value,
)

__version__ = "0.1.0"
