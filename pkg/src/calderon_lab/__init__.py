"""Numerical toolkit for rearrangement-invariant norms, singular radial
kernels, moduli of smoothness, and the optimal-lattice construction that
ties them together."""

from . import errors
from .gridfn import (
    LogGrid,
    SampledFunction,
    default_grid,
    integrate,
    make_log_grid,
    running_integral,
    running_sup,
    sample,
)
from .rearrange import (
    MeasurableSample,
    decreasing_rearrangement,
    maximal_function,
    rearrangement_steps,
)
from .kernels import (
    BesselMcDonald,
    KernelSpec,
    PowerSlowlyVarying,
    SlowlyVaryingSpec,
    auto_z1,
    bessel_k,
    check_derivative_conditions,
    cone_kernel,
    measure_profile,
    slowly_varying_ratios,
)
from .lorentz import (
    LorentzSpace,
    WeightSpec,
    associate_norm,
    check_norm_conditions,
    cumulative_weight,
    embedding_criterion,
    embedding_function,
    lorentz_norm,
    marcinkiewicz_norm,
    power_weight,
)
from .optimal import (
    AssociatedNorms,
    AssociateNormEngine,
    ConditionWitness,
    OptimalNormSpec,
    associated_norms,
    check_condition_a,
    check_condition_b,
    equivalence_report,
    half_level_point,
    hardy_constants,
    kernel_mass_split,
    level_discretization,
    make_optimal_norm_spec,
    optimal_norm,
    sample_family,
    tail_embedding_function,
    two_sided_level_discretization,
)
from .potentials import (
    FieldSample,
    bump_and_staircase_family,
    calderon_norm,
    convolve,
    envelope_bounds,
    field_rearrangement,
    finite_difference,
    modulus_curve,
    modulus_of_smoothness,
    power_modulus_norm,
    sample_field,
    stieltjes_modulus_norm,
    upper_cone_check,
)
from .cli import ExperimentConfig, ReportRecord, parse_config_text, run, sweep

__version__ = "0.1.0"
