"""cbsde - Constrained BSDE laboratory.

Computes minimal constrained solutions of backward stochastic differential
equations by penalization on an exact binomial filtration, cross-checks them
against a reflected-BSDE oracle and verifies their structural properties.
"""

__version__ = "0.1.0"

from cbsde.lattice import (
    AdaptedField,
    LatticeError,
    LatticeMode,
    LatticeModel,
    TimeGrid,
    accumulate_along_paths,
    build_lattice,
    conditional_expectation,
    l2_norm,
    martingale_coefficient,
)
from cbsde.model import (
    Barrier,
    Claim,
    Constraint,
    Generator,
    ModelError,
    SequenceScheme,
    add,
    audit_convexity,
    audit_lipschitz,
    barrier_from_dict,
    claim_from_dict,
    constraint_from_dict,
    convex_mix,
    evaluate_constraint,
    evaluate_generator,
    generator_from_dict,
    make_claim_sequence,
    negate,
    pointwise_max,
    pointwise_min,
    random_table_claim,
    shift,
)
from cbsde.bsde import (
    BSDEError,
    ContractionError,
    ConvergenceError,
    EffectiveDriver,
    Solution,
    Supersolution,
    residual_check,
    solve_bsde,
)
from cbsde.penalize import (
    DomainStatus,
    MinimalSolutionResult,
    PenalizationError,
    PenalizedRun,
    Schedule,
    extract_increasing_part,
    penalization_ladder,
    solve_minimal,
    solve_penalized,
)
from cbsde.reflected import (
    ReflectedError,
    TerminalConsistencyError,
    TerminalSensitivity,
    barrier_violation,
    complementarity_violation,
    estimate_terminal_sensitivity,
    solve_reflected,
)
from cbsde.properties import (
    PreconditionError,
    PropertyError,
    PropertyRecord,
    PropertyReport,
    ReportCollector,
    RiskMeasureError,
    audit_risk_measure,
    check_comparison,
    check_convexity,
    check_fatou,
    check_from_below,
    check_l2_continuity,
    comparison_suite,
    convexity_suite,
    risk_measure,
)
from cbsde.validator import ConfigViolation, validate
from cbsde.config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    load_config,
    parse_yaml_file,
)
from cbsde.output import OutputError, ResultWriter, config_digest
from cbsde.runner import ExperimentRunner, RunnerError, RunOutcome

__all__ = [
    # Lattice
    "AdaptedField",
    "LatticeError",
    "LatticeMode",
    "LatticeModel",
    "TimeGrid",
    "accumulate_along_paths",
    "build_lattice",
    "conditional_expectation",
    "l2_norm",
    "martingale_coefficient",
    # Model
    "Barrier",
    "Claim",
    "Constraint",
    "Generator",
    "ModelError",
    "SequenceScheme",
    "add",
    "audit_convexity",
    "audit_lipschitz",
    "barrier_from_dict",
    "claim_from_dict",
    "constraint_from_dict",
    "convex_mix",
    "evaluate_constraint",
    "evaluate_generator",
    "generator_from_dict",
    "make_claim_sequence",
    "negate",
    "pointwise_max",
    "pointwise_min",
    "random_table_claim",
    "shift",
    # BSDE
    "BSDEError",
    "ContractionError",
    "ConvergenceError",
    "EffectiveDriver",
    "Solution",
    "Supersolution",
    "residual_check",
    "solve_bsde",
    # Penalization
    "DomainStatus",
    "MinimalSolutionResult",
    "PenalizationError",
    "PenalizedRun",
    "Schedule",
    "extract_increasing_part",
    "penalization_ladder",
    "solve_minimal",
    "solve_penalized",
    # Reflected
    "ReflectedError",
    "TerminalConsistencyError",
    "TerminalSensitivity",
    "barrier_violation",
    "complementarity_violation",
    "estimate_terminal_sensitivity",
    "solve_reflected",
    # Properties
    "PreconditionError",
    "PropertyError",
    "PropertyRecord",
    "PropertyReport",
    "ReportCollector",
    "RiskMeasureError",
    "audit_risk_measure",
    "check_comparison",
    "check_convexity",
    "check_fatou",
    "check_from_below",
    "check_l2_continuity",
    "comparison_suite",
    "convexity_suite",
    "risk_measure",
    # Validator
    "ConfigViolation",
    "validate",
    # Config
    "ConfigError",
    "ExperimentConfig",
    "apply_overrides",
    "load_config",
    "parse_yaml_file",
    # Output
    "OutputError",
    "ResultWriter",
    "config_digest",
    # Runner
    "ExperimentRunner",
    "RunnerError",
    "RunOutcome",
]
