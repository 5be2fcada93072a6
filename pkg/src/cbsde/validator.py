"""Validation of raw experiment configurations.

This module checks a raw config mapping against the preconditions of the
solvers and collects every violation instead of stopping at the first one.
"""

from dataclasses import dataclass
from typing import Any, List, Mapping, Optional

from cbsde.lattice import MAX_FULL_TREE_STEPS, LatticeError, LatticeModel, build_lattice
from cbsde.model import (
    Barrier,
    Constraint,
    Generator,
    ModelError,
    SequenceScheme,
    barrier_from_dict,
    claim_from_dict,
    constraint_from_dict,
    generator_from_dict,
)
from cbsde.penalize import PenalizationError, Schedule

EXPERIMENTS = (
    "solve",
    "penalize",
    "minimal",
    "reflected",
    "compare-oracle",
    "comparison",
    "convexity",
    "fatou",
    "l2",
    "from-below",
    "risk",
)
PROPERTY_EXPERIMENTS = ("comparison", "convexity", "fatou", "l2", "from-below")
SCHEDULED_EXPERIMENTS = ("minimal", "compare-oracle", "risk") + PROPERTY_EXPERIMENTS
CLAIM_EXPERIMENTS = (
    "solve",
    "penalize",
    "minimal",
    "reflected",
    "compare-oracle",
    "fatou",
    "l2",
    "from-below",
)
BARRIER_EXPERIMENTS = ("reflected", "compare-oracle")
OUTPUT_FORMATS = ("csv", "json")

TOP_LEVEL_KEYS = {
    "experiment",
    "grid",
    "generator",
    "constraint",
    "barrier",
    "claim",
    "other_claim",
    "mix_weight",
    "penalty",
    "schedule",
    "tolerances",
    "sequence",
    "t_step",
    "instances",
    "claim_scale",
    "seed",
    "output",
}
SECTION_KEYS = {
    "grid": {"horizon", "n_steps", "mode"},
    "schedule": {"m0", "growth", "m_max"},
    "tolerances": {"tol_m", "y_max", "oracle"},
    "sequence": {"scheme", "count", "rate", "noise_scale"},
    "output": {"format", "path"},
}


@dataclass(frozen=True)
class ConfigViolation:
    """A single configuration problem.

    Attributes:
        key: Dotted key of the offending entry (e.g. "generator.kind").
        message: The constraint that is not met.
    """

    key: str
    message: str


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_integer(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


class _Checker:
    """Accumulates violations while walking a config."""

    def __init__(self, config: Mapping[str, Any]):
        self.config = config
        self.violations: List[ConfigViolation] = []

    def add(self, key: str, message: str) -> None:
        self.violations.append(ConfigViolation(key, message))

    def section(self, name: str, required: bool = False) -> Optional[Mapping[str, Any]]:
        if name not in self.config:
            if required:
                self.add(name, "required section is missing")
            return None
        value = self.config[name]
        if not isinstance(value, Mapping):
            self.add(name, f"must be a mapping, got {type(value).__name__}")
            return None
        for unknown in sorted(set(value) - SECTION_KEYS.get(name, set(value))):
            self.add(f"{name}.{unknown}", "unknown key")
        return value

    def number(
        self,
        data: Mapping[str, Any],
        name: str,
        key: str,
        required: bool = False,
        positive: bool = False,
        low: Optional[float] = None,
        high: Optional[float] = None,
    ) -> Optional[float]:
        if name not in data:
            if required:
                self.add(key, "required value is missing")
            return None
        value = data[name]
        if not _is_number(value):
            self.add(key, f"must be a number, got {value!r}")
            return None
        if positive and not value > 0:
            self.add(key, f"must be positive, got {value}")
            return None
        if low is not None and value < low:
            self.add(key, f"must be at least {low}, got {value}")
            return None
        if high is not None and value > high:
            self.add(key, f"must be at most {high}, got {value}")
            return None
        return float(value)

    def integer(
        self, data: Mapping[str, Any], name: str, key: str, required: bool = False, low: int = 0
    ) -> Optional[int]:
        if name not in data:
            if required:
                self.add(key, "required value is missing")
            return None
        value = data[name]
        if not _is_integer(value):
            self.add(key, f"must be an integer, got {value!r}")
            return None
        if value < low:
            self.add(key, f"must be at least {low}, got {value}")
            return None
        return value

    def catalog(self, build, key: str, *args, **kwargs):
        try:
            return build(self.config[key], key, *args, **kwargs)
        except ModelError as e:
            self.add(e.key or key, str(e))
            return None


def _check_grid(checker: _Checker) -> Optional[LatticeModel]:
    grid = checker.section("grid", required=True)
    if grid is None:
        return None
    horizon = checker.number(grid, "horizon", "grid.horizon", required=True, positive=True)
    n_steps = checker.integer(grid, "n_steps", "grid.n_steps", required=True, low=1)
    mode = grid.get("mode", "recombining")
    if mode not in ("recombining", "full_tree"):
        checker.add("grid.mode", f"must be 'recombining' or 'full_tree', got {mode!r}")
        return None
    if mode == "full_tree" and n_steps is not None and n_steps > MAX_FULL_TREE_STEPS:
        checker.add("grid.n_steps", f"full tree supports at most {MAX_FULL_TREE_STEPS} steps")
        return None
    if horizon is None or n_steps is None:
        return None
    try:
        return build_lattice(horizon, n_steps, mode)
    except LatticeError as e:
        checker.add("grid", str(e))
        return None


def _check_schedule(checker: _Checker) -> Schedule:
    data = checker.section("schedule")
    if data is None:
        return Schedule()
    values = {}
    for name in ("m0", "growth", "m_max"):
        value = checker.number(data, name, f"schedule.{name}", positive=True)
        if value is not None:
            values[name] = value
    try:
        return Schedule(**values)
    except PenalizationError as e:
        checker.add("schedule", str(e))
        return Schedule()


def _check_contraction(
    checker: _Checker,
    experiment: Optional[str],
    lattice: Optional[LatticeModel],
    generator: Optional[Generator],
    constraint: Optional[Constraint],
    schedule: Schedule,
) -> None:
    if lattice is None or generator is None:
        return
    constant = generator.lipschitz_constant
    z_constant = generator.z_lipschitz
    key, label, z_label = "grid.n_steps", "M*dt", "L_z*sqrt(dt)"
    m = 0.0
    if experiment in SCHEDULED_EXPERIMENTS:
        m = schedule.m_max
        key, label = "schedule.m_max", "(M + m_max*M_phi)*dt"
        z_label = "(L_z + m_max*M_phi)*sqrt(dt)"
    elif experiment == "penalize" and _is_number(checker.config.get("penalty")):
        m = float(checker.config["penalty"])
        key, label, z_label = "penalty", "(M + m*M_phi)*dt", "(L_z + m*M_phi)*sqrt(dt)"
    if constraint is not None and not constraint.is_trivial:
        constant += m * constraint.bound_constant
        z_constant += m * constraint.z_lipschitz
    if not lattice.grid.is_stable(constant):
        checker.add(
            key,
            f"{label} = {constant:g} * {lattice.dt:g} = {constant * lattice.dt:g} >= 1; "
            f"the implicit step is not a contraction, refine the grid",
        )
    elif not lattice.grid.is_monotone(z_constant):
        checker.add(
            key,
            f"{z_label} = {z_constant:g} * {lattice.sqrt_dt:g} = "
            f"{z_constant * lattice.sqrt_dt:g} > 1; the explicit z step is not monotone, "
            f"refine the grid or lower the penalty",
        )


def validate(config: Mapping[str, Any]) -> List[ConfigViolation]:
    """Check a raw config mapping against the solvers' preconditions.

    Args:
        config: Raw config mapping, after command-line overrides.

    Returns:
        All violations found; empty iff the experiment can run.
    """
    if not isinstance(config, Mapping):
        return [ConfigViolation("<root>", "config must be a mapping")]
    checker = _Checker(config)

    for unknown in sorted(set(config) - TOP_LEVEL_KEYS):
        checker.add(unknown, "unknown key")

    experiment = config.get("experiment")
    if experiment is None:
        checker.add("experiment", "required value is missing")
    elif experiment not in EXPERIMENTS:
        checker.add(
            "experiment",
            f"unknown experiment {experiment!r}; expected one of {', '.join(EXPERIMENTS)}",
        )

    lattice = _check_grid(checker)

    generator = None
    if "generator" not in config:
        checker.add("generator", "required section is missing")
    else:
        generator = checker.catalog(generator_from_dict, "generator")

    barrier: Optional[Barrier] = None
    if "barrier" in config:
        barrier = checker.catalog(barrier_from_dict, "barrier")
    elif experiment in BARRIER_EXPERIMENTS:
        checker.add("barrier", f"experiment '{experiment}' requires a barrier")

    constraint: Optional[Constraint] = Constraint.none()
    if "constraint" in config:
        constraint = checker.catalog(constraint_from_dict, "constraint", default_barrier=barrier)
        if (
            experiment == "compare-oracle"
            and constraint is not None
            and constraint.kind not in ("none", "reflect_below")
        ):
            checker.add("constraint.kind", "compare-oracle penalizes reflect_below{barrier} only")

    for name in ("claim", "other_claim"):
        if name not in config:
            if name == "claim" and experiment in CLAIM_EXPERIMENTS:
                checker.add("claim", f"experiment '{experiment}' requires a claim")
            continue
        claim = checker.catalog(claim_from_dict, name)
        if claim is not None and lattice is not None:
            try:
                claim.leaf_values(lattice)
            except ModelError as e:
                checker.add(f"{name}.values", str(e))

    if experiment == "penalize":
        checker.number(config, "penalty", "penalty", required=True, positive=True)
    elif "penalty" in config:
        checker.number(config, "penalty", "penalty", positive=True)

    schedule = _check_schedule(checker)

    tolerances = checker.section("tolerances")
    if tolerances is not None:
        for name in ("tol_m", "y_max", "oracle"):
            checker.number(tolerances, name, f"tolerances.{name}", positive=True)

    sequence = checker.section("sequence")
    if sequence is not None:
        if "scheme" in sequence:
            try:
                scheme = SequenceScheme.parse(sequence["scheme"])
            except ModelError as e:
                checker.add("sequence.scheme", str(e))
            else:
                if experiment == "fatou" and scheme is not SequenceScheme.SHIFT:
                    checker.add("sequence.scheme", "fatou needs an increasing sequence (shift)")
        checker.integer(sequence, "count", "sequence.count", low=1)
        rate = checker.number(sequence, "rate", "sequence.rate", positive=True)
        if rate is not None and rate >= 1:
            checker.add("sequence.rate", f"must be below 1, got {rate}")
        checker.number(sequence, "noise_scale", "sequence.noise_scale", positive=True)

    t_step = checker.integer(config, "t_step", "t_step")
    if t_step is not None and lattice is not None and t_step > lattice.n_steps:
        checker.add("t_step", f"must be at most n_steps = {lattice.n_steps}, got {t_step}")

    checker.integer(config, "instances", "instances", low=1)
    checker.integer(config, "seed", "seed")
    checker.number(config, "mix_weight", "mix_weight", low=0.0, high=1.0)
    checker.number(config, "claim_scale", "claim_scale", positive=True)

    output = checker.section("output")
    if output is not None:
        if output.get("format", "csv") not in OUTPUT_FORMATS:
            checker.add("output.format", f"must be one of {', '.join(OUTPUT_FORMATS)}")
        if "path" in output and not isinstance(output["path"], str):
            checker.add("output.path", "must be a string")

    if experiment == "risk" and generator is not None and constraint is not None:
        if not (generator.vanishes_at_zero and generator.independent_of_y):
            checker.add("generator", "risk needs a generator independent of y with g(t, y, 0) = 0")
        if not constraint.independent_of_y:
            checker.add("constraint", "risk needs a constraint independent of y")

    _check_contraction(checker, experiment, lattice, generator, constraint, schedule)
    return checker.violations
