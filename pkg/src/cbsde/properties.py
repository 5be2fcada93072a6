"""Structural properties of constrained solutions as quantified checks.

Each check runs the solvers on concrete instances and measures how far an
inequality is from holding. The outcome is a PropertyReport: a leaf report
passes when its largest violation is within its tolerance, and a composite
report passes when all of its parts pass.

Inequalities that hold exactly for every penalty level are checked level by
level on a fixed schedule, so that every claim in a comparison is solved
with the same m.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from cbsde.lattice import AdaptedField, LatticeModel, l2_norm
from cbsde.model import (
    Claim,
    Constraint,
    Generator,
    SequenceScheme,
    add,
    convex_mix,
    make_claim_sequence,
    negate,
    pointwise_max,
    pointwise_min,
    random_table_claim,
    shift,
)
from cbsde.penalize import (
    DEFAULT_TOL_M,
    DEFAULT_Y_MAX,
    MinimalSolutionResult,
    Schedule,
    penalization_ladder,
    solve_minimal,
)

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-9
MONOTONE_TOLERANCE = 1e-11
ORDER_TOLERANCE = 1e-12
FATOU_BUDGET = 1.5e-2
# The rate constant is fitted on the coarse half of a sequence and may grow
# by this factor on the fine half.
RATE_SLACK = 2.0
L2_LIMIT = 1e-3
RISK_CLAIM_SCALE = 0.08


class PropertyError(Exception):
    """Base exception for property check errors."""

    pass


class PreconditionError(PropertyError):
    """Raised when the inputs of a check do not satisfy its hypotheses."""

    pass


class RiskMeasureError(PropertyError):
    """Raised when a driver does not induce a convex risk measure."""

    pass


@dataclass
class PropertyRecord:
    """Outcome of one instance of a check."""

    instance: str
    violation: float
    details: Dict[str, Any] = field(default_factory=dict)


@dataclass
class PropertyReport:
    """Machine-readable outcome of a property check.

    A leaf report carries records and a tolerance. A composite report carries
    parts and passes iff every part passes.
    """

    property_name: str
    tolerance: Optional[float] = None
    records: List[PropertyRecord] = field(default_factory=list)
    parts: List["PropertyReport"] = field(default_factory=list)
    info: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_composite(self) -> bool:
        return bool(self.parts)

    @property
    def trace(self) -> List[PropertyRecord]:
        """Per-instance records, with part names prefixed for composites."""
        if not self.is_composite:
            return list(self.records)
        trace = []
        for part in self.parts:
            for record in part.trace:
                trace.append(
                    PropertyRecord(
                        f"{part.property_name}/{record.instance}", record.violation, record.details
                    )
                )
        return trace

    @property
    def instances_tested(self) -> int:
        return len(self.trace)

    @property
    def max_violation(self) -> float:
        violations = [record.violation for record in self.trace]
        if any(math.isnan(violation) for violation in violations):
            return math.inf
        return max(violations) if violations else 0.0

    def _excess(self) -> float:
        if self.is_composite:
            return max(part._excess() for part in self.parts)
        return self.max_violation - (self.tolerance or 0.0)

    @property
    def worst_instance(self) -> Optional[str]:
        if self.is_composite:
            worst = max(self.parts, key=lambda part: part._excess())
            inner = worst.worst_instance
            return f"{worst.property_name}/{inner}" if inner else None
        if not self.records:
            return None
        return max(self.records, key=lambda record: record.violation).instance

    @property
    def passed(self) -> bool:
        if self.is_composite:
            return all(part.passed for part in self.parts)
        return self.max_violation <= (self.tolerance or 0.0)

    def part(self, name: str) -> "PropertyReport":
        """Return the part with the given name.

        Raises:
            KeyError: If no such part exists.
        """
        for candidate in self.parts:
            if candidate.property_name == name:
                return candidate
        raise KeyError(name)

    def to_dict(self, include_records: bool = True) -> Dict[str, Any]:
        """Convert the report to a dictionary for JSON serialization.

        Args:
            include_records: Include per-instance records.

        Returns:
            Dictionary representation of the report.
        """
        data: Dict[str, Any] = {
            "property": self.property_name,
            "instances_tested": self.instances_tested,
            "max_violation": self.max_violation,
            "worst_instance": self.worst_instance,
            "pass": self.passed,
        }
        if self.tolerance is not None:
            data["tolerance"] = self.tolerance
        if self.info:
            data["info"] = self.info
        if self.is_composite:
            data["parts"] = [part.to_dict(include_records) for part in self.parts]
        elif include_records:
            data["records"] = [
                {"instance": r.instance, "violation": r.violation, "details": r.details}
                for r in self.records
            ]
        return data

    def to_json(self, indent: int = 2) -> str:
        """Convert the report to a JSON string."""
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


class ReportCollector:
    """Collects instance outcomes for one property without stopping at failures."""

    def __init__(self, property_name: str, tolerance: float):
        """Initialize the collector.

        Args:
            property_name: Name of the checked property.
            tolerance: Largest admissible violation.
        """
        self.property_name = property_name
        self.tolerance = tolerance
        self.records: List[PropertyRecord] = []

    def add(self, instance: str, violation: float, **details: Any) -> None:
        """Record one instance; negative violations are floored at 0.

        A NaN violation (for example inf - inf from an infinite risk value)
        is recorded as +inf so that it fails every tolerance.
        """
        value = float(violation)
        if math.isnan(value):
            value = math.inf
        self.records.append(PropertyRecord(instance, max(value, 0.0), details))

    def build(self, **info: Any) -> PropertyReport:
        report = PropertyReport(self.property_name, self.tolerance, list(self.records), info=info)
        level = logging.DEBUG if report.passed else logging.WARNING
        logger.log(
            level,
            f"{self.property_name}: {report.instances_tested} instance(s), "
            f"max violation {report.max_violation:.3e} (tolerance {self.tolerance:.1e})",
        )
        return report


def composite(property_name: str, parts: Iterable[PropertyReport], **info: Any) -> PropertyReport:
    """Combine reports into one that passes iff all parts pass."""
    return PropertyReport(property_name, parts=list(parts), info=info)


def _max_excess(
    steps: Iterable[int], difference: Callable[[int], np.ndarray]
) -> Tuple[float, Optional[Tuple[int, int]]]:
    """Largest positive value of difference(step) over nodes, with its location."""
    worst, where = 0.0, None
    for step in steps:
        values = difference(step)
        node = int(np.argmax(values))
        if values[node] > worst:
            worst, where = float(values[node]), (step, node)
    return worst, where


def _field_excess(
    left: AdaptedField, right: AdaptedField
) -> Tuple[float, Optional[Tuple[int, int]]]:
    """Largest value of left - right over common nodes, floored at 0."""
    steps = [s for s in left.defined_steps if s in right]
    return _max_excess(steps, lambda s: left.at(s) - right.at(s))


def _location(where: Optional[Tuple[int, int]]) -> Dict[str, Any]:
    if where is None:
        return {}
    return {"step": where[0], "node": where[1]}


def _fixed_schedule(
    g: Generator,
    phi: Constraint,
    xi: Claim,
    lattice: LatticeModel,
    schedule: Optional[Schedule],
    tol_m: float,
    y_max: float,
) -> MinimalSolutionResult:
    return solve_minimal(g, phi, xi, lattice, schedule, tol_m, y_max, stop_early=False)


def _require_in_domain(result: MinimalSolutionResult, claim: Claim) -> None:
    if not result.converged:
        raise PreconditionError(
            f"Claim {claim.describe()} is outside the domain ({result.reason})"
        )


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


def check_comparison(
    g: Generator,
    phi: Constraint,
    xi: Claim,
    eta: Claim,
    lattice: LatticeModel,
    schedule: Optional[Schedule] = None,
    tolerance: float = EXACT_TOLERANCE,
) -> PropertyReport:
    """Check that xi <= eta implies y^m(xi) <= y^m(eta) at every node and level.

    The last level stands for the limit. One record per penalty level.

    Raises:
        PreconditionError: If xi > eta at some leaf.
    """
    gap = xi.leaf_values(lattice) - eta.leaf_values(lattice)
    if np.any(gap > ORDER_TOLERANCE):
        raise PreconditionError(
            f"Comparison requires xi <= eta at every leaf; violated by {float(np.max(gap)):.3e}"
        )

    lower = penalization_ladder(g, phi, xi, lattice, schedule)
    upper = penalization_ladder(g, phi, eta, lattice, schedule)
    collector = ReportCollector("comparison", tolerance)
    for run_xi, run_eta in zip(lower, upper):
        violation, where = _field_excess(run_xi.y, run_eta.y)
        collector.add(f"m={run_xi.m:g}", violation, m=run_xi.m, **_location(where))
    return collector.build(xi=xi.describe(), eta=eta.describe())


def comparison_suite(
    g: Generator,
    phi: Constraint,
    lattice: LatticeModel,
    instances: int = 200,
    seed: int = 0,
    schedule: Optional[Schedule] = None,
    scale: float = 1.0,
    tolerance: float = EXACT_TOLERANCE,
) -> PropertyReport:
    """Run check_comparison on seeded ordered pairs (xi, xi + nonnegative table).

    Args:
        g: Generator.
        phi: Constraint.
        lattice: The lattice.
        instances: Number of pairs.
        seed: Seed of the claim draws.
        schedule: Penalty schedule.
        scale: xi is uniform[-scale, scale], the bump uniform[0, scale].
        tolerance: Largest admissible violation.

    Returns:
        One record per pair.
    """
    rng = np.random.default_rng(seed)
    collector = ReportCollector("comparison_suite", tolerance)
    for index in range(instances):
        xi = random_table_claim(lattice, rng, -scale, scale, label=f"xi[{index}]")
        bump = random_table_claim(lattice, rng, 0.0, scale, label=f"bump[{index}]")
        report = check_comparison(g, phi, xi, add(xi, bump), lattice, schedule, tolerance)
        collector.add(
            f"pair[{index}]", report.max_violation, seed=seed, worst=report.worst_instance
        )
    return collector.build(seed=seed, generator=g.describe(), constraint=phi.describe())


# ---------------------------------------------------------------------------
# Convexity
# ---------------------------------------------------------------------------


def _require_convex(g: Generator, phi: Constraint) -> None:
    if not g.convex:
        raise PreconditionError(f"Generator {g.describe()} is not convex")
    if not phi.convex:
        raise PreconditionError(f"Constraint {phi.describe()} is not convex")


def _mix_violations(
    g: Generator,
    phi: Constraint,
    xi: Claim,
    eta: Claim,
    a: float,
    lattice: LatticeModel,
    schedule: Optional[Schedule],
) -> List[Tuple[float, float, Optional[Tuple[int, int]]]]:
    ladders = [
        penalization_ladder(g, phi, claim, lattice, schedule)
        for claim in (convex_mix(a, xi, eta), xi, eta)
    ]
    results = []
    for run_mix, run_xi, run_eta in zip(*ladders):
        violation, where = _max_excess(
            run_mix.y.defined_steps,
            lambda s: run_mix.y.at(s) - a * run_xi.y.at(s) - (1.0 - a) * run_eta.y.at(s),
        )
        results.append((run_mix.m, violation, where))
    return results


def check_convexity(
    g: Generator,
    phi: Constraint,
    xi: Claim,
    eta: Claim,
    a: float,
    lattice: LatticeModel,
    schedule: Optional[Schedule] = None,
    tol_m: float = DEFAULT_TOL_M,
    tolerance: float = EXACT_TOLERANCE,
) -> PropertyReport:
    """Check y(a xi + (1-a) eta) <= a y(xi) + (1-a) y(eta) at every node.

    The per-level part uses ``tolerance``; the limit part (last level) uses
    tol_m + tolerance.

    Raises:
        PreconditionError: If g or phi is not convex, or a is outside [0, 1].
    """
    _require_convex(g, phi)
    if not 0.0 <= a <= 1.0:
        raise PreconditionError(f"Mixing weight must lie in [0, 1], got {a}")

    per_level = ReportCollector("per_level", tolerance)
    limit = ReportCollector("limit", tol_m + tolerance)
    results = _mix_violations(g, phi, xi, eta, a, lattice, schedule)
    for m, violation, where in results:
        per_level.add(f"m={m:g}", violation, m=m, **_location(where))
    m, violation, where = results[-1]
    limit.add(f"m={m:g}", violation, m=m, **_location(where))
    return composite(
        "convexity", [per_level.build(), limit.build()], a=a, xi=xi.describe(), eta=eta.describe()
    )


def convexity_suite(
    g: Generator,
    phi: Constraint,
    lattice: LatticeModel,
    instances: int = 200,
    seed: int = 0,
    schedule: Optional[Schedule] = None,
    tol_m: float = DEFAULT_TOL_M,
    scale: float = 1.0,
    tolerance: float = EXACT_TOLERANCE,
) -> PropertyReport:
    """Run the convexity check on seeded triples (xi, eta, a)."""
    _require_convex(g, phi)
    rng = np.random.default_rng(seed)
    per_level = ReportCollector("per_level", tolerance)
    limit = ReportCollector("limit", tol_m + tolerance)
    for index in range(instances):
        xi = random_table_claim(lattice, rng, -scale, scale, label=f"xi[{index}]")
        eta = random_table_claim(lattice, rng, -scale, scale, label=f"eta[{index}]")
        a = float(rng.uniform(0.0, 1.0))
        results = _mix_violations(g, phi, xi, eta, a, lattice, schedule)
        worst_m, worst, where = max(results, key=lambda item: item[1])
        per_level.add(f"triple[{index}]", worst, a=a, m=worst_m, **_location(where))
        m, violation, where = results[-1]
        limit.add(f"triple[{index}]", violation, a=a, m=m, **_location(where))
    return composite(
        "convexity_suite",
        [per_level.build(), limit.build()],
        seed=seed,
        generator=g.describe(),
        constraint=phi.describe(),
    )


# ---------------------------------------------------------------------------
# Continuity along sequences
# ---------------------------------------------------------------------------


def _require_increasing(sequence: List[Claim], lattice: LatticeModel) -> None:
    for index, (current, following) in enumerate(zip(sequence, sequence[1:]), start=1):
        drop = current.leaf_values(lattice) - following.leaf_values(lattice)
        if np.any(drop > ORDER_TOLERANCE):
            raise PreconditionError(
                f"Sequence is not increasing between terms {index} and {index + 1} "
                f"(drop {float(np.max(drop)):.3e})"
            )


def _require_below(sequence: List[Claim], base: Claim, lattice: LatticeModel) -> None:
    leaves = base.leaf_values(lattice)
    for index, claim in enumerate(sequence, start=1):
        excess = claim.leaf_values(lattice) - leaves
        if np.any(excess > ORDER_TOLERANCE):
            raise PreconditionError(
                f"Sequence term {index} is not below the base claim "
                f"(excess {float(np.max(excess)):.3e})"
            )


def check_fatou(
    g: Generator,
    phi: Constraint,
    base: Claim,
    lattice: LatticeModel,
    count: int = 100,
    scheme: str = "shift",
    schedule: Optional[Schedule] = None,
    tol_m: float = DEFAULT_TOL_M,
    y_max: float = DEFAULT_Y_MAX,
    budget: float = FATOU_BUDGET,
) -> PropertyReport:
    """Check that E_0(xi_n) increases to E_0(xi) along a bounded increasing sequence.

    Parts:
        monotone: E_0(xi_n) non-decreasing in n (tolerance 1e-11).
        limit: |E_0(xi_count) - E_0(xi)| within ``budget``.
    The constant C of the 1/n decay, max_n n |E_0(xi_n) - E_0(xi)|, is reported.

    Raises:
        PreconditionError: If the sequence is not increasing or the base
            claim is outside the domain.
    """
    sequence = make_claim_sequence(base, scheme, count, lattice=lattice)
    _require_increasing(sequence, lattice)
    reference = _fixed_schedule(g, phi, base, lattice, schedule, tol_m, y_max)
    _require_in_domain(reference, base)

    values = [
        _fixed_schedule(g, phi, claim, lattice, schedule, tol_m, y_max).y0 for claim in sequence
    ]
    monotone = ReportCollector("monotone", MONOTONE_TOLERANCE)
    for n in range(1, len(values)):
        monotone.add(f"n={n + 1}", values[n - 1] - values[n], value=values[n])
    limit = ReportCollector("limit", budget)
    limit.add(f"n={count}", abs(values[-1] - reference.y0), value=values[-1])

    decay = max((n + 1) * abs(v - reference.y0) for n, v in enumerate(values))
    return composite(
        "fatou",
        [monotone.build(), limit.build()],
        base_value=reference.y0,
        decay_constant=decay,
        m_final=reference.m_final,
        scheme=SequenceScheme.parse(scheme).value,
    )


def _rate_part(
    distances: List[float], sizes: List[float], floor: float
) -> Tuple[PropertyReport, float]:
    half = max(1, len(distances) // 2)
    ratios = [d / e for d, e in zip(distances[:half], sizes[:half]) if e > 0]
    kappa = max(ratios) if ratios else 0.0
    rate = ReportCollector("rate", ORDER_TOLERANCE)
    for n in range(half, len(distances)):
        bound = max(RATE_SLACK * kappa * sizes[n], floor)
        rate.add(f"n={n + 1}", distances[n] - bound, distance=distances[n], bound=bound)
    return rate.build(kappa=kappa), kappa


def _decreasing_part(distances: List[float], strict: bool = False) -> PropertyReport:
    tolerance = 0.0 if strict else ORDER_TOLERANCE
    decreasing = ReportCollector("decreasing", tolerance)
    for n in range(1, len(distances)):
        rise = distances[n] - distances[n - 1]
        if strict and rise >= 0.0:
            # equal distances are not a strict decrease
            rise = max(rise, math.ulp(distances[n - 1]))
        decreasing.add(f"n={n + 1}", rise, distance=distances[n])
    return decreasing.build(strict=strict)


def _limit_part(distances: List[float], limit: float) -> PropertyReport:
    final = ReportCollector("limit", limit)
    final.add(f"n={len(distances)}", distances[-1], distance=distances[-1])
    return final.build()


def _l2_distance(
    left: AdaptedField, right: AdaptedField, lattice: LatticeModel, step: int
) -> float:
    return l2_norm(AdaptedField.single(lattice, step, left.at(step) - right.at(step)), lattice)


def _claim_distance(left: Claim, right: Claim, lattice: LatticeModel) -> float:
    n = lattice.n_steps
    diff = left.leaf_values(lattice) - right.leaf_values(lattice)
    return l2_norm(AdaptedField.single(lattice, n, diff), lattice)


def _check_step(t_step: int, lattice: LatticeModel) -> None:
    if not 0 <= t_step <= lattice.n_steps:
        raise PreconditionError(f"'t_step' must lie in [0, {lattice.n_steps}], got {t_step}")


def check_l2_continuity(
    g: Generator,
    phi: Constraint,
    base: Claim,
    lattice: LatticeModel,
    t_step: int,
    seed: int = 0,
    count: int = 6,
    rate: float = 0.5,
    noise_scale: float = 0.1,
    schedule: Optional[Schedule] = None,
    tol_m: float = DEFAULT_TOL_M,
    y_max: float = DEFAULT_Y_MAX,
    limit: float = L2_LIMIT,
) -> PropertyReport:
    """Check that E_t(xi_n) -> E_t(xi) in L2 when xi_n -> xi in L2.

    xi_n = xi + rate^n * noise. With d_n the L2 distance at t_step and e_n
    the terminal distance, the parts are:
        decreasing: d_n strictly decreasing.
        limit: the last d_n within ``limit``.
        rate: on the fine half, d_n <= max(2 * kappa * e_n, tol_m + 1e-9)
            with kappa = max d_n / e_n over the coarse half.
        sandwich: E(xi_n ^ xi) <= E(xi_n) <= E(xi_n v xi) at every node
            (tolerance 1e-9).

    Raises:
        PreconditionError: If t_step is out of range or xi is outside the domain.
    """
    _check_step(t_step, lattice)
    sequence = make_claim_sequence(
        base, "perturb", count, lattice=lattice, seed=seed, rate=rate, noise_scale=noise_scale
    )
    reference = _fixed_schedule(g, phi, base, lattice, schedule, tol_m, y_max)
    _require_in_domain(reference, base)

    sandwich = ReportCollector("sandwich", EXACT_TOLERANCE)
    distances, sizes = [], []
    for n, claim in enumerate(sequence, start=1):
        y_n = _fixed_schedule(g, phi, claim, lattice, schedule, tol_m, y_max).limit_y
        distances.append(_l2_distance(y_n, reference.limit_y, lattice, t_step))
        sizes.append(_claim_distance(claim, base, lattice))

        low = pointwise_min(claim, base)
        high = pointwise_max(claim, base)
        y_low = _fixed_schedule(g, phi, low, lattice, schedule, tol_m, y_max).limit_y
        y_high = _fixed_schedule(g, phi, high, lattice, schedule, tol_m, y_max).limit_y
        below, where_below = _field_excess(y_low, y_n)
        above, where_above = _field_excess(y_n, y_high)
        where = where_below if below >= above else where_above
        sandwich.add(f"n={n}", max(below, above), **_location(where))

    rate_report, kappa = _rate_part(distances, sizes, tol_m + EXACT_TOLERANCE)
    return composite(
        "l2_continuity",
        [
            _decreasing_part(distances, strict=True),
            _limit_part(distances, limit),
            rate_report,
            sandwich.build(),
        ],
        t_step=t_step,
        seed=seed,
        kappa=kappa,
        distances=distances,
        claim_distances=sizes,
    )


def check_from_below(
    g: Generator,
    phi: Constraint,
    base: Claim,
    lattice: LatticeModel,
    t_step: int,
    count: int = 20,
    schedule: Optional[Schedule] = None,
    tol_m: float = DEFAULT_TOL_M,
    y_max: float = DEFAULT_Y_MAX,
) -> PropertyReport:
    """Check L2 convergence of E_t(xi_n) for xi_n = xi - 1/n increasing to xi.

    Parts are those of check_l2_continuity with the sandwich replaced by:
        below: E(xi_n) <= E(xi) at every node (tolerance 1e-9).
        monotone: E(xi_n) non-decreasing in n at every node (tolerance 1e-11).

    Raises:
        PreconditionError: If a term is not below xi, t_step is out of range
            or xi is outside the domain.
    """
    _check_step(t_step, lattice)
    sequence = make_claim_sequence(base, "shift", count, lattice=lattice)
    _require_below(sequence, base, lattice)
    _require_increasing(sequence, lattice)
    reference = _fixed_schedule(g, phi, base, lattice, schedule, tol_m, y_max)
    _require_in_domain(reference, base)

    below = ReportCollector("below", EXACT_TOLERANCE)
    monotone = ReportCollector("monotone", MONOTONE_TOLERANCE)
    distances, sizes = [], []
    previous: Optional[AdaptedField] = None
    for n, claim in enumerate(sequence, start=1):
        y_n = _fixed_schedule(g, phi, claim, lattice, schedule, tol_m, y_max).limit_y
        excess, where = _field_excess(y_n, reference.limit_y)
        below.add(f"n={n}", excess, **_location(where))
        if previous is not None:
            drop, where = _field_excess(previous, y_n)
            monotone.add(f"n={n}", drop, **_location(where))
        previous = y_n
        distances.append(_l2_distance(y_n, reference.limit_y, lattice, t_step))
        sizes.append(_claim_distance(claim, base, lattice))

    rate_report, kappa = _rate_part(distances, sizes, tol_m + EXACT_TOLERANCE)
    return composite(
        "from_below",
        [_decreasing_part(distances), rate_report, below.build(), monotone.build()],
        t_step=t_step,
        kappa=kappa,
        distances=distances,
    )


# ---------------------------------------------------------------------------
# Risk measure
# ---------------------------------------------------------------------------


def _require_risk_hypotheses(g: Generator, phi: Constraint) -> None:
    unmet = []
    if not g.vanishes_at_zero:
        unmet.append("generator must vanish at z = 0")
    if not g.independent_of_y:
        unmet.append("generator must not depend on y")
    if not phi.independent_of_y:
        unmet.append("constraint must not depend on y")
    if not (g.convex and phi.convex):
        unmet.append("generator and constraint must be convex")
    if unmet:
        raise RiskMeasureError(
            f"{g.describe()} with {phi.describe()} does not define a convex risk measure: "
            + "; ".join(unmet)
        )


def risk_measure(
    g: Generator,
    phi: Constraint,
    xi: Claim,
    lattice: LatticeModel,
    schedule: Optional[Schedule] = None,
    tol_m: float = DEFAULT_TOL_M,
    y_max: float = DEFAULT_Y_MAX,
) -> float:
    """rho(xi) = y_0 of the minimal constrained solution with terminal value -xi.

    Returns math.inf when -xi is outside the domain.

    Raises:
        RiskMeasureError: If g and phi do not satisfy the risk-measure hypotheses.
    """
    _require_risk_hypotheses(g, phi)
    result = _fixed_schedule(g, phi, negate(xi), lattice, schedule, tol_m, y_max)
    if not result.converged:
        logger.warning(f"rho({xi.describe()}) is infinite: {result.reason}")
        return math.inf
    return result.y0


def audit_risk_measure(
    g: Generator,
    phi: Constraint,
    lattice: LatticeModel,
    instances: int = 100,
    seed: int = 0,
    scale: float = RISK_CLAIM_SCALE,
    schedule: Optional[Schedule] = None,
    tol_m: float = DEFAULT_TOL_M,
    y_max: float = DEFAULT_Y_MAX,
    fatou_instances: int = 3,
    fatou_count: int = 100,
    fatou_budget: float = FATOU_BUDGET,
) -> PropertyReport:
    """Audit the axioms of rho on seeded table claims.

    Parts (tolerance 1e-9 unless noted):
        monotonicity: xi <= eta implies rho(xi) >= rho(eta).
        convexity: rho(a xi + (1-a) eta) <= a rho(xi) + (1-a) rho(eta).
        cash_invariance: rho(xi + c) = rho(xi) - c.
        fatou_monotone: rho(xi - 1/n) non-increasing in n (tolerance 1e-11).
        fatou_limit: |rho(xi - 1/count) - rho(xi)| within fatou_budget.

    Claims are uniform[-scale, scale] tables.
    """
    _require_risk_hypotheses(g, phi)
    rng = np.random.default_rng(seed)

    def rho(claim: Claim) -> float:
        return risk_measure(g, phi, claim, lattice, schedule, tol_m, y_max)

    monotonicity = ReportCollector("monotonicity", EXACT_TOLERANCE)
    convexity = ReportCollector("convexity", EXACT_TOLERANCE)
    cash = ReportCollector("cash_invariance", EXACT_TOLERANCE)
    fatou_monotone = ReportCollector("fatou_monotone", MONOTONE_TOLERANCE)
    fatou_limit = ReportCollector("fatou_limit", fatou_budget)

    for index in range(instances):
        xi = random_table_claim(lattice, rng, -scale, scale, label=f"xi[{index}]")
        other = random_table_claim(lattice, rng, -scale, scale, label=f"eta[{index}]")
        bump = random_table_claim(lattice, rng, 0.0, scale, label=f"bump[{index}]")
        a = float(rng.uniform(0.0, 1.0))
        c = float(rng.uniform(-scale, scale))

        rho_xi = rho(xi)
        rho_other = rho(other)
        monotonicity.add(f"claim[{index}]", rho(add(xi, bump)) - rho_xi)
        mixed = rho(convex_mix(a, xi, other))
        convexity.add(f"claim[{index}]", mixed - a * rho_xi - (1.0 - a) * rho_other, a=a)
        cash.add(f"claim[{index}]", abs(rho(shift(xi, c)) - rho_xi + c), c=c)

        if index < fatou_instances:
            values = [rho(term) for term in make_claim_sequence(xi, "shift", fatou_count)]
            drops = [later - earlier for earlier, later in zip(values, values[1:])]
            fatou_monotone.add(f"claim[{index}]", max(drops, default=0.0))
            fatou_limit.add(f"claim[{index}]", abs(values[-1] - rho_xi), value=values[-1])

    return composite(
        "risk_measure",
        [
            monotonicity.build(),
            convexity.build(),
            cash.build(),
            fatou_monotone.build(),
            fatou_limit.build(),
        ],
        seed=seed,
        generator=g.describe(),
        constraint=phi.describe(),
    )
