"""Penalized BSDEs and the minimal constrained solution.

For a constraint phi >= 0 the penalized generator g + m * phi produces
solutions y^m that increase with m. Their limit along a geometric schedule
is the smallest supersolution whose (y, z) stays where phi = 0. A schedule
whose y_0 keeps growing signals a terminal value outside the domain.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from cbsde.bsde import (
    EffectiveDriver,
    Solution,
    Supersolution,
    backward_induction,
    check_contraction,
)
from cbsde.lattice import AdaptedField, LatticeModel, accumulate_along_paths
from cbsde.model import Claim, Constraint, Generator

logger = logging.getLogger(__name__)

DEFAULT_TOL_M = 1e-4
DEFAULT_Y_MAX = 1e6
STALL_RATIO = 0.9
INCREASING_PART_CAVEAT = (
    "increasing part is A^m at the final level; its convergence in m is not asserted"
)


class PenalizationError(Exception):
    """Base exception for penalization errors."""

    pass


class DomainStatus(str, Enum):
    """Whether a penalization schedule settled on a finite limit."""

    CONVERGED = "converged"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class Schedule:
    """Geometric penalty schedule m0, m0*growth, ... up to m_max.

    Attributes:
        m0: First level (> 0).
        growth: Factor between levels (> 1).
        m_max: Last admissible level (>= m0).
    """

    m0: float = 1.0
    growth: float = 2.0
    m_max: float = 2.0**16

    def __post_init__(self):
        """Validate the schedule after initialization."""
        if not self.m0 > 0:
            raise PenalizationError(f"Schedule 'm0' must be positive, got {self.m0}")
        if not self.growth > 1:
            raise PenalizationError(f"Schedule 'growth' must exceed 1, got {self.growth}")
        if self.m_max < self.m0:
            raise PenalizationError(
                f"Schedule 'm_max' ({self.m_max}) must be at least 'm0' ({self.m0})"
            )

    def levels(self) -> List[float]:
        """All penalty levels, in increasing order."""
        levels = []
        m = self.m0
        while m <= self.m_max * (1 + 1e-12):
            levels.append(m)
            m *= self.growth
        return levels


@dataclass(frozen=True)
class PenalizedRun:
    """Solution of the BSDE with generator g + m * phi.

    Attributes:
        m: Penalty level.
        solution: (y, z) of the penalized equation.
        a_increments: m * phi(t_i, y_i, z_i) * dt at steps 0..n-1.
    """

    m: float
    solution: Solution
    a_increments: AdaptedField

    @property
    def y(self) -> AdaptedField:
        return self.solution.y

    @property
    def z(self) -> AdaptedField:
        return self.solution.z

    @property
    def y0(self) -> float:
        return self.solution.y0

    def to_supersolution(self) -> Supersolution:
        """The run viewed as a supersolution for the base generator g."""
        return Supersolution(self.solution.y, self.solution.z, self.a_increments)


@dataclass(frozen=True)
class MinimalSolutionResult:
    """Outcome of a penalization schedule.

    Attributes:
        runs: One run per level that was solved.
        domain_status: converged or diverged.
        gap_trace: (m, |y_0^m - y_0 of previous level|); None at the first level.
        tolerance_met: Whether the final gap met tol_m.
        reason: Why the schedule stopped.
    """

    runs: List[PenalizedRun]
    domain_status: DomainStatus
    gap_trace: List[Tuple[float, Optional[float]]]
    tolerance_met: bool
    reason: str
    caveat: str = field(default=INCREASING_PART_CAVEAT)

    @property
    def final_run(self) -> PenalizedRun:
        return self.runs[-1]

    @property
    def limit_y(self) -> AdaptedField:
        return self.final_run.y

    @property
    def limit_supersolution(self) -> Supersolution:
        return self.final_run.to_supersolution()

    @property
    def y0(self) -> float:
        return self.final_run.y0

    @property
    def m_final(self) -> float:
        return self.final_run.m

    @property
    def converged(self) -> bool:
        return self.domain_status is DomainStatus.CONVERGED

    def monotonicity_violation(self) -> float:
        """Largest node-wise decrease of y^m between consecutive levels."""
        worst = 0.0
        for lower, higher in zip(self.runs, self.runs[1:]):
            worst = max(worst, (lower.y - higher.y).max_signed())
        return worst


def _as_driver(g: Generator, phi: Constraint, m: float) -> EffectiveDriver:
    if not m > 0:
        raise PenalizationError(f"Penalty level must be positive, got {m}")
    return EffectiveDriver(g, phi, float(m))


def solve_penalized(
    g: Generator, phi: Constraint, m: float, xi: Claim, lattice: LatticeModel
) -> PenalizedRun:
    """Solve the BSDE with generator g + m * phi.

    Args:
        g: Base generator.
        phi: Constraint.
        m: Penalty level (> 0).
        xi: Terminal claim.
        lattice: The lattice.

    Returns:
        The run with its penalty increments.

    Raises:
        PenalizationError: If m is not positive.
        ContractionError: If the penalized step is not a contraction; refine
            the grid before raising m.
    """
    driver = _as_driver(g, phi, m)
    check_contraction(driver, lattice)
    solution = backward_induction(driver, xi, lattice)

    increments = {}
    for step in range(lattice.n_steps):
        if driver.penalized:
            phi_values = phi.evaluate(
                lattice.time(step), solution.y.at(step), solution.z.at(step), lattice.w(step)
            )
            increments[step] = m * phi_values * lattice.dt
        else:
            increments[step] = np.zeros(lattice.num_nodes(step))
    return PenalizedRun(float(m), solution, AdaptedField(lattice, increments))


def penalization_ladder(
    g: Generator,
    phi: Constraint,
    xi: Claim,
    lattice: LatticeModel,
    schedule: Optional[Schedule] = None,
) -> List[PenalizedRun]:
    """Solve every level of a schedule, without early stopping."""
    schedule = schedule or Schedule()
    return [solve_penalized(g, phi, m, xi, lattice) for m in schedule.levels()]


def solve_minimal(
    g: Generator,
    phi: Constraint,
    xi: Claim,
    lattice: LatticeModel,
    schedule: Optional[Schedule] = None,
    tol_m: float = DEFAULT_TOL_M,
    y_max: float = DEFAULT_Y_MAX,
    stop_early: bool = True,
) -> MinimalSolutionResult:
    """Approximate the minimal constrained solution by penalization.

    The schedule stops converged once |y_0^m - y_0^{m_prev}| <= tol_m (only
    when stop_early), and diverged as soon as y_0^m > y_max. When the last
    level is reached, the result is diverged if the last gap exceeds 0.9
    times the previous one, converged otherwise; tolerance_met records
    whether the final gap met tol_m.

    Args:
        g: Base generator.
        phi: Constraint.
        xi: Terminal claim.
        lattice: The lattice.
        schedule: Penalty schedule (default m = 1, 2, 4, ..., 2^16).
        tol_m: Convergence tolerance on y_0 gaps.
        y_max: Divergence threshold on y_0.
        stop_early: Stop at the first gap within tol_m. Pass False to solve
            every level so that results for different claims share m.

    Returns:
        The schedule outcome.

    Raises:
        PenalizationError: On invalid tolerances.
        ContractionError: Propagated from any level.
    """
    schedule = schedule or Schedule()
    if not tol_m > 0:
        raise PenalizationError(f"'tol_m' must be positive, got {tol_m}")
    if not y_max > 0:
        raise PenalizationError(f"'y_max' must be positive, got {y_max}")

    runs: List[PenalizedRun] = []
    gap_trace: List[Tuple[float, Optional[float]]] = []
    for m in schedule.levels():
        run = solve_penalized(g, phi, m, xi, lattice)
        gap = abs(run.y0 - runs[-1].y0) if runs else None
        runs.append(run)
        gap_trace.append((m, gap))
        logger.debug(f"m={m:g}: y_0={run.y0:.12g} gap={gap}")

        if run.y0 > y_max:
            reason = f"y_0 = {run.y0:g} exceeded y_max = {y_max:g} at m = {m:g}"
            return _finish(runs, gap_trace, DomainStatus.DIVERGED, False, reason)
        if stop_early and gap is not None and gap <= tol_m:
            reason = f"gap {gap:.3e} within tol_m at m = {m:g}"
            return _finish(runs, gap_trace, DomainStatus.CONVERGED, True, reason)

    gaps = [gap for _, gap in gap_trace if gap is not None]
    if gaps and gaps[-1] <= tol_m:
        reason = f"final gap {gaps[-1]:.3e} within tol_m"
        return _finish(runs, gap_trace, DomainStatus.CONVERGED, True, reason)
    if len(gaps) >= 2 and gaps[-1] > STALL_RATIO * gaps[-2]:
        reason = f"gaps not shrinking at m_max ({gaps[-2]:.3e} -> {gaps[-1]:.3e})"
        return _finish(runs, gap_trace, DomainStatus.DIVERGED, False, reason)
    reason = "m_max reached with shrinking gaps above tol_m"
    return _finish(runs, gap_trace, DomainStatus.CONVERGED, False, reason)


def _finish(runs, gap_trace, status, tolerance_met, reason) -> MinimalSolutionResult:
    level = logging.WARNING if status is DomainStatus.DIVERGED else logging.INFO
    logger.log(level, f"Penalization {status.value}: {reason}")
    return MinimalSolutionResult(runs, status, gap_trace, tolerance_met, reason)


def extract_increasing_part(run: PenalizedRun) -> AdaptedField:
    """Cumulative penalty A^m along every path, with A_0 = 0.

    The result lives on the full-tree expansion of the run's lattice.
    """
    return accumulate_along_paths(run.a_increments, run.y.lattice)
