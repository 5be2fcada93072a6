"""Backward solver for unconstrained BSDEs on a lattice.

The generator is treated implicitly in y and explicitly in z:
z_i is the martingale coefficient of y_{i+1} and y_i solves
y_i = E[y_{i+1}] + h(t_i, y_i, z_i) * dt node by node.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from cbsde.lattice import AdaptedField, LatticeModel, accumulate_along_paths
from cbsde.model import Claim, Constraint, Generator

logger = logging.getLogger(__name__)

PICARD_TOLERANCE = 1e-14
PICARD_MAX_ITERATIONS = 100
NEWTON_MAX_ITERATIONS = 50
# Picard is used while the contraction factor stays at or below this value;
# above it the iteration count would exceed the Picard budget.
PICARD_FACTOR_LIMIT = 0.5
INCREMENT_FLOOR = -1e-12


class BSDEError(Exception):
    """Base exception for BSDE solver errors."""

    pass


class ContractionError(BSDEError):
    """Raised when the implicit step is not a contraction (L * dt >= 1)."""

    pass


class ConvergenceError(BSDEError):
    """Raised when the implicit step does not converge."""

    pass


@dataclass(frozen=True)
class Solution:
    """Adapted solution (y, z) of a BSDE.

    Attributes:
        y: Values at every step 0..n.
        z: Martingale coefficients at steps 0..n-1.
        iterations: Total fixed-point iterations spent.
    """

    y: AdaptedField
    z: AdaptedField
    iterations: int = 0

    @property
    def lattice(self) -> LatticeModel:
        return self.y.lattice

    @property
    def y0(self) -> float:
        return self.y.value(0, 0)


@dataclass(frozen=True)
class Supersolution:
    """A solution with an increasing part: dy = -g dt - dC + z dW.

    Attributes:
        y: Values at every step 0..n.
        z: Martingale coefficients at steps 0..n-1.
        c_increments: Increments of C over each step, indexed by the step's
            starting node (steps 0..n-1). C_0 = 0.
    """

    y: AdaptedField
    z: AdaptedField
    c_increments: AdaptedField

    def __post_init__(self):
        """Check that the increasing part does not decrease."""
        for step in self.c_increments.defined_steps:
            low = float(np.min(self.c_increments.at(step)))
            if low < INCREMENT_FLOOR:
                raise BSDEError(
                    f"Increasing part decreases at step {step} (min increment {low:.3e})"
                )

    @classmethod
    def from_solution(
        cls, solution: Solution, c_increments: Optional[AdaptedField] = None
    ) -> "Supersolution":
        """Lift a solution, with C = 0 unless increments are given."""
        if c_increments is None:
            lattice = solution.lattice
            c_increments = AdaptedField(
                lattice,
                {s: np.zeros(lattice.num_nodes(s)) for s in range(lattice.n_steps)},
            )
        return cls(solution.y, solution.z, c_increments)

    @property
    def lattice(self) -> LatticeModel:
        return self.y.lattice

    @property
    def y0(self) -> float:
        return self.y.value(0, 0)

    def cumulative(self) -> AdaptedField:
        """C along every path (on the full-tree expansion of the lattice)."""
        return accumulate_along_paths(self.c_increments, self.lattice)


@dataclass(frozen=True)
class EffectiveDriver:
    """The driver h = g + penalty * phi seen by the implicit step.

    Attributes:
        generator: Base generator g.
        constraint: Constraint phi, if penalized.
        penalty: Penalization level m >= 0.
    """

    generator: Generator
    constraint: Optional[Constraint] = None
    penalty: float = 0.0

    @property
    def penalized(self) -> bool:
        return self.constraint is not None and not self.constraint.is_trivial and self.penalty > 0

    def evaluate(self, t: float, y: np.ndarray, z: np.ndarray, w: np.ndarray) -> np.ndarray:
        value = self.generator.evaluate(t, y, z)
        if self.penalized:
            value = value + self.penalty * self.constraint.evaluate(t, y, z, w)
        return value

    def y_slope(self, t: float, y: np.ndarray, z: np.ndarray, w: np.ndarray) -> np.ndarray:
        slope = self.generator.y_slope(t, y, z)
        if self.penalized:
            slope = slope + self.penalty * self.constraint.y_slope(t, y, z, w)
        return slope

    @property
    def y_lipschitz(self) -> float:
        """Lipschitz constant of h in y."""
        value = self.generator.y_lipschitz
        if self.penalized:
            value += self.penalty * self.constraint.y_lipschitz
        return value

    @property
    def z_lipschitz(self) -> float:
        """Lipschitz constant of h in z."""
        value = self.generator.z_lipschitz
        if self.penalized:
            value += self.penalty * self.constraint.z_lipschitz
        return value

    @property
    def contraction_constant(self) -> float:
        """Constant L of the well-posedness bound L * dt < 1.

        Parts of phi that decrease in y keep the implicit equation monotone,
        so a y-only constraint adds nothing and a z-dependent one adds m * M_phi.
        """
        value = self.generator.lipschitz_constant
        if self.penalized:
            value += self.penalty * self.constraint.bound_constant
        return value

    def describe(self) -> str:
        if not self.penalized:
            return self.generator.describe()
        return f"{self.generator.describe()} + {self.penalty:g}*{self.constraint.describe()}"


def check_contraction(driver: EffectiveDriver, lattice: LatticeModel) -> None:
    """Raise if the implicit step is not well posed on this lattice.

    z is explicit, so the step is also monotone in (y_up, y_down) only while
    z_lipschitz * sqrt(dt) <= 1.

    Raises:
        ContractionError: If contraction_constant * dt >= 1 or
            z_lipschitz * sqrt(dt) > 1.
    """
    constant = driver.contraction_constant
    if not lattice.grid.is_stable(constant):
        raise ContractionError(
            f"Implicit step is not a contraction for {driver.describe()}: "
            f"L * dt = {constant:g} * {lattice.dt:g} = {constant * lattice.dt:g} >= 1; "
            f"refine the grid"
        )
    z_constant = driver.z_lipschitz
    if not lattice.grid.is_monotone(z_constant):
        raise ContractionError(
            f"Explicit z step is not monotone for {driver.describe()}: "
            f"L_z * sqrt(dt) = {z_constant:g} * {lattice.sqrt_dt:g} = "
            f"{z_constant * lattice.sqrt_dt:g} > 1; refine the grid"
        )


def implicit_step(
    driver: EffectiveDriver,
    t: float,
    expected: np.ndarray,
    z: np.ndarray,
    w: np.ndarray,
    dt: float,
) -> Tuple[np.ndarray, int]:
    """Solve y = expected + h(t, y, z) * dt at every node of a step.

    Uses Picard iteration from ``expected`` when the driver's y-Lipschitz
    constant times dt is small, Newton iteration on the monotone piecewise
    linear equation otherwise.

    Returns:
        Tuple of (y, iterations).

    Raises:
        ConvergenceError: If the iteration budget is exhausted.
    """
    if driver.y_lipschitz * dt <= PICARD_FACTOR_LIMIT:
        return _picard(driver, t, expected, z, w, dt)
    return _newton(driver, t, expected, z, w, dt)


def _converged(previous: np.ndarray, current: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(current))))
    return float(np.max(np.abs(current - previous))) <= PICARD_TOLERANCE * scale


def _picard(driver, t, expected, z, w, dt) -> Tuple[np.ndarray, int]:
    y = expected
    for iteration in range(1, PICARD_MAX_ITERATIONS + 1):
        y_next = expected + driver.evaluate(t, y, z, w) * dt
        if _converged(y, y_next):
            return y_next, iteration
        y = y_next
    raise ConvergenceError(
        f"Picard iteration did not converge in {PICARD_MAX_ITERATIONS} iterations at t={t:g}"
    )


def _newton(driver, t, expected, z, w, dt) -> Tuple[np.ndarray, int]:
    y = expected
    for iteration in range(1, NEWTON_MAX_ITERATIONS + 1):
        residual = y - driver.evaluate(t, y, z, w) * dt - expected
        slope = 1.0 - driver.y_slope(t, y, z, w) * dt
        if np.any(slope <= 0):
            raise ConvergenceError(f"Implicit equation is not monotone at t={t:g}")
        y_next = y - residual / slope
        if _converged(y, y_next):
            return y_next, iteration
        y = y_next
    raise ConvergenceError(
        f"Newton iteration did not converge in {NEWTON_MAX_ITERATIONS} iterations at t={t:g}"
    )


def backward_induction(driver: EffectiveDriver, claim: Claim, lattice: LatticeModel) -> Solution:
    """Run the implicit scheme from maturity back to step 0.

    No well-posedness check is made here; see check_contraction.
    """
    n = lattice.n_steps
    y: Dict[int, np.ndarray] = {n: claim.leaf_values(lattice)}
    z: Dict[int, np.ndarray] = {}
    total = 0
    for step in range(n - 1, -1, -1):
        z[step] = lattice.coefficient(y[step + 1], step)
        expected = lattice.expectation(y[step + 1], step)
        y[step], iterations = implicit_step(
            driver, lattice.time(step), expected, z[step], lattice.w(step), lattice.dt
        )
        total += iterations
    logger.debug(f"Solved {driver.describe()} on {lattice!r} in {total} iterations")
    return Solution(AdaptedField(lattice, y), AdaptedField(lattice, z), total)


def solve_bsde(g: Generator, xi: Claim, lattice: LatticeModel) -> Solution:
    """Solve y_t = xi + int_t^T g(s, y_s, z_s) ds - int_t^T z_s dW_s.

    Args:
        g: Generator.
        xi: Terminal claim.
        lattice: The lattice.

    Returns:
        The adapted solution.

    Raises:
        ContractionError: If M * dt >= 1.
        ConvergenceError: If an implicit step does not converge.
    """
    driver = EffectiveDriver(g)
    check_contraction(driver, lattice)
    return backward_induction(driver, xi, lattice)


def residual_check(s: Supersolution, g: Generator, lattice: LatticeModel) -> float:
    """Largest violation of the one-step supersolution identity.

    For every node and both children:
    |y_i - y_{i+1} - g(t_i, y_i, z_i) dt - dC_i + z_i dW|.

    Args:
        s: The supersolution, total on the lattice.
        g: Generator the identity is checked against.
        lattice: The lattice.

    Returns:
        The maximum residual.
    """
    worst = 0.0
    for step in range(lattice.n_steps):
        y_i = s.y.at(step)
        z_i = s.z.at(step)
        drift = g.evaluate(lattice.time(step), y_i, z_i) * lattice.dt + s.c_increments.at(step)
        up, down = lattice.children(step)
        y_next = s.y.at(step + 1)
        residual_up = np.abs(y_i - y_next[up] - drift + z_i * lattice.sqrt_dt)
        residual_down = np.abs(y_i - y_next[down] - drift - z_i * lattice.sqrt_dt)
        worst = max(worst, float(np.max(residual_up)), float(np.max(residual_down)))
    return worst
