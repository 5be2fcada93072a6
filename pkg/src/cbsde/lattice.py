"""Discrete model of the Brownian filtration.

This module provides the time grid, the binomial node tree (recombining or
full), node probabilities, exact one-step conditional expectations and the
two-point martingale representation used by every solver in the package.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

import numpy as np

MAX_FULL_TREE_STEPS = 24


class LatticeError(Exception):
    """Base exception for lattice errors."""

    pass


class LatticeMode(str, Enum):
    """Node addressing scheme of a lattice."""

    RECOMBINING = "recombining"
    FULL_TREE = "full_tree"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, horizon].

    Attributes:
        horizon: Terminal time T (> 0).
        n_steps: Number of steps (>= 1).
    """

    horizon: float
    n_steps: int

    def __post_init__(self):
        """Validate the grid after initialization."""
        if not isinstance(self.n_steps, int) or isinstance(self.n_steps, bool):
            raise LatticeError("Grid 'n_steps' must be an integer")
        if not math.isfinite(self.horizon) or self.horizon <= 0:
            raise LatticeError(f"Grid 'horizon' must be positive, got {self.horizon}")
        if self.n_steps < 1:
            raise LatticeError(f"Grid 'n_steps' must be at least 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        """Step length horizon / n_steps."""
        return self.horizon / self.n_steps

    @property
    def sqrt_dt(self) -> float:
        """Size of one Brownian increment."""
        return math.sqrt(self.dt)

    def time(self, step: int) -> float:
        """Return t_i for a step index."""
        return step * self.dt

    def is_stable(self, lipschitz: float) -> bool:
        """Check the implicit-stepping bound lipschitz * dt < 1."""
        return lipschitz * self.dt < 1.0

    def is_monotone(self, z_lipschitz: float) -> bool:
        """Check z_lipschitz * sqrt(dt) <= 1, so both child weights stay nonnegative."""
        return z_lipschitz * self.sqrt_dt <= 1.0


class LatticeModel:
    """Binomial lattice carrying the discrete filtration.

    Each non-terminal node has an up child (increment +sqrt(dt)) and a down
    child (increment -sqrt(dt)), each reached with probability 1/2.

    Recombining nodes at step i are indexed by the up-count k (0..i). Full-tree
    nodes are indexed by the path bits b (0..2^i - 1); the child of b is 2b
    (down) or 2b + 1 (up).
    """

    def __init__(self, grid: TimeGrid, mode: Union[LatticeMode, str] = LatticeMode.RECOMBINING):
        """Build the lattice.

        Args:
            grid: The time grid.
            mode: Node addressing scheme.

        Raises:
            LatticeError: If the mode is unknown or the full tree is too deep.
        """
        try:
            self.mode = LatticeMode(mode)
        except ValueError:
            raise LatticeError(
                f"Unknown lattice mode '{mode}'. "
                f"Expected one of: {', '.join(m.value for m in LatticeMode)}"
            )
        if self.mode is LatticeMode.FULL_TREE and grid.n_steps > MAX_FULL_TREE_STEPS:
            raise LatticeError(
                f"Full tree supports at most {MAX_FULL_TREE_STEPS} steps, got {grid.n_steps}"
            )
        self.grid = grid
        self._w_cache: Dict[int, np.ndarray] = {}
        self._p_cache: Dict[int, np.ndarray] = {}

    def __repr__(self) -> str:
        return (
            f"LatticeModel(horizon={self.grid.horizon}, n_steps={self.grid.n_steps}, "
            f"mode={self.mode.value})"
        )

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    @property
    def dt(self) -> float:
        return self.grid.dt

    @property
    def sqrt_dt(self) -> float:
        return self.grid.sqrt_dt

    @property
    def is_recombining(self) -> bool:
        return self.mode is LatticeMode.RECOMBINING

    def num_nodes(self, step: int) -> int:
        """Return the number of nodes at a step."""
        self._check_step(step)
        return step + 1 if self.is_recombining else 2**step

    @property
    def node_count(self) -> int:
        """Total number of nodes over all steps."""
        n = self.n_steps
        if self.is_recombining:
            return (n + 1) * (n + 2) // 2
        return 2 ** (n + 1) - 1

    @property
    def num_leaves(self) -> int:
        return self.num_nodes(self.n_steps)

    def time(self, step: int) -> float:
        return self.grid.time(step)

    def w(self, step: int) -> np.ndarray:
        """Return the Brownian value at every node of a step (read-only)."""
        self._check_step(step)
        if step not in self._w_cache:
            if self.is_recombining:
                k = np.arange(step + 1, dtype=float)
            else:
                k = _popcount(np.arange(2**step, dtype=np.int64), step).astype(float)
            values = (2.0 * k - step) * self.sqrt_dt
            values.setflags(write=False)
            self._w_cache[step] = values
        return self._w_cache[step]

    def probabilities(self, step: int) -> np.ndarray:
        """Return the probability of every node of a step (read-only)."""
        self._check_step(step)
        if step not in self._p_cache:
            if self.is_recombining:
                total = 2**step
                values = np.array([math.comb(step, k) / total for k in range(step + 1)])
            else:
                values = np.full(2**step, 0.5**step)
            values.setflags(write=False)
            self._p_cache[step] = values
        return self._p_cache[step]

    def children(self, step: int) -> Tuple[np.ndarray, np.ndarray]:
        """Return (up, down) child indices at step + 1 for every node of a step.

        Raises:
            LatticeError: If the step is terminal.
        """
        self._check_step(step)
        if step >= self.n_steps:
            raise LatticeError(f"Terminal step {step} has no children")
        nodes = np.arange(self.num_nodes(step))
        if self.is_recombining:
            return nodes + 1, nodes
        return 2 * nodes + 1, 2 * nodes

    def expectation(self, values_next: np.ndarray, step: int) -> np.ndarray:
        """Conditional expectation of step+1 values, evaluated at step."""
        up, down = self.children(step)
        self._check_values(values_next, step + 1)
        return 0.5 * (values_next[up] + values_next[down])

    def coefficient(self, values_next: np.ndarray, step: int) -> np.ndarray:
        """Martingale-representation coefficient of step+1 values at step."""
        up, down = self.children(step)
        self._check_values(values_next, step + 1)
        return (values_next[up] - values_next[down]) / (2.0 * self.sqrt_dt)

    def full_tree(self) -> "LatticeModel":
        """Return the full-tree lattice over the same grid."""
        if not self.is_recombining:
            return self
        return LatticeModel(self.grid, LatticeMode.FULL_TREE)

    def path_index(self, step: int) -> np.ndarray:
        """Map every full-tree node at a step to this lattice's node index."""
        if step > MAX_FULL_TREE_STEPS:
            raise LatticeError(
                f"Path expansion supports at most {MAX_FULL_TREE_STEPS} steps, got {step}"
            )
        paths = np.arange(2**step, dtype=np.int64)
        if self.is_recombining:
            return _popcount(paths, step)
        return paths

    def _check_step(self, step: int) -> None:
        if step < 0 or step > self.n_steps:
            raise LatticeError(f"Step {step} outside [0, {self.n_steps}]")

    def _check_values(self, values: np.ndarray, step: int) -> None:
        expected = self.num_nodes(step)
        if values.shape != (expected,):
            raise LatticeError(
                f"Missing child values at step {step}: expected {expected} nodes, "
                f"got shape {values.shape}"
            )


def _popcount(values: np.ndarray, bits: int) -> np.ndarray:
    count = np.zeros_like(values)
    for j in range(bits):
        count += (values >> j) & 1
    return count


class AdaptedField:
    """A real value at every node of a contiguous range of steps.

    Per-step arrays are copied and frozen on construction.
    """

    def __init__(self, lattice: LatticeModel, values: Mapping[int, Iterable[float]]):
        """Create a field and check totality.

        Args:
            lattice: The lattice the field lives on.
            values: Mapping step -> values of every node at that step.

        Raises:
            LatticeError: If steps are not contiguous or a step is incomplete.
        """
        if not values:
            raise LatticeError("An adapted field must cover at least one step")
        steps = sorted(values)
        if steps != list(range(steps[0], steps[-1] + 1)):
            raise LatticeError(f"Field steps must be contiguous, got {steps}")

        self.lattice = lattice
        self._values: Dict[int, np.ndarray] = {}
        for step in steps:
            array = np.array(values[step], dtype=float)
            expected = lattice.num_nodes(step)
            if array.shape != (expected,):
                raise LatticeError(
                    f"Field is not total at step {step}: expected {expected} values, "
                    f"got shape {array.shape}"
                )
            array.setflags(write=False)
            self._values[step] = array
        self.defined_steps = range(steps[0], steps[-1] + 1)

    def __repr__(self) -> str:
        return (
            f"AdaptedField(steps={self.defined_steps.start}..{self.defined_steps.stop - 1}, "
            f"lattice={self.lattice!r})"
        )

    def __contains__(self, step: int) -> bool:
        return step in self._values

    def at(self, step: int) -> np.ndarray:
        """Return the values of every node at a step.

        Raises:
            LatticeError: If the step is not covered.
        """
        if step not in self._values:
            raise LatticeError(
                f"Step {step} not covered by field "
                f"(covers {self.defined_steps.start}..{self.defined_steps.stop - 1})"
            )
        return self._values[step]

    def value(self, step: int, node: int) -> float:
        return float(self.at(step)[node])

    def __sub__(self, other: "AdaptedField") -> "AdaptedField":
        common = [s for s in self.defined_steps if s in other]
        return AdaptedField(self.lattice, {s: self.at(s) - other.at(s) for s in common})

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self._values.values())

    def max_signed(self) -> float:
        """Largest value over all covered nodes."""
        return max(float(np.max(v)) for v in self._values.values())

    def min_signed(self) -> float:
        """Smallest value over all covered nodes."""
        return min(float(np.min(v)) for v in self._values.values())

    @classmethod
    def single(cls, lattice: LatticeModel, step: int, values: Iterable[float]) -> "AdaptedField":
        """Create a field covering one step."""
        return cls(lattice, {step: values})

    @classmethod
    def from_function(cls, lattice: LatticeModel, steps: Iterable[int], func) -> "AdaptedField":
        """Create a field from func(t, w) evaluated on the given steps."""
        return cls(lattice, {s: func(lattice.time(s), lattice.w(s)) for s in steps})


def build_lattice(
    horizon: float, n_steps: int, mode: Union[LatticeMode, str] = LatticeMode.RECOMBINING
) -> LatticeModel:
    """Build a lattice over [0, horizon] with n_steps steps.

    Args:
        horizon: Terminal time (> 0).
        n_steps: Number of steps (>= 1; <= 24 for the full tree).
        mode: "recombining" or "full_tree".

    Returns:
        The lattice.

    Raises:
        LatticeError: On a non-positive horizon or a step-count guard violation.
    """
    return LatticeModel(TimeGrid(float(horizon), n_steps), mode)


def _target_step(field_next: AdaptedField, step: Optional[int]) -> int:
    if step is None:
        if len(field_next.defined_steps) != 1:
            raise LatticeError(
                "Target step is ambiguous for a field covering several steps; pass 'step'"
            )
        step = field_next.defined_steps.start - 1
    if step + 1 not in field_next:
        raise LatticeError(f"Missing child values: field does not cover step {step + 1}")
    return step


def conditional_expectation(
    field_next: AdaptedField, lattice: LatticeModel, step: Optional[int] = None
) -> AdaptedField:
    """Return E[X_{i+1} | F_i] as a field at step i.

    Args:
        field_next: Field covering step i + 1.
        lattice: The lattice.
        step: Target step i. Defaults to one before a single-step field.

    Returns:
        Field at step i with value (up + down) / 2.

    Raises:
        LatticeError: If child values are missing.
    """
    step = _target_step(field_next, step)
    return AdaptedField.single(lattice, step, lattice.expectation(field_next.at(step + 1), step))


def martingale_coefficient(
    field_next: AdaptedField, lattice: LatticeModel, step: Optional[int] = None
) -> AdaptedField:
    """Return the dW coefficient of X_{i+1} as a field at step i.

    Args:
        field_next: Field covering step i + 1.
        lattice: The lattice.
        step: Target step i. Defaults to one before a single-step field.

    Returns:
        Field at step i with value (up - down) / (2 sqrt(dt)).

    Raises:
        LatticeError: If child values are missing.
    """
    step = _target_step(field_next, step)
    return AdaptedField.single(lattice, step, lattice.coefficient(field_next.at(step + 1), step))


def l2_norm(field_or_claim, lattice: LatticeModel, step: Optional[int] = None) -> float:
    """Return sqrt(E[X^2]) of a field at a step, or of a claim at maturity.

    Args:
        field_or_claim: An AdaptedField or any object with leaf_values(lattice).
        lattice: The lattice.
        step: Step of the field. Ignored for claims (always the terminal step).

    Returns:
        The L2 norm.
    """
    if isinstance(field_or_claim, AdaptedField):
        if step is None:
            step = field_or_claim.defined_steps.stop - 1
        values = field_or_claim.at(step)
    else:
        step = lattice.n_steps
        values = field_or_claim.leaf_values(lattice)
    return math.sqrt(float(np.dot(lattice.probabilities(step), values * values)))


def accumulate_along_paths(increments: AdaptedField, lattice: LatticeModel) -> AdaptedField:
    """Cumulate per-node increments along every path of the full tree.

    The result lives on the full-tree expansion of the lattice, since a
    recombining node is reached by several paths with different histories.
    Its value is 0 at step 0 and covers steps 0..n.

    Args:
        increments: Field of increments over steps 0..n-1.
        lattice: The lattice the increments live on.

    Returns:
        The cumulative process on the full tree.
    """
    tree = lattice.full_tree()
    totals = {0: np.zeros(1)}
    for step in range(lattice.n_steps):
        parents = np.arange(2 ** (step + 1), dtype=np.int64) >> 1
        own = increments.at(step)[lattice.path_index(step)]
        totals[step + 1] = totals[step][parents] + own[parents]
    return AdaptedField(tree, totals)
