"""Unit tests for reflected module."""

import math

import numpy as np
import pytest

from cbsde.bsde import residual_check
from cbsde.lattice import build_lattice
from cbsde.model import Barrier, Claim, Constraint, Generator, negate, pointwise_max
from cbsde.penalize import Schedule, solve_minimal
from cbsde.reflected import (
    TerminalConsistencyError,
    barrier_violation,
    complementarity_violation,
    estimate_terminal_sensitivity,
    solve_reflected,
)


@pytest.fixture
def abs_w_claim():
    """The claim |W_T|."""
    return pointwise_max(Claim.terminal_w(), negate(Claim.terminal_w()))


class TestSolveReflected:
    """Test cases for solve_reflected."""

    def test_two_step_example(self):
        """Test the hand-computed two-step call above a zero barrier."""
        lattice = build_lattice(1.0, 2)
        s = solve_reflected(Generator.zero(), Barrier.constant(0.0), Claim.max_with(0.0), lattice)
        assert s.y0 == pytest.approx(math.sqrt(0.5) / 2.0, abs=1e-15)
        np.testing.assert_allclose(s.y.at(1), [0.0, math.sqrt(0.5)], atol=1e-15)
        assert s.c_increments.max_abs() == 0.0

    def test_binding_barrier(self):
        """Test that y is lifted to the barrier where the free value is below it."""
        lattice = build_lattice(1.0, 2)
        s = solve_reflected(
            Generator.zero(), Barrier.constant(0.0), Claim.table([0.0, 0.0, 0.0]), lattice
        )
        assert s.y0 == 0.0
        assert s.c_increments.max_abs() == 0.0

        # discounting pulls the free value below the barrier at every node
        s = solve_reflected(
            Generator.discount(1.0), Barrier.constant(1.0), Claim.constant(1.0), lattice
        )
        np.testing.assert_allclose(s.y.at(1), [1.0, 1.0])
        assert s.y0 == 1.0
        np.testing.assert_allclose(s.c_increments.at(0), [0.5], atol=1e-15)
        np.testing.assert_allclose(s.c_increments.at(1), [0.5, 0.5], atol=1e-15)

    def test_increments_on_binding_nodes(self, abs_w_claim):
        """Test dC > 0 only where y sits on the barrier."""
        lattice = build_lattice(1.0, 16)
        barrier = Barrier.abs_w(1.0)
        g = Generator.discount(1.0)
        s = solve_reflected(g, barrier, abs_w_claim, lattice)
        assert s.c_increments.max_signed() > 0.0
        assert residual_check(s, g, lattice) <= 1e-10
        assert complementarity_violation(s, barrier, lattice) <= 1e-10
        assert barrier_violation(s, barrier, lattice) <= 0.0
        for step in range(lattice.n_steps):
            pushed = s.c_increments.at(step) > 0
            np.testing.assert_allclose(
                s.y.at(step)[pushed], barrier.values(lattice, step)[pushed], atol=1e-15
            )

    def test_terminal_below_barrier(self):
        """Test that a claim below the barrier at maturity is rejected."""
        lattice = build_lattice(1.0, 4)
        with pytest.raises(TerminalConsistencyError, match="lies below barrier"):
            solve_reflected(Generator.zero(), Barrier.constant(0.0), Claim.terminal_w(), lattice)

    def test_matches_penalization_inactive(self):
        """Test agreement with penalization when the barrier never binds."""
        lattice = build_lattice(1.0, 16)
        barrier = Barrier.constant(0.0)
        claim = Claim.max_with(0.0)
        oracle = solve_reflected(Generator.zero(), barrier, claim, lattice)
        result = solve_minimal(
            Generator.zero(),
            Constraint.reflect_below(barrier),
            claim,
            lattice,
            Schedule(m_max=4096),
            stop_early=False,
        )
        assert abs(result.y0 - oracle.y0) <= 1e-12

    def test_matches_penalization_binding(self, abs_w_claim):
        """Test agreement with the penalization limit on a binding barrier."""
        lattice = build_lattice(1.0, 16)
        barrier = Barrier.abs_w(1.0)
        g = Generator.discount(1.0)
        oracle = solve_reflected(g, barrier, abs_w_claim, lattice)
        result = solve_minimal(
            g,
            Constraint.reflect_below(barrier),
            abs_w_claim,
            lattice,
            Schedule(m_max=4096),
            stop_early=False,
        )
        runs = {run.m: run for run in result.runs}
        gap_1024 = abs(runs[1024.0].y0 - oracle.y0)
        gap_4096 = abs(runs[4096.0].y0 - oracle.y0)
        assert gap_4096 <= 1e-2
        assert gap_4096 <= 0.6 * gap_1024
        # penalized solutions approach the reflected one from below
        assert (result.limit_y - oracle.y).max_signed() <= 1e-10


class TestTerminalSensitivity:
    """Test cases for estimate_terminal_sensitivity."""

    def test_ratios_bounded(self):
        """Test that y_0 moves by at most the size of the terminal bump."""
        lattice = build_lattice(1.0, 8)
        sensitivity = estimate_terminal_sensitivity(
            Generator.zero(), Barrier.constant(0.0), Claim.max_with(0.0), lattice, samples=4
        )
        assert [scale for scale, _ in sensitivity.ratios] == [1e-1, 1e-2, 1e-3]
        assert 0.0 < sensitivity.max_ratio <= 1.0 + 1e-9

    def test_deterministic(self):
        """Test that the estimate is reproducible for a seed."""
        lattice = build_lattice(1.0, 6)
        args = (Generator.abs_z(0.5), Barrier.constant(0.0), Claim.max_with(0.0), lattice)
        first = estimate_terminal_sensitivity(*args, samples=3, seed=5)
        second = estimate_terminal_sensitivity(*args, samples=3, seed=5)
        assert first == second
