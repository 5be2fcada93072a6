"""Unit tests for penalize module."""

import numpy as np
import pytest

from cbsde.bsde import ContractionError, residual_check, solve_bsde
from cbsde.lattice import LatticeMode, build_lattice
from cbsde.model import (
    Barrier,
    Claim,
    Constraint,
    Generator,
    negate,
    pointwise_max,
)
from cbsde.penalize import (
    DomainStatus,
    PenalizationError,
    Schedule,
    extract_increasing_part,
    penalization_ladder,
    solve_minimal,
    solve_penalized,
)


@pytest.fixture
def lattice():
    """Recombining lattice with 16 steps on [0, 1]."""
    return build_lattice(1.0, 16)


@pytest.fixture
def abs_w_claim():
    """The claim |W_T|."""
    return pointwise_max(Claim.terminal_w(), negate(Claim.terminal_w()))


class TestSchedule:
    """Test cases for Schedule class."""

    def test_default_levels(self):
        """Test m = 1, 2, 4, ..., 2^16."""
        levels = Schedule().levels()
        assert levels[0] == 1.0
        assert levels[-1] == 2.0**16
        assert len(levels) == 17

    def test_custom_levels(self):
        """Test a custom geometric schedule."""
        assert Schedule(m0=2, growth=4, m_max=128).levels() == [2, 8, 32, 128]

    def test_invalid(self):
        """Test schedule validation."""
        with pytest.raises(PenalizationError, match="'m0' must be positive"):
            Schedule(m0=0)
        with pytest.raises(PenalizationError, match="'growth' must exceed 1"):
            Schedule(growth=1.0)
        with pytest.raises(PenalizationError, match="must be at least 'm0'"):
            Schedule(m0=8, m_max=4)


class TestSolvePenalized:
    """Test cases for solve_penalized."""

    def test_residual_against_base_generator(self, lattice, abs_w_claim):
        """Test that a penalized run is a supersolution for g."""
        g = Generator.discount(1.0)
        phi = Constraint.reflect_below(Barrier.abs_w(1.0))
        run = solve_penalized(g, phi, 256.0, abs_w_claim, lattice)
        assert run.m == 256.0
        assert residual_check(run.to_supersolution(), g, lattice) <= 1e-10
        assert run.a_increments.min_signed() >= 0.0
        assert run.a_increments.max_signed() > 0.0

    def test_trivial_constraint(self, lattice):
        """Test that phi = none reproduces the unconstrained solution."""
        g = Generator.abs_z(0.5)
        claim = Claim.call(0.0)
        run = solve_penalized(g, Constraint.none(), 100.0, claim, lattice)
        assert run.y0 == solve_bsde(g, claim, lattice).y0
        assert run.a_increments.max_abs() == 0.0

    def test_y_floor_rises_toward_floor(self):
        """Test y_0^m = -1 / (1 + m) for y_floor{0} and xi = -1 on one step."""
        lattice = build_lattice(1.0, 1)
        runs = penalization_ladder(
            Generator.zero(),
            Constraint.y_floor(0.0),
            Claim.constant(-1.0),
            lattice,
            Schedule(m_max=1024),
        )
        values = [run.y0 for run in runs]
        assert values == pytest.approx([-1.0 / (1.0 + run.m) for run in runs], abs=1e-12)
        assert all(later > earlier for earlier, later in zip(values, values[1:]))
        assert -1.0 < values[0] and values[-1] < 0.0

    def test_non_positive_penalty(self, lattice):
        """Test that m must be positive."""
        with pytest.raises(PenalizationError, match="must be positive"):
            solve_penalized(Generator.zero(), Constraint.none(), 0.0, Claim.terminal_w(), lattice)

    def test_contraction_propagates(self):
        """Test that an ill-posed generator is rejected at every level."""
        lattice = build_lattice(1.0, 4)
        with pytest.raises(ContractionError):
            solve_penalized(
                Generator.linear(5.0, 0.0), Constraint.z_ball(1.0), 1.0, Claim.terminal_w(), lattice
            )

    def test_ladder_solves_every_level(self, lattice):
        """Test that the ladder does not stop early."""
        runs = penalization_ladder(
            Generator.zero(), Constraint.none(), Claim.terminal_w(), lattice, Schedule(m_max=8)
        )
        assert [run.m for run in runs] == [1.0, 2.0, 4.0, 8.0]

    def test_increasing_part(self):
        """Test the cumulative penalty along paths."""
        lattice = build_lattice(1.0, 4)
        phi = Constraint.reflect_below(Barrier.constant(0.0))
        run = solve_penalized(Generator.zero(), phi, 8.0, Claim.terminal_w(), lattice)
        total = extract_increasing_part(run)
        assert total.lattice.mode is LatticeMode.FULL_TREE
        assert list(total.at(0)) == [0.0]
        for step in range(4):
            up, down = total.lattice.children(step)
            parent = total.at(step)
            assert np.all(total.at(step + 1)[up] >= parent)
            assert np.all(total.at(step + 1)[down] >= parent)
        assert total.at(4).max() > 0.0


class TestSolveMinimal:
    """Test cases for solve_minimal."""

    def test_inactive_barrier_converges(self, lattice):
        """Test a nonnegative claim above a zero barrier."""
        phi = Constraint.reflect_below(Barrier.constant(0.0))
        result = solve_minimal(
            Generator.zero(), phi, Claim.max_with(0.0), lattice, Schedule(m_max=4096)
        )
        assert result.domain_status is DomainStatus.CONVERGED
        assert result.tolerance_met
        assert result.m_final == 2.0
        assert result.gap_trace[0] == (1.0, None)

    def test_monotone_in_m(self, lattice, abs_w_claim):
        """Test that y^m is node-wise non-decreasing along the schedule."""
        phi = Constraint.reflect_below(Barrier.abs_w(1.0))
        result = solve_minimal(
            Generator.discount(1.0),
            phi,
            abs_w_claim,
            lattice,
            Schedule(m_max=4096),
            stop_early=False,
        )
        assert len(result.runs) == 13
        assert result.monotonicity_violation() <= 1e-11
        assert result.converged
        gaps = [gap for _, gap in result.gap_trace[1:]]
        assert gaps[-1] < gaps[-2]

    def test_trivial_constraint_stops_early(self, lattice):
        """Test that phi = none converges at the second level."""
        result = solve_minimal(Generator.drift(0.7), Constraint.none(), Claim.terminal_w(), lattice)
        assert result.converged
        assert result.tolerance_met
        assert len(result.runs) == 2
        assert result.y0 == pytest.approx(0.7, abs=1e-10)
        assert "within tol_m" in result.reason

    def test_doubling_gaps_diverge(self):
        """Test that y_0^m = m T for z_ball{0} and xi = W_T is flagged diverged."""
        lattice = build_lattice(1.0, 64)
        result = solve_minimal(
            Generator.zero(),
            Constraint.z_ball(0.0),
            Claim.terminal_w(),
            lattice,
            Schedule(m_max=8),
        )
        assert [run.y0 for run in result.runs] == pytest.approx([1.0, 2.0, 4.0, 8.0], abs=1e-9)
        assert result.domain_status is DomainStatus.DIVERGED
        assert not result.tolerance_met
        assert "not shrinking" in result.reason

    def test_y_max_divergence(self):
        """Test the early stop when y_0 exceeds y_max."""
        lattice = build_lattice(1.0, 64)
        result = solve_minimal(
            Generator.zero(),
            Constraint.z_ball(0.0),
            Claim.terminal_w(),
            lattice,
            Schedule(m_max=8),
            y_max=3.0,
        )
        assert result.domain_status is DomainStatus.DIVERGED
        assert "exceeded y_max" in result.reason
        assert result.y0 > 3.0
        assert result.m_final == 4.0

    def test_z_penalty_beyond_grid(self):
        """Test that a z-penalty too large for the grid is refused at that level."""
        lattice = build_lattice(1.0, 16)
        with pytest.raises(ContractionError, match="not monotone"):
            solve_minimal(
                Generator.zero(),
                Constraint.z_ball(1.0),
                Claim.terminal_w(),
                lattice,
                Schedule(m_max=8),
                stop_early=False,
            )

    def test_shrinking_gaps_without_tolerance(self, lattice, abs_w_claim):
        """Test converged status with tolerance_met = False at m_max."""
        phi = Constraint.reflect_below(Barrier.abs_w(1.0))
        result = solve_minimal(
            Generator.discount(1.0),
            phi,
            abs_w_claim,
            lattice,
            Schedule(m0=64, m_max=512),
            tol_m=1e-12,
        )
        assert result.converged
        assert not result.tolerance_met
        assert "shrinking gaps" in result.reason

    def test_invalid_tolerances(self, lattice):
        """Test tolerance validation."""
        with pytest.raises(PenalizationError, match="'tol_m' must be positive"):
            solve_minimal(
                Generator.zero(), Constraint.none(), Claim.terminal_w(), lattice, tol_m=0.0
            )
        with pytest.raises(PenalizationError, match="'y_max' must be positive"):
            solve_minimal(
                Generator.zero(), Constraint.none(), Claim.terminal_w(), lattice, y_max=-1.0
            )

    def test_limit_supersolution(self, lattice, abs_w_claim):
        """Test that the limit carries the final-level increasing part."""
        g = Generator.discount(1.0)
        phi = Constraint.reflect_below(Barrier.abs_w(1.0))
        result = solve_minimal(g, phi, abs_w_claim, lattice, Schedule(m_max=64))
        s = result.limit_supersolution
        assert residual_check(s, g, lattice) <= 1e-10
        assert "not asserted" in result.caveat
