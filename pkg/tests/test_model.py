"""Unit tests for model module."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbsde.lattice import build_lattice, l2_norm
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

GENERATORS = [
    Generator.zero(),
    Generator.linear(0.5, -2.0),
    Generator.discount(0.1),
    Generator.drift(0.7),
    Generator.abs_z(1.0),
]
CONSTRAINTS = [
    Constraint.none(),
    Constraint.reflect_below(Barrier.constant(0.0)),
    Constraint.reflect_below(Barrier.abs_w(1.0)),
    Constraint.z_ball(1.0),
    Constraint.y_floor(-0.5),
    Constraint.z_interval(-1.0, 2.0),
]


class TestGenerator:
    """Test cases for Generator class."""

    def test_evaluate_catalog(self):
        """Test the formula of every generator kind."""
        assert evaluate_generator(Generator.zero(), 0.0, 3.0, 4.0) == 0.0
        assert evaluate_generator(Generator.linear(2.0, -1.0), 0.0, 3.0, 4.0) == 2.0
        assert evaluate_generator(Generator.discount(0.5), 0.0, 3.0, 4.0) == -1.5
        assert evaluate_generator(Generator.drift(0.7), 0.0, 3.0, 4.0) == pytest.approx(2.8)
        assert evaluate_generator(Generator.abs_z(2.0), 0.0, 3.0, -4.0) == 8.0

    def test_evaluate_scalar_returns_float(self):
        """Test that scalar inputs give a float and arrays give arrays."""
        assert isinstance(evaluate_generator(Generator.drift(1.0), 0.0, 1.0, 1.0), float)
        result = evaluate_generator(Generator.drift(1.0), 0.0, np.zeros(3), np.ones(3))
        assert isinstance(result, np.ndarray)
        assert result.shape == (3,)

    def test_metadata(self):
        """Test derived Lipschitz constants and y-dependence."""
        g = Generator.linear(0.5, -2.0)
        assert g.lipschitz_constant == 2.0
        assert g.y_lipschitz == 0.5
        assert not g.independent_of_y
        assert not g.vanishes_at_zero

        g = Generator.abs_z(0.5)
        assert g.lipschitz_constant == 0.5
        assert g.independent_of_y
        assert g.vanishes_at_zero
        assert g.convex

    def test_z_lipschitz(self):
        """Test the z part of the Lipschitz constant."""
        assert Generator.linear(0.5, -2.0).z_lipschitz == 2.0
        assert Generator.drift(-0.7).z_lipschitz == 0.7
        assert Generator.abs_z(0.5).z_lipschitz == 0.5
        assert Generator.discount(3.0).z_lipschitz == 0.0

    def test_unknown_kind(self):
        """Test that an unknown kind names the available ones."""
        with pytest.raises(ModelError, match="Unknown generator kind 'quadratic'") as info:
            Generator("quadratic")
        assert info.value.key == "generator.kind"

    def test_missing_parameter(self):
        """Test that a missing parameter is reported with its key."""
        with pytest.raises(ModelError, match="requires parameter") as info:
            Generator("linear", {"a": 1.0})
        assert info.value.key == "generator.b"

    def test_unknown_parameter(self):
        """Test that extra parameters are rejected."""
        with pytest.raises(ModelError, match="does not accept"):
            Generator("discount", {"r": 1.0, "mu": 2.0})

    def test_non_numeric_parameter(self):
        """Test that parameters must be numbers."""
        with pytest.raises(ModelError, match="must be a number"):
            Generator("drift", {"mu": "fast"})
        with pytest.raises(ModelError, match="must be a number"):
            Generator("drift", {"mu": True})

    def test_abs_z_negative(self):
        """Test that abs_z needs a nonnegative coefficient."""
        with pytest.raises(ModelError, match="c >= 0"):
            Generator.abs_z(-1.0)

    def test_params_are_frozen(self):
        """Test that parameters cannot be changed after construction."""
        g = Generator.discount(0.1)
        with pytest.raises(TypeError):
            g.params["r"] = 5.0

    def test_describe(self):
        """Test the compact description."""
        assert Generator.zero().describe() == "zero"
        assert Generator.linear(1, 2).describe() == "linear{a=1, b=2}"

    @pytest.mark.parametrize("g", GENERATORS, ids=lambda g: g.describe())
    def test_lipschitz_audit(self, g):
        """Test that sampled difference quotients respect the declared constant."""
        assert audit_lipschitz(g, samples=2000) <= g.lipschitz_constant + 1e-12

    @pytest.mark.parametrize("g", GENERATORS, ids=lambda g: g.describe())
    def test_convexity_audit(self, g):
        """Test the midpoint inequality for every catalog generator."""
        assert audit_convexity(g, samples=2000) <= 1e-12


class TestConstraint:
    """Test cases for Constraint and Barrier classes."""

    def test_barrier_values(self):
        """Test barrier evaluation on lattice nodes."""
        lattice = build_lattice(1.0, 4)
        np.testing.assert_allclose(Barrier.abs_w(2.0).values(lattice, 2), [2.0, 0.0, 2.0])
        np.testing.assert_allclose(Barrier.constant(-1.0).values(lattice, 1), [-1.0, -1.0])

    def test_reflect_below(self):
        """Test phi = (S - y)^- distance below the barrier."""
        phi = Constraint.reflect_below(Barrier.abs_w(1.0))
        assert evaluate_constraint(phi, 0.0, -1.0, 5.0, 2.0) == 3.0
        assert evaluate_constraint(phi, 0.0, 3.0, 5.0, 2.0) == 0.0
        assert phi.y_lipschitz == 1.0
        assert not phi.independent_of_y

    def test_z_ball(self):
        """Test phi = (|z| - r)^+."""
        phi = Constraint.z_ball(1.0)
        assert evaluate_constraint(phi, 0.0, 0.0, -3.0) == 2.0
        assert evaluate_constraint(phi, 0.0, 0.0, 0.5) == 0.0
        assert phi.independent_of_y

    def test_bound_constant(self):
        """Test M_phi in the well-posedness bound: z kinds count, y-only kinds do not."""
        assert Constraint.z_ball(1.0).bound_constant == 1.0
        assert Constraint.z_interval(-1.0, 2.0).bound_constant == 1.0
        assert Constraint.y_floor(0.0).bound_constant == 0.0
        assert Constraint.reflect_below(Barrier.constant(0.0)).bound_constant == 0.0
        assert Constraint.none().bound_constant == 0.0

    def test_y_floor(self):
        """Test phi = (c - y)^+."""
        phi = Constraint.y_floor(1.0)
        assert evaluate_constraint(phi, 0.0, -1.0, 0.0) == 2.0
        np.testing.assert_allclose(phi.y_slope(0.0, np.array([0.0, 2.0]), 0.0), [-1.0, 0.0])

    def test_z_interval(self):
        """Test the distance of z to [lo, hi]."""
        phi = Constraint.z_interval(-1.0, 2.0)
        np.testing.assert_allclose(
            evaluate_constraint(phi, 0.0, 0.0, np.array([-3.0, 0.0, 5.0])), [2.0, 0.0, 3.0]
        )

    def test_none_is_trivial(self):
        """Test the trivial constraint."""
        phi = Constraint.none()
        assert phi.is_trivial
        assert phi.lipschitz_constant == 0.0
        assert evaluate_constraint(phi, 0.0, 1.0, 1.0) == 0.0

    def test_reflect_below_requires_barrier(self):
        """Test that reflect_below without a barrier is rejected."""
        with pytest.raises(ModelError, match="requires a barrier") as info:
            Constraint("reflect_below")
        assert info.value.key == "constraint.barrier"

    def test_barrier_only_for_reflect_below(self):
        """Test that other kinds do not take a barrier."""
        with pytest.raises(ModelError, match="does not take a barrier"):
            Constraint("z_ball", {"r": 1.0}, Barrier.constant(0.0))

    def test_invalid_parameters(self):
        """Test parameter range checks."""
        with pytest.raises(ModelError, match="r >= 0"):
            Constraint.z_ball(-0.1)
        with pytest.raises(ModelError, match="lo <= hi"):
            Constraint.z_interval(1.0, 0.0)

    def test_unknown_barrier(self):
        """Test that an unknown barrier kind is rejected."""
        with pytest.raises(ModelError, match="Unknown barrier kind") as info:
            Barrier("moving")
        assert info.value.key == "barrier.kind"

    def test_describe(self):
        """Test descriptions with a nested barrier."""
        phi = Constraint.reflect_below(Barrier.constant(0))
        assert phi.describe() == "reflect_below{constant{K=0}}"

    @pytest.mark.parametrize("phi", CONSTRAINTS, ids=lambda phi: phi.describe())
    def test_metadata_audits(self, phi):
        """Test declared Lipschitz constant, convexity and nonnegativity."""
        assert audit_lipschitz(phi, samples=2000) <= phi.lipschitz_constant + 1e-12
        assert audit_convexity(phi, samples=2000) <= 1e-12
        y = np.linspace(-5.0, 5.0, 11)
        assert np.all(phi.evaluate(0.0, y, y[::-1], 0.5) >= 0.0)
        assert phi.y_growth == 0.0

    @settings(max_examples=100, deadline=None)
    @given(
        y=st.floats(min_value=-50, max_value=50),
        z=st.floats(min_value=-50, max_value=50),
        shift_y=st.floats(min_value=0, max_value=10),
    )
    def test_non_increasing_in_y(self, y, z, shift_y):
        """Test that every catalog constraint is non-increasing in y."""
        for phi in CONSTRAINTS:
            low = evaluate_constraint(phi, 0.0, y, z, 1.0)
            high = evaluate_constraint(phi, 0.0, y + shift_y, z, 1.0)
            assert high <= low + 1e-12


class TestClaim:
    """Test cases for Claim class and combinators."""

    @pytest.fixture
    def lattice(self):
        return build_lattice(1.0, 4)

    def test_base_kinds(self, lattice):
        """Test leaf values of the base claims."""
        w = lattice.w(4)
        np.testing.assert_allclose(Claim.terminal_w().leaf_values(lattice), w)
        np.testing.assert_allclose(Claim.constant(2.0).leaf_values(lattice), 2.0)
        np.testing.assert_allclose(Claim.call(0.5).leaf_values(lattice), [0, 0, 0, 0.5, 1.5])
        np.testing.assert_allclose(Claim.max_with(0.0).leaf_values(lattice), [0, 0, 0, 1, 2])
        np.testing.assert_allclose(
            Claim.table([1, 2, 3, 4, 5]).leaf_values(lattice), [1, 2, 3, 4, 5]
        )

    def test_combinators(self, lattice):
        """Test shift, negate, max, min, add and mix."""
        w = Claim.terminal_w()
        zero = Claim.constant(0.0)
        np.testing.assert_allclose(shift(w, 1.0).leaf_values(lattice), lattice.w(4) + 1.0)
        np.testing.assert_allclose(negate(w).leaf_values(lattice), -lattice.w(4))
        np.testing.assert_allclose(
            pointwise_max(w, zero).leaf_values(lattice), np.maximum(lattice.w(4), 0.0)
        )
        np.testing.assert_allclose(
            pointwise_min(w, zero).leaf_values(lattice), np.minimum(lattice.w(4), 0.0)
        )
        np.testing.assert_allclose(add(w, w).leaf_values(lattice), 2.0 * lattice.w(4))
        np.testing.assert_allclose(
            convex_mix(0.25, w, zero).leaf_values(lattice), 0.25 * lattice.w(4)
        )

    def test_table_leaf_count_mismatch(self, lattice):
        """Test that a table must match the lattice's terminal nodes."""
        with pytest.raises(ModelError, match="3 values but the lattice has 5") as info:
            Claim.table([1, 2, 3]).leaf_values(lattice)
        assert info.value.key == "claim.values"

    def test_table_validation(self):
        """Test table construction errors."""
        with pytest.raises(ModelError, match="non-empty"):
            Claim.table([])
        with pytest.raises(ModelError, match="finite"):
            Claim.table([1.0, float("nan")])
        with pytest.raises(ModelError, match="does not take values"):
            Claim("constant", {"c": 1.0}, values=(1.0,))

    def test_operand_count(self):
        """Test that combinators check their arity."""
        with pytest.raises(ModelError, match="takes 2 operand"):
            Claim("max", operands=(Claim.terminal_w(),))

    def test_mix_weight_range(self):
        """Test that mix weights lie in [0, 1]."""
        with pytest.raises(ModelError, match=r"\[0, 1\]"):
            convex_mix(1.5, Claim.terminal_w(), Claim.constant(0))

    def test_describe(self):
        """Test claim descriptions and labels."""
        assert Claim.max_with(0).describe() == "max_with{K=0}"
        assert shift(Claim.terminal_w(), -1).describe() == "shift(terminal_w, c=-1)"
        assert Claim.table([1.0], label="xi[3]").describe() == "xi[3]"
        assert Claim.table([1.0, 2.0]).describe() == "table[2]"

    def test_random_table_claim(self, lattice):
        """Test seeded random tables."""
        first = random_table_claim(lattice, np.random.default_rng(7), -0.5, 0.5)
        second = random_table_claim(lattice, np.random.default_rng(7), -0.5, 0.5)
        assert first == second
        values = first.leaf_values(lattice)
        assert len(values) == lattice.num_leaves
        assert np.all(np.abs(values) <= 0.5)

    @settings(max_examples=50, deadline=None)
    @given(
        a=st.floats(min_value=0.0, max_value=1.0),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_mix_norm_is_subadditive(self, a, seed):
        """Test ||a xi + (1-a) eta|| <= a ||xi|| + (1-a) ||eta|| in L2."""
        lattice = build_lattice(1.0, 6)
        rng = np.random.default_rng(seed)
        xi = random_table_claim(lattice, rng, -1.0, 1.0)
        eta = random_table_claim(lattice, rng, -1.0, 1.0)
        mixed = l2_norm(convex_mix(a, xi, eta), lattice)
        bound = a * l2_norm(xi, lattice) + (1.0 - a) * l2_norm(eta, lattice)
        assert mixed <= bound + 1e-12


class TestClaimSequence:
    """Test cases for make_claim_sequence."""

    @pytest.fixture
    def lattice(self):
        return build_lattice(1.0, 4)

    def test_shift_scheme(self, lattice):
        """Test xi_n = xi - 1/n."""
        sequence = make_claim_sequence(Claim.terminal_w(), "shift", 4)
        assert len(sequence) == 4
        np.testing.assert_allclose(sequence[3].leaf_values(lattice), lattice.w(4) - 0.25)

    def test_truncate_scheme(self, lattice):
        """Test xi_n = max(xi, -n)."""
        sequence = make_claim_sequence(Claim.terminal_w(), "truncate", 2)
        np.testing.assert_allclose(sequence[0].leaf_values(lattice), [-1, -1, 0, 1, 2])

    def test_perturb_scheme(self, lattice):
        """Test that perturbations shrink geometrically."""
        base = Claim.terminal_w()
        sequence = make_claim_sequence(
            base, "perturb", 3, lattice=lattice, seed=1, rate=0.5, noise_scale=0.1
        )
        first = sequence[0].leaf_values(lattice) - base.leaf_values(lattice)
        third = sequence[2].leaf_values(lattice) - base.leaf_values(lattice)
        np.testing.assert_allclose(third, first / 4.0)
        assert np.all(np.abs(first) <= 0.05)

    def test_perturb_needs_lattice(self):
        """Test that the perturbation scheme needs the leaf count."""
        with pytest.raises(ModelError, match="needs a lattice"):
            make_claim_sequence(Claim.terminal_w(), "perturb", 3)

    def test_invalid_count(self):
        """Test that the count must be a positive integer."""
        with pytest.raises(ModelError, match="positive integer"):
            make_claim_sequence(Claim.terminal_w(), "shift", 0)

    def test_scheme_aliases(self):
        """Test long scheme names."""
        assert SequenceScheme.parse("shift_up_by_1_over_n") is SequenceScheme.SHIFT
        assert SequenceScheme.parse("truncate_below_at_minus_n") is SequenceScheme.TRUNCATE
        assert SequenceScheme.parse("perturb") is SequenceScheme.PERTURB
        with pytest.raises(ModelError, match="Unknown sequence scheme"):
            SequenceScheme.parse("random")


class TestFromDict:
    """Test cases for building catalog entries from config mappings."""

    def test_generator_from_dict(self):
        """Test a valid generator mapping."""
        assert generator_from_dict({"kind": "abs_z", "c": 1}) == Generator.abs_z(1.0)

    def test_generator_unknown_kind_key(self):
        """Test that errors carry the config key."""
        with pytest.raises(ModelError) as info:
            generator_from_dict({"kind": "quadratic"})
        assert info.value.key == "generator.kind"

    def test_missing_kind(self):
        """Test that kind is required."""
        with pytest.raises(ModelError, match="non-empty string") as info:
            generator_from_dict({"r": 1.0})
        assert info.value.key == "generator.kind"

    def test_not_a_mapping(self):
        """Test that entries must be mappings."""
        with pytest.raises(ModelError, match="must be a mapping"):
            barrier_from_dict(["constant"])

    def test_constraint_with_nested_barrier(self):
        """Test reflect_below with its own barrier mapping."""
        phi = constraint_from_dict(
            {"kind": "reflect_below", "barrier": {"kind": "abs_w", "scale": 2}}
        )
        assert phi.barrier == Barrier.abs_w(2.0)

    def test_constraint_with_default_barrier(self):
        """Test reflect_below falling back to the top-level barrier."""
        phi = constraint_from_dict({"kind": "reflect_below"}, default_barrier=Barrier.constant(1))
        assert phi.barrier == Barrier.constant(1.0)

    def test_constraint_parameter_key(self):
        """Test that a bad constraint parameter names its key."""
        with pytest.raises(ModelError) as info:
            constraint_from_dict({"kind": "z_ball", "r": -1})
        assert info.value.key == "constraint.r"

    def test_nested_claim(self):
        """Test nested combinators."""
        claim = claim_from_dict(
            {
                "kind": "max",
                "left": {"kind": "terminal_w"},
                "right": {"kind": "negate", "base": {"kind": "terminal_w"}},
            }
        )
        lattice = build_lattice(1.0, 4)
        np.testing.assert_allclose(claim.leaf_values(lattice), np.abs(lattice.w(4)))

    def test_nested_claim_error_key(self):
        """Test that errors in operands carry the nested key."""
        with pytest.raises(ModelError) as info:
            claim_from_dict({"kind": "mix", "a": 0.5, "left": {"kind": "bogus"}, "right": {}})
        assert info.value.key == "claim.left.kind"

    def test_combinator_missing_operand(self):
        """Test that combinators require their operands."""
        with pytest.raises(ModelError, match="requires 'right'") as info:
            claim_from_dict({"kind": "min", "left": {"kind": "terminal_w"}})
        assert info.value.key == "claim.right"

    def test_table_claim(self):
        """Test a table claim with a label."""
        claim = claim_from_dict({"kind": "table", "values": [0, 1], "label": "pair"})
        assert claim.values == (0.0, 1.0)
        assert claim.describe() == "pair"

    def test_table_values_not_list(self):
        """Test that table values must be a list."""
        with pytest.raises(ModelError, match="must be a list"):
            claim_from_dict({"kind": "table", "values": 3})
