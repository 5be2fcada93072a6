"""Catalog of generators, constraints, barriers and claims.

Every entry is an immutable dataclass with a ``kind`` and named parameters,
validated on construction. Structural metadata (Lipschitz constants,
convexity, dependence on y) is derived from the parameters so that the
property checks can rely on it.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from cbsde.lattice import LatticeModel

ArrayLike = Union[float, np.ndarray]


class ModelError(Exception):
    """Base exception for catalog errors."""

    def __init__(self, message: str, key: Optional[str] = None):
        """Initialize the error.

        Args:
            message: Human-readable description.
            key: Dotted config key of the offending entry, if known.
        """
        self.key = key
        super().__init__(message)


def _freeze_params(
    owner: str, kind: str, params: Mapping[str, float], required: Sequence[str]
) -> Mapping[str, float]:
    missing = [name for name in required if name not in params]
    if missing:
        raise ModelError(
            f"{owner} kind '{kind}' requires parameter(s): {', '.join(missing)}",
            key=f"{owner.lower()}.{missing[0]}",
        )
    unknown = sorted(set(params) - set(required))
    if unknown:
        raise ModelError(
            f"{owner} kind '{kind}' does not accept parameter(s): {', '.join(unknown)}",
            key=f"{owner.lower()}.{unknown[0]}",
        )
    frozen: Dict[str, float] = {}
    for name in required:
        value = params[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ModelError(
                f"{owner} parameter '{name}' must be a number, got {value!r}",
                key=f"{owner.lower()}.{name}",
            )
        if not math.isfinite(value):
            raise ModelError(
                f"{owner} parameter '{name}' must be finite", key=f"{owner.lower()}.{name}"
            )
        frozen[name] = float(value)
    return MappingProxyType(frozen)


def _output(value: np.ndarray, *inputs: ArrayLike) -> ArrayLike:
    if all(np.ndim(x) == 0 for x in inputs):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

GENERATOR_KINDS: Dict[str, Tuple[str, ...]] = {
    "zero": (),
    "linear": ("a", "b"),
    "discount": ("r",),
    "drift": ("mu",),
    "abs_z": ("c",),
}


@dataclass(frozen=True)
class Generator:
    """A driver g(t, y, z) from the catalog.

    Attributes:
        kind: One of zero, linear {a, b}, discount {r}, drift {mu}, abs_z {c}.
        params: Parameters of the kind.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        """Validate the generator after initialization."""
        if self.kind not in GENERATOR_KINDS:
            raise ModelError(
                f"Unknown generator kind '{self.kind}'. "
                f"Available kinds: {', '.join(GENERATOR_KINDS)}",
                key="generator.kind",
            )
        frozen = _freeze_params("Generator", self.kind, self.params, GENERATOR_KINDS[self.kind])
        if self.kind == "abs_z" and frozen["c"] < 0:
            raise ModelError("Generator abs_z requires c >= 0", key="generator.c")
        object.__setattr__(self, "params", frozen)

    @classmethod
    def zero(cls) -> "Generator":
        return cls("zero")

    @classmethod
    def linear(cls, a: float, b: float) -> "Generator":
        return cls("linear", {"a": a, "b": b})

    @classmethod
    def discount(cls, r: float) -> "Generator":
        return cls("discount", {"r": r})

    @classmethod
    def drift(cls, mu: float) -> "Generator":
        return cls("drift", {"mu": mu})

    @classmethod
    def abs_z(cls, c: float) -> "Generator":
        return cls("abs_z", {"c": c})

    def _y_coefficient(self) -> float:
        if self.kind == "linear":
            return self.params["a"]
        if self.kind == "discount":
            return -self.params["r"]
        return 0.0

    @property
    def lipschitz_constant(self) -> float:
        """M in |g(y1,z1) - g(y2,z2)| <= M(|y1-y2| + |z1-z2|)."""
        if self.kind == "linear":
            return max(abs(self.params["a"]), abs(self.params["b"]))
        if self.kind == "discount":
            return abs(self.params["r"])
        if self.kind == "drift":
            return abs(self.params["mu"])
        if self.kind == "abs_z":
            return self.params["c"]
        return 0.0

    @property
    def y_lipschitz(self) -> float:
        return abs(self._y_coefficient())

    @property
    def z_lipschitz(self) -> float:
        if self.kind == "linear":
            return abs(self.params["b"])
        if self.kind == "drift":
            return abs(self.params["mu"])
        if self.kind == "abs_z":
            return self.params["c"]
        return 0.0

    @property
    def independent_of_y(self) -> bool:
        return self._y_coefficient() == 0.0

    @property
    def convex(self) -> bool:
        # linear kinds are convex; abs_z is convex for c >= 0
        return True

    @property
    def vanishes_at_zero(self) -> bool:
        """Whether g(t, y, 0) = 0 for all (t, y)."""
        return self._y_coefficient() == 0.0

    def evaluate(self, t: float, y: ArrayLike, z: ArrayLike) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.kind == "linear":
            return self.params["a"] * y + self.params["b"] * z
        if self.kind == "discount":
            return -self.params["r"] * y
        if self.kind == "drift":
            return self.params["mu"] * z + 0.0 * y
        if self.kind == "abs_z":
            return self.params["c"] * np.abs(z) + 0.0 * y
        return np.zeros(np.broadcast(y, z).shape)

    def y_slope(self, t: float, y: ArrayLike, z: ArrayLike) -> np.ndarray:
        """Derivative of g in y (piecewise)."""
        return np.full(np.broadcast(np.asarray(y), np.asarray(z)).shape, self._y_coefficient())

    def describe(self) -> str:
        return _describe(self.kind, self.params)


def _describe(kind: str, params: Mapping[str, float]) -> str:
    if not params:
        return kind
    inner = ", ".join(f"{name}={value:g}" for name, value in params.items())
    return f"{kind}{{{inner}}}"


def evaluate_generator(g: Generator, t: float, y: ArrayLike, z: ArrayLike) -> ArrayLike:
    """Evaluate g(t, y, z).

    Returns a float for scalar inputs, an array otherwise.
    """
    return _output(g.evaluate(t, y, z), y, z)


# ---------------------------------------------------------------------------
# Barriers and constraints
# ---------------------------------------------------------------------------

BARRIER_KINDS: Dict[str, Tuple[str, ...]] = {
    "constant": ("K",),
    "abs_w": ("scale",),
}


@dataclass(frozen=True)
class Barrier:
    """A lower barrier S_t evaluated per lattice node through W_t.

    Attributes:
        kind: constant {K} or abs_w {scale} (S_t = scale * |W_t|).
        params: Parameters of the kind.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        """Validate the barrier after initialization."""
        if self.kind not in BARRIER_KINDS:
            raise ModelError(
                f"Unknown barrier kind '{self.kind}'. "
                f"Available kinds: {', '.join(BARRIER_KINDS)}",
                key="barrier.kind",
            )
        frozen = _freeze_params("Barrier", self.kind, self.params, BARRIER_KINDS[self.kind])
        object.__setattr__(self, "params", frozen)

    @classmethod
    def constant(cls, K: float) -> "Barrier":
        return cls("constant", {"K": K})

    @classmethod
    def abs_w(cls, scale: float) -> "Barrier":
        return cls("abs_w", {"scale": scale})

    def evaluate(self, w: ArrayLike) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if self.kind == "abs_w":
            return self.params["scale"] * np.abs(w)
        return np.full(w.shape, self.params["K"])

    def values(self, lattice: LatticeModel, step: int) -> np.ndarray:
        """Barrier value at every node of a step."""
        return self.evaluate(lattice.w(step))

    def describe(self) -> str:
        return _describe(self.kind, self.params)


CONSTRAINT_KINDS: Dict[str, Tuple[str, ...]] = {
    "none": (),
    "reflect_below": (),
    "z_ball": ("r",),
    "y_floor": ("c",),
    "z_interval": ("lo", "hi"),
}


@dataclass(frozen=True)
class Constraint:
    """A nonnegative constraint function phi(t, y, z); Gamma = {phi = 0}.

    Attributes:
        kind: none, reflect_below {barrier}, z_ball {r}, y_floor {c} or
            z_interval {lo, hi} (distance of z to [lo, hi]).
        params: Numeric parameters of the kind.
        barrier: Lower barrier, required for reflect_below only.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    barrier: Optional[Barrier] = None

    def __post_init__(self):
        """Validate the constraint after initialization."""
        if self.kind not in CONSTRAINT_KINDS:
            raise ModelError(
                f"Unknown constraint kind '{self.kind}'. "
                f"Available kinds: {', '.join(CONSTRAINT_KINDS)}",
                key="constraint.kind",
            )
        frozen = _freeze_params("Constraint", self.kind, self.params, CONSTRAINT_KINDS[self.kind])
        if self.kind == "reflect_below" and self.barrier is None:
            raise ModelError(
                "Constraint reflect_below requires a barrier", key="constraint.barrier"
            )
        if self.kind != "reflect_below" and self.barrier is not None:
            raise ModelError(
                f"Constraint kind '{self.kind}' does not take a barrier",
                key="constraint.barrier",
            )
        if self.kind == "z_ball" and frozen["r"] < 0:
            raise ModelError("Constraint z_ball requires r >= 0", key="constraint.r")
        if self.kind == "z_interval" and frozen["lo"] > frozen["hi"]:
            raise ModelError("Constraint z_interval requires lo <= hi", key="constraint.lo")
        object.__setattr__(self, "params", frozen)

    @classmethod
    def none(cls) -> "Constraint":
        return cls("none")

    @classmethod
    def reflect_below(cls, barrier: Barrier) -> "Constraint":
        return cls("reflect_below", barrier=barrier)

    @classmethod
    def z_ball(cls, r: float) -> "Constraint":
        return cls("z_ball", {"r": r})

    @classmethod
    def y_floor(cls, c: float) -> "Constraint":
        return cls("y_floor", {"c": c})

    @classmethod
    def z_interval(cls, lo: float, hi: float) -> "Constraint":
        return cls("z_interval", {"lo": lo, "hi": hi})

    @property
    def is_trivial(self) -> bool:
        return self.kind == "none"

    @property
    def lipschitz_constant(self) -> float:
        return 0.0 if self.is_trivial else 1.0

    @property
    def y_lipschitz(self) -> float:
        return 1.0 if self.kind in ("reflect_below", "y_floor") else 0.0

    @property
    def z_lipschitz(self) -> float:
        return 1.0 if self.kind in ("z_ball", "z_interval") else 0.0

    @property
    def y_growth(self) -> float:
        """Lipschitz constant of the part of phi that increases in y.

        Every catalog entry is non-increasing in y, so this is 0.
        """
        return 0.0

    @property
    def bound_constant(self) -> float:
        """M_phi as it enters the well-posedness bound (M + m * M_phi) * dt < 1.

        The y-only kinds keep the implicit equation monotone and contribute
        nothing; z-dependent kinds contribute their full Lipschitz constant.
        """
        return self.y_growth + self.z_lipschitz

    @property
    def independent_of_y(self) -> bool:
        return self.y_lipschitz == 0.0

    @property
    def convex(self) -> bool:
        return True

    @property
    def nonnegative(self) -> bool:
        return True

    def _floor(self, w: ArrayLike) -> np.ndarray:
        if self.kind == "reflect_below":
            return self.barrier.evaluate(w)
        return np.full(np.shape(w), self.params["c"])

    def evaluate(self, t: float, y: ArrayLike, z: ArrayLike, w: ArrayLike = 0.0) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        shape = np.broadcast(y, z, np.asarray(w)).shape
        if self.kind in ("reflect_below", "y_floor"):
            return np.maximum(self._floor(w) - y, 0.0) * np.ones(shape)
        if self.kind == "z_ball":
            return np.maximum(np.abs(z) - self.params["r"], 0.0) * np.ones(shape)
        if self.kind == "z_interval":
            below = np.maximum(self.params["lo"] - z, 0.0)
            above = np.maximum(z - self.params["hi"], 0.0)
            return (below + above) * np.ones(shape)
        return np.zeros(shape)

    def y_slope(self, t: float, y: ArrayLike, z: ArrayLike, w: ArrayLike = 0.0) -> np.ndarray:
        """Derivative of phi in y (piecewise; -1 below the floor)."""
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(y, np.asarray(z), np.asarray(w)).shape
        if self.kind in ("reflect_below", "y_floor"):
            return np.where(y < self._floor(w), -1.0, 0.0) * np.ones(shape)
        return np.zeros(shape)

    def describe(self) -> str:
        if self.barrier is not None:
            return f"{self.kind}{{{self.barrier.describe()}}}"
        return _describe(self.kind, self.params)


def evaluate_constraint(
    phi: Constraint, t: float, y: ArrayLike, z: ArrayLike, w: ArrayLike = 0.0
) -> ArrayLike:
    """Evaluate phi(t, y, z) at a node whose Brownian value is w.

    The node enters only through barrier kinds.
    """
    return _output(phi.evaluate(t, y, z, w), y, z, w)


# ---------------------------------------------------------------------------
# Claims
# ---------------------------------------------------------------------------

CLAIM_KINDS: Dict[str, Tuple[str, ...]] = {
    "terminal_w": (),
    "constant": ("c",),
    "call": ("K",),
    "max_with": ("K",),
    "table": (),
    "shift": ("c",),
    "max": (),
    "min": (),
    "mix": ("a",),
    "negate": (),
    "add": (),
}

_ARITY = {"shift": 1, "negate": 1, "max": 2, "min": 2, "mix": 2, "add": 2}


@dataclass(frozen=True)
class Claim:
    """A terminal random variable, one value per terminal node.

    Attributes:
        kind: Catalog kind or combinator.
        params: Numeric parameters of the kind.
        operands: Sub-claims of a combinator.
        values: Leaf vector of a table claim.
        label: Optional name used in reports.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    operands: Tuple["Claim", ...] = ()
    values: Optional[Tuple[float, ...]] = None
    label: Optional[str] = None

    def __post_init__(self):
        """Validate the claim after initialization."""
        if self.kind not in CLAIM_KINDS:
            raise ModelError(
                f"Unknown claim kind '{self.kind}'. Available kinds: {', '.join(CLAIM_KINDS)}",
                key="claim.kind",
            )
        frozen = _freeze_params("Claim", self.kind, self.params, CLAIM_KINDS[self.kind])
        arity = _ARITY.get(self.kind, 0)
        if len(self.operands) != arity:
            raise ModelError(
                f"Claim kind '{self.kind}' takes {arity} operand(s), got {len(self.operands)}",
                key="claim.kind",
            )
        if self.kind == "mix" and not 0.0 <= frozen["a"] <= 1.0:
            raise ModelError("Claim mix weight 'a' must lie in [0, 1]", key="claim.a")
        if self.kind == "table":
            if not self.values:
                raise ModelError(
                    "Table claim requires a non-empty 'values' list", key="claim.values"
                )
            table = tuple(float(v) for v in self.values)
            if not all(math.isfinite(v) for v in table):
                raise ModelError("Table claim values must be finite", key="claim.values")
            object.__setattr__(self, "values", table)
        elif self.values is not None:
            raise ModelError(f"Claim kind '{self.kind}' does not take values", key="claim.values")
        object.__setattr__(self, "params", frozen)

    @classmethod
    def terminal_w(cls) -> "Claim":
        return cls("terminal_w")

    @classmethod
    def constant(cls, c: float) -> "Claim":
        return cls("constant", {"c": c})

    @classmethod
    def call(cls, K: float) -> "Claim":
        return cls("call", {"K": K})

    @classmethod
    def max_with(cls, K: float) -> "Claim":
        return cls("max_with", {"K": K})

    @classmethod
    def table(cls, values: Sequence[float], label: Optional[str] = None) -> "Claim":
        return cls("table", values=tuple(values), label=label)

    def leaf_values(self, lattice: LatticeModel) -> np.ndarray:
        """Value of the claim at every terminal node.

        Raises:
            ModelError: If a table does not match the lattice's leaf count.
        """
        w = lattice.w(lattice.n_steps)
        kind = self.kind
        if kind == "terminal_w":
            return w.copy()
        if kind == "constant":
            return np.full(w.shape, self.params["c"])
        if kind == "call":
            return np.maximum(w - self.params["K"], 0.0)
        if kind == "max_with":
            return np.maximum(w, self.params["K"])
        if kind == "table":
            if len(self.values) != lattice.num_leaves:
                raise ModelError(
                    f"Table claim has {len(self.values)} values but the lattice has "
                    f"{lattice.num_leaves} terminal nodes",
                    key="claim.values",
                )
            return np.array(self.values)
        parts = [operand.leaf_values(lattice) for operand in self.operands]
        if kind == "shift":
            return parts[0] + self.params["c"]
        if kind == "negate":
            return -parts[0]
        if kind == "max":
            return np.maximum(parts[0], parts[1])
        if kind == "min":
            return np.minimum(parts[0], parts[1])
        if kind == "add":
            return parts[0] + parts[1]
        a = self.params["a"]
        return a * parts[0] + (1.0 - a) * parts[1]

    def describe(self) -> str:
        if self.label:
            return self.label
        if self.kind == "table":
            return f"table[{len(self.values)}]"
        if self.operands:
            inner = ", ".join(op.describe() for op in self.operands)
            extra = "".join(f", {k}={v:g}" for k, v in self.params.items())
            return f"{self.kind}({inner}{extra})"
        return _describe(self.kind, self.params)


def shift(claim: Claim, c: float) -> Claim:
    """xi + c."""
    return Claim("shift", {"c": c}, (claim,))


def negate(claim: Claim) -> Claim:
    """-xi."""
    return Claim("negate", operands=(claim,))


def pointwise_max(left: Claim, right: Claim) -> Claim:
    return Claim("max", operands=(left, right))


def pointwise_min(left: Claim, right: Claim) -> Claim:
    return Claim("min", operands=(left, right))


def add(left: Claim, right: Claim) -> Claim:
    return Claim("add", operands=(left, right))


def convex_mix(a: float, left: Claim, right: Claim) -> Claim:
    """a * left + (1 - a) * right."""
    return Claim("mix", {"a": a}, (left, right))


def random_table_claim(
    lattice: LatticeModel,
    rng: np.random.Generator,
    low: float = -1.0,
    high: float = 1.0,
    label: Optional[str] = None,
) -> Claim:
    """Table claim with i.i.d. uniform[low, high] leaf values."""
    return Claim.table(rng.uniform(low, high, lattice.num_leaves), label=label)


class SequenceScheme(str, Enum):
    """Ways of building a sequence xi_n converging to a base claim."""

    SHIFT = "shift"
    TRUNCATE = "truncate"
    PERTURB = "perturb"

    @classmethod
    def parse(cls, value: Union["SequenceScheme", str]) -> "SequenceScheme":
        aliases = {
            "shift_up_by_1_over_n": cls.SHIFT,
            "truncate_below_at_minus_n": cls.TRUNCATE,
            "random_l2_perturbation": cls.PERTURB,
        }
        if isinstance(value, str) and value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            raise ModelError(
                f"Unknown sequence scheme '{value}'. "
                f"Expected one of: {', '.join(s.value for s in cls)}",
                key="sequence.scheme",
            )


def make_claim_sequence(
    base: Claim,
    scheme: Union[SequenceScheme, str],
    count: int,
    *,
    lattice: Optional[LatticeModel] = None,
    seed: int = 0,
    rate: float = 0.5,
    noise_scale: float = 1.0,
) -> List[Claim]:
    """Build xi_1..xi_count converging to base.

    Schemes:
        shift: xi_n = xi - 1/n (increasing, a.s. convergent).
        truncate: xi_n = max(xi, -n).
        perturb: xi_n = xi + rate^n * noise, noise a seeded uniform table
            scaled by noise_scale, so ||xi_n - xi|| = rate^n ||noise||.

    Args:
        base: The limit claim.
        scheme: Sequence scheme.
        count: Number of terms (>= 1).
        lattice: Required for the perturbation scheme (leaf count).
        seed: Seed of the perturbation noise.
        rate: Geometric rate of the perturbation, in (0, 1).
        noise_scale: Amplitude of the perturbation noise (> 0).

    Returns:
        List of claims.

    Raises:
        ModelError: If the scheme parameters are invalid.
    """
    scheme = SequenceScheme.parse(scheme)
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ModelError(
            f"Sequence 'count' must be a positive integer, got {count}", key="sequence.count"
        )

    if scheme is SequenceScheme.SHIFT:
        return [shift(base, -1.0 / n) for n in range(1, count + 1)]
    if scheme is SequenceScheme.TRUNCATE:
        return [pointwise_max(base, Claim.constant(-float(n))) for n in range(1, count + 1)]

    if lattice is None:
        raise ModelError("The perturbation scheme needs a lattice", key="sequence.scheme")
    if not 0.0 < rate < 1.0:
        raise ModelError(f"Sequence 'rate' must lie in (0, 1), got {rate}", key="sequence.rate")
    if noise_scale <= 0:
        raise ModelError("Sequence 'noise_scale' must be positive", key="sequence.noise_scale")
    noise = np.random.default_rng(seed).uniform(-1.0, 1.0, lattice.num_leaves) * noise_scale
    return [
        add(base, Claim.table(rate**n * noise, label=f"noise[seed={seed}]*{rate:g}^{n}"))
        for n in range(1, count + 1)
    ]


# ---------------------------------------------------------------------------
# Construction from config mappings
# ---------------------------------------------------------------------------


def _split(data: Mapping, key: str, reserved: Tuple[str, ...] = ()) -> Tuple[str, Dict]:
    if not isinstance(data, Mapping):
        raise ModelError(f"'{key}' must be a mapping, got {type(data).__name__}", key=key)
    kind = data.get("kind")
    if not isinstance(kind, str) or not kind:
        raise ModelError(f"'{key}.kind' must be a non-empty string", key=f"{key}.kind")
    params = {k: v for k, v in data.items() if k != "kind" and k not in reserved}
    return kind, params


def _rekey(error: ModelError, owner: str, key: str) -> ModelError:
    if error.key and error.key.startswith(owner + "."):
        return ModelError(str(error), key=key + error.key[len(owner):])
    return ModelError(str(error), key=error.key or key)


def generator_from_dict(data: Mapping, key: str = "generator") -> Generator:
    """Create and validate a Generator from a config mapping.

    Raises:
        ModelError: If validation fails; ``key`` names the offending entry.
    """
    kind, params = _split(data, key)
    try:
        return Generator(kind, params)
    except ModelError as e:
        raise _rekey(e, "generator", key)


def barrier_from_dict(data: Mapping, key: str = "barrier") -> Barrier:
    """Create and validate a Barrier from a config mapping."""
    kind, params = _split(data, key)
    try:
        return Barrier(kind, params)
    except ModelError as e:
        raise _rekey(e, "barrier", key)


def constraint_from_dict(
    data: Mapping, key: str = "constraint", default_barrier: Optional[Barrier] = None
) -> Constraint:
    """Create and validate a Constraint from a config mapping.

    A reflect_below entry takes its barrier from a nested ``barrier`` mapping,
    falling back to ``default_barrier``.
    """
    kind, params = _split(data, key, reserved=("barrier",))
    barrier = default_barrier if kind == "reflect_below" else None
    if "barrier" in data:
        barrier = barrier_from_dict(data["barrier"], key=f"{key}.barrier")
    try:
        return Constraint(kind, params, barrier)
    except ModelError as e:
        raise _rekey(e, "constraint", key)


def claim_from_dict(data: Mapping, key: str = "claim") -> Claim:
    """Create and validate a (possibly nested) Claim from a config mapping.

    Combinators take ``base`` (shift, negate) or ``left``/``right`` (max, min,
    mix, add) sub-mappings; tables take ``values``.
    """
    kind, params = _split(data, key, reserved=("base", "left", "right", "values", "label"))
    operands: List[Claim] = []
    if kind in ("shift", "negate"):
        if "base" not in data:
            raise ModelError(f"Claim kind '{kind}' requires 'base'", key=f"{key}.base")
        operands.append(claim_from_dict(data["base"], key=f"{key}.base"))
    elif kind in ("max", "min", "mix", "add"):
        for side in ("left", "right"):
            if side not in data:
                raise ModelError(f"Claim kind '{kind}' requires '{side}'", key=f"{key}.{side}")
            operands.append(claim_from_dict(data[side], key=f"{key}.{side}"))
    values = data.get("values")
    if values is not None and not isinstance(values, (list, tuple)):
        raise ModelError("Table claim 'values' must be a list", key=f"{key}.values")
    try:
        return Claim(
            kind,
            params,
            tuple(operands),
            tuple(values) if values is not None else None,
            data.get("label"),
        )
    except ModelError as e:
        raise _rekey(e, "claim", key)
    except (TypeError, ValueError) as e:
        raise ModelError(f"Invalid claim: {e}", key=key)


# ---------------------------------------------------------------------------
# Metadata audits
# ---------------------------------------------------------------------------


def _sample_points(rng: np.random.Generator, samples: int) -> Dict[str, np.ndarray]:
    return {
        "t": rng.uniform(0.0, 1.0, samples),
        "w": rng.uniform(-3.0, 3.0, samples),
        "y1": rng.uniform(-10.0, 10.0, samples),
        "z1": rng.uniform(-10.0, 10.0, samples),
        "y2": rng.uniform(-10.0, 10.0, samples),
        "z2": rng.uniform(-10.0, 10.0, samples),
    }


def _evaluate_entry(entry: Union[Generator, Constraint], t, y, z, w) -> np.ndarray:
    if isinstance(entry, Constraint):
        return entry.evaluate(t, y, z, w)
    return entry.evaluate(t, y, z)


def audit_lipschitz(
    entry: Union[Generator, Constraint], samples: int = 10_000, seed: int = 0
) -> float:
    """Largest empirical difference quotient |f1 - f2| / (|dy| + |dz|).

    Points of a pair share t and the node (w), matching the declared constant.
    """
    p = _sample_points(np.random.default_rng(seed), samples)
    f1 = _evaluate_entry(entry, p["t"], p["y1"], p["z1"], p["w"])
    f2 = _evaluate_entry(entry, p["t"], p["y2"], p["z2"], p["w"])
    distance = np.abs(p["y1"] - p["y2"]) + np.abs(p["z1"] - p["z2"])
    mask = distance > 1e-12
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(f1 - f2)[mask] / distance[mask]))


def audit_convexity(
    entry: Union[Generator, Constraint], samples: int = 10_000, seed: int = 0
) -> float:
    """Largest midpoint-inequality violation f(mid) - (f1 + f2) / 2, floored at 0."""
    p = _sample_points(np.random.default_rng(seed), samples)
    f1 = _evaluate_entry(entry, p["t"], p["y1"], p["z1"], p["w"])
    f2 = _evaluate_entry(entry, p["t"], p["y2"], p["z2"], p["w"])
    mid = _evaluate_entry(
        entry, p["t"], 0.5 * (p["y1"] + p["y2"]), 0.5 * (p["z1"] + p["z2"]), p["w"]
    )
    return float(max(np.max(mid - 0.5 * (f1 + f2)), 0.0))
