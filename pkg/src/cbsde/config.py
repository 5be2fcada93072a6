"""Experiment configuration loaded from YAML files.

A configuration file describes one experiment: the lattice, the catalog
entries, the penalty schedule, tolerances and where to write the results.
"""

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml

from cbsde.lattice import LatticeModel, build_lattice
from cbsde.model import (
    Barrier,
    Claim,
    Constraint,
    Generator,
    ModelError,
    barrier_from_dict,
    claim_from_dict,
    constraint_from_dict,
    generator_from_dict,
)
from cbsde.penalize import DEFAULT_TOL_M, DEFAULT_Y_MAX, Schedule
from cbsde.validator import validate

OUTPUT_DIR_ENV = "CBSDE_OUTPUT_DIR"


class ConfigError(Exception):
    """Base exception for configuration errors."""

    def __init__(self, message: str, key: Optional[str] = None):
        """Initialize the error.

        Args:
            message: Human-readable description.
            key: Dotted key of the offending entry, if known.
        """
        self.key = key
        super().__init__(message)


def parse_yaml_file(file_path: Union[str, Path]) -> Dict:
    """Parse a YAML file and return its contents as a dictionary.

    Args:
        file_path: Path to the YAML file to parse.

    Returns:
        Dictionary containing the parsed YAML content.

    Raises:
        ConfigError: If the file cannot be read or parsed.
    """
    file_path = Path(file_path)

    if not file_path.exists():
        raise ConfigError(f"Config file not found: {file_path}")

    if not file_path.is_file():
        raise ConfigError(f"Path is not a file: {file_path}")

    try:
        with open(file_path, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Failed to parse YAML file {file_path}: {e}")
    except IOError as e:
        raise ConfigError(f"Failed to read file {file_path}: {e}")

    if content is None:
        raise ConfigError(f"YAML file is empty: {file_path}")

    if not isinstance(content, dict):
        raise ConfigError(
            f"YAML file must contain a dictionary at root level, got {type(content).__name__}"
        )

    return content


def apply_overrides(
    data: Mapping[str, Any],
    experiment: Optional[str] = None,
    steps: Optional[int] = None,
    seed: Optional[int] = None,
    m_max: Optional[float] = None,
    tol: Optional[float] = None,
    output: Optional[str] = None,
) -> Dict[str, Any]:
    """Return a copy of a raw config with command-line overrides applied.

    Args:
        data: Raw config mapping.
        experiment: Experiment name chosen by the subcommand.
        steps: grid.n_steps.
        seed: seed.
        m_max: schedule.m_max.
        tol: tolerances.tol_m.
        output: output.path.

    Returns:
        The updated mapping. The input is left untouched.
    """
    updated = copy.deepcopy(dict(data))

    def section(name: str) -> Dict[str, Any]:
        value = updated.get(name)
        if not isinstance(value, dict):
            value = {}
            updated[name] = value
        return value

    if experiment is not None:
        updated["experiment"] = experiment
    if steps is not None:
        section("grid")["n_steps"] = steps
    if seed is not None:
        updated["seed"] = seed
    if m_max is not None:
        section("schedule")["m_max"] = m_max
    if tol is not None:
        section("tolerances")["tol_m"] = tol
    if output is not None:
        section("output")["path"] = output
    return updated


@dataclass(frozen=True)
class GridConfig:
    """Lattice settings."""

    horizon: float
    n_steps: int
    mode: str = "recombining"


@dataclass(frozen=True)
class Tolerances:
    """Schedule and oracle tolerances."""

    tol_m: float = DEFAULT_TOL_M
    y_max: float = DEFAULT_Y_MAX
    oracle: float = 1e-2


@dataclass(frozen=True)
class SequenceConfig:
    """Claim sequence settings for continuity experiments."""

    scheme: str = "shift"
    count: Optional[int] = None
    rate: float = 0.5
    noise_scale: float = 0.1


@dataclass(frozen=True)
class OutputConfig:
    """Result format and directory."""

    format: str = "csv"
    path: Optional[str] = None

    def directory(self) -> Path:
        """Output directory: output.path, then $CBSDE_OUTPUT_DIR, then ./results."""
        return Path(self.path or os.environ.get(OUTPUT_DIR_ENV) or "results")


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment configuration."""

    experiment: str
    grid: GridConfig
    generator: Generator
    constraint: Constraint = field(default_factory=Constraint.none)
    barrier: Optional[Barrier] = None
    claim: Optional[Claim] = None
    other_claim: Optional[Claim] = None
    mix_weight: float = 0.5
    penalty: Optional[float] = None
    schedule: Schedule = field(default_factory=Schedule)
    tolerances: Tolerances = field(default_factory=Tolerances)
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    t_step: Optional[int] = None
    instances: Optional[int] = None
    claim_scale: Optional[float] = None
    seed: int = 0
    output: OutputConfig = field(default_factory=OutputConfig)
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        """Validate a raw mapping and build the typed configuration.

        Args:
            data: Raw config mapping (after overrides).

        Returns:
            The configuration.

        Raises:
            ConfigError: If validation reports any violation. The message lists
                every violation; ``key`` names the first one.
        """
        violations = validate(data)
        if violations:
            listing = "; ".join(f"{v.key}: {v.message}" for v in violations)
            raise ConfigError(f"Invalid configuration: {listing}", key=violations[0].key)

        try:
            return cls._build(data)
        except ModelError as e:
            raise ConfigError(str(e), key=e.key)

    @classmethod
    def _build(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        grid = data["grid"]
        barrier = barrier_from_dict(data["barrier"]) if "barrier" in data else None
        constraint = (
            constraint_from_dict(data["constraint"], default_barrier=barrier)
            if "constraint" in data
            else Constraint.none()
        )
        tolerances = data.get("tolerances", {})
        sequence = data.get("sequence", {})
        output = data.get("output", {})
        return cls(
            experiment=data["experiment"],
            grid=GridConfig(
                float(grid["horizon"]), int(grid["n_steps"]), grid.get("mode", "recombining")
            ),
            generator=generator_from_dict(data["generator"]),
            constraint=constraint,
            barrier=barrier,
            claim=claim_from_dict(data["claim"]) if "claim" in data else None,
            other_claim=(
                claim_from_dict(data["other_claim"], key="other_claim")
                if "other_claim" in data
                else None
            ),
            mix_weight=float(data.get("mix_weight", 0.5)),
            penalty=float(data["penalty"]) if "penalty" in data else None,
            schedule=Schedule(**{k: float(v) for k, v in data.get("schedule", {}).items()}),
            tolerances=Tolerances(**{k: float(v) for k, v in tolerances.items()}),
            sequence=SequenceConfig(**sequence),
            t_step=data.get("t_step"),
            instances=data.get("instances"),
            claim_scale=data.get("claim_scale"),
            seed=int(data.get("seed", 0)),
            output=OutputConfig(**output),
            raw=copy.deepcopy(dict(data)),
        )

    def build_lattice(self) -> LatticeModel:
        return build_lattice(self.grid.horizon, self.grid.n_steps, self.grid.mode)


def load_config(file_path: Union[str, Path], **overrides: Any) -> ExperimentConfig:
    """Parse, override and validate a config file.

    Args:
        file_path: Path to the YAML file.
        **overrides: Keyword arguments of apply_overrides.

    Returns:
        The validated configuration.

    Raises:
        ConfigError: If the file cannot be parsed or does not validate.
    """
    return ExperimentConfig.from_dict(apply_overrides(parse_yaml_file(file_path), **overrides))

