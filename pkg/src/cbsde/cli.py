"""Command-line interface for cbsde."""

import functools
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click

from cbsde.config import ConfigError, ExperimentConfig, apply_overrides, parse_yaml_file
from cbsde.runner import EXIT_CONFIG_ERROR, EXIT_PASS, ExperimentRunner, RunnerError
from cbsde.validator import EXPERIMENTS, PROPERTY_EXPERIMENTS, validate


@click.group()
@click.version_option(version="0.1.0", prog_name="cbsde")
def cli():
    """cbsde - Constrained BSDE laboratory on binomial lattices.

    Runs solvers and property checks described by YAML experiment configs.
    """
    pass


def experiment_options(func):
    """Config argument and the overrides shared by every experiment command."""

    @click.argument("config_path", metavar="CONFIG", type=click.Path(path_type=Path))
    @click.option("--steps", type=int, help="Override grid.n_steps.")
    @click.option("--seed", type=int, help="Override the seed.")
    @click.option("--m-max", "m_max", type=float, help="Override schedule.m_max.")
    @click.option("--tol", type=float, help="Override tolerances.tol_m.")
    @click.option(
        "--output",
        "-o",
        type=click.Path(file_okay=False, path_type=Path),
        help="Output directory. Defaults to $CBSDE_OUTPUT_DIR, then ./results.",
    )
    @click.option("--verbose", "-v", is_flag=True, help="Log solver details.")
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)

    return wrapper


def _run_experiment(
    experiment: str,
    config_path: Path,
    steps: Optional[int],
    seed: Optional[int],
    m_max: Optional[float],
    tol: Optional[float],
    output: Optional[Path],
    verbose: bool,
) -> None:
    if verbose:
        logging.getLogger("cbsde").setLevel(logging.DEBUG)
    try:
        data = apply_overrides(
            parse_yaml_file(config_path),
            experiment=experiment,
            steps=steps,
            seed=seed,
            m_max=m_max,
            tol=tol,
            output=str(output) if output is not None else None,
        )
        config = ExperimentConfig.from_dict(data)
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)

    try:
        runner = ExperimentRunner(config)
        outcome = runner.run()
        paths = runner.write(outcome)
    except RunnerError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(e.exit_code)

    status = "PASS" if outcome.passed else "FAIL"
    click.echo(f"{experiment}: {status}")
    for name in ("y_0", "domain_status", "max_violation", "oracle_gap", "rho"):
        if name in outcome.summary:
            click.echo(f"  {name}: {outcome.summary[name]}")
    for path in paths:
        click.echo(f"  wrote {path}")
    sys.exit(outcome.exit_code)


def _experiment_command(name: str, summary: str):
    @experiment_options
    def command(config_path, steps, seed, m_max, tol, output, verbose):
        _run_experiment(name, config_path, steps, seed, m_max, tol, output, verbose)

    command.__doc__ = summary
    return cli.command(name=name)(command)


solve = _experiment_command("solve", "Solve the unconstrained BSDE for the configured claim.")
penalize = _experiment_command("penalize", "Solve the penalized BSDE at the configured penalty.")
minimal = _experiment_command(
    "minimal", "Approximate the minimal constrained solution along the penalty schedule."
)
reflected = _experiment_command("reflected", "Solve the reflected BSDE above the barrier.")
compare_oracle = _experiment_command(
    "compare-oracle", "Compare the penalization limit with the reflected solution."
)
risk = _experiment_command("risk", "Audit the risk measure induced by the driver.")


@cli.command()
@click.argument("property_name", metavar="PROPERTY", type=click.Choice(PROPERTY_EXPERIMENTS))
@experiment_options
def check(property_name, config_path, steps, seed, m_max, tol, output, verbose):
    """Check a structural PROPERTY on the configured instance."""
    _run_experiment(property_name, config_path, steps, seed, m_max, tol, output, verbose)


@cli.command(name="validate")
@click.argument("config_path", metavar="CONFIG", type=click.Path(path_type=Path))
@click.option(
    "--experiment",
    type=click.Choice(EXPERIMENTS),
    help="Validate as this experiment instead of the config's own.",
)
@click.option("--steps", type=int, help="Override grid.n_steps.")
@click.option("--m-max", "m_max", type=float, help="Override schedule.m_max.")
@click.option("--json", "output_json", is_flag=True, help="Print violations as JSON.")
def validate_command(config_path, experiment, steps, m_max, output_json):
    """Validate CONFIG and list every violation."""
    try:
        data = apply_overrides(
            parse_yaml_file(config_path), experiment=experiment, steps=steps, m_max=m_max
        )
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)

    violations = validate(data)
    if output_json:
        payload = [{"key": v.key, "message": v.message} for v in violations]
        click.echo(json.dumps({"valid": not violations, "violations": payload}, indent=2))
    elif violations:
        click.echo(f"✗ {len(violations)} violation(s):")
        for violation in violations:
            click.echo(f"  - {violation.key}: {violation.message}")
    else:
        click.echo("✓ Configuration is valid")
    sys.exit(EXIT_CONFIG_ERROR if violations else EXIT_PASS)


def main():
    """Entry point for the CLI."""
    cli()


if __name__ == "__main__":
    main()
