"""Experiment runner.

This module runs one configured experiment end to end:
1. Build the lattice and catalog entries from the config
2. Run the solver or property check named by the experiment
3. Assemble a summary record and a detail table
4. Write both to the output directory
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from cbsde.bsde import BSDEError, Supersolution, residual_check, solve_bsde
from cbsde.config import ExperimentConfig
from cbsde.lattice import AdaptedField, LatticeError, LatticeModel
from cbsde.model import Constraint, ModelError
from cbsde.output import OutputError, ResultWriter, canonical_json, config_digest
from cbsde.penalize import PenalizationError, solve_minimal, solve_penalized
from cbsde.properties import (
    RISK_CLAIM_SCALE,
    PropertyError,
    PropertyReport,
    audit_risk_measure,
    check_comparison,
    check_convexity,
    check_fatou,
    check_from_below,
    check_l2_continuity,
    comparison_suite,
    convexity_suite,
    risk_measure,
)
from cbsde.reflected import (
    ReflectedError,
    barrier_violation,
    complementarity_violation,
    estimate_terminal_sensitivity,
    solve_reflected,
)

EXIT_PASS = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_ERROR = 3

RESIDUAL_TOLERANCE = 1e-10
MONOTONE_TOLERANCE = 1e-11
INCREMENT_FLOOR = -1e-12
DETAIL_NODE_LIMIT = 6

SOLVER_ERRORS = (BSDEError, PenalizationError, ReflectedError, LatticeError, ModelError)


class RunnerError(Exception):
    """Base exception for runner errors."""

    def __init__(self, message: str, exit_code: int = EXIT_SOLVER_ERROR):
        """Initialize the error.

        Args:
            message: Error text, carrying the failing module's message.
            exit_code: Process exit status for this failure.
        """
        self.exit_code = exit_code
        super().__init__(message)


@dataclass
class RunOutcome:
    """Summary record and detail table of one run."""

    summary: Dict[str, Any]
    columns: List[str] = field(default_factory=list)
    rows: List[List[Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("pass", False))

    @property
    def exit_code(self) -> int:
        return EXIT_PASS if self.passed else EXIT_PROPERTY_FAILURE


class ExperimentRunner:
    """Runs the experiment described by a validated configuration."""

    def __init__(self, config: ExperimentConfig, logger: Optional[logging.Logger] = None):
        """Initialize the runner.

        Args:
            config: Validated experiment configuration.
            logger: Logger instance. If None, creates a basic logger.
        """
        self.config = config

        # Initialize logger
        if logger is None:
            self.logger = logging.getLogger(__name__)
            if not self.logger.handlers:
                handler = logging.StreamHandler()
                formatter = logging.Formatter(
                    "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
                )
                handler.setFormatter(formatter)
                self.logger.addHandler(handler)
                self.logger.setLevel(logging.INFO)
        else:
            self.logger = logger

        self.lattice: LatticeModel = config.build_lattice()
        self._handlers: Dict[str, Callable[[], RunOutcome]] = {
            "solve": self._run_solve,
            "penalize": self._run_penalize,
            "minimal": self._run_minimal,
            "reflected": self._run_reflected,
            "compare-oracle": self._run_compare_oracle,
            "comparison": self._run_comparison,
            "convexity": self._run_convexity,
            "fatou": self._run_fatou,
            "l2": self._run_l2,
            "from-below": self._run_from_below,
            "risk": self._run_risk,
        }

    def run(self) -> RunOutcome:
        """Run the experiment.

        Returns:
            The summary record and detail table.

        Raises:
            RunnerError: If a solver fails (exit code 3) or a property check
                rejects its inputs (exit code 1).
        """
        experiment = self.config.experiment
        self.logger.info(f"Running experiment '{experiment}' on {self.lattice!r}")
        try:
            outcome = self._handlers[experiment]()
        except SOLVER_ERRORS as e:
            raise RunnerError(f"{type(e).__name__}: {e}", EXIT_SOLVER_ERROR)
        except PropertyError as e:
            raise RunnerError(f"{type(e).__name__}: {e}", EXIT_PROPERTY_FAILURE)

        outcome.summary = {**self._base_summary(), **outcome.summary}
        status = "passed" if outcome.passed else "failed"
        self.logger.info(f"Experiment '{experiment}' {status}")
        return outcome

    def write(
        self, outcome: RunOutcome, directory: Optional[Union[str, Path]] = None
    ) -> List[Path]:
        """Write the summary and detail files.

        Args:
            outcome: Result of run().
            directory: Output directory. Defaults to the configured one.

        Returns:
            Paths of the written files.

        Raises:
            RunnerError: If a file cannot be written.
        """
        directory = directory or self.config.output.directory()
        writer = ResultWriter(directory, self.config.output.format)
        try:
            paths = [writer.write_summary(outcome.summary)]
            paths.append(writer.write_detail(outcome.columns, outcome.rows))
        except OutputError as e:
            raise RunnerError(str(e), EXIT_SOLVER_ERROR)
        self.logger.info(f"Wrote results to {writer.directory}")
        return paths

    def _base_summary(self) -> Dict[str, Any]:
        config = self.config
        summary: Dict[str, Any] = {
            "experiment": config.experiment,
            "config_digest": config_digest(config.raw),
            "grid": {
                "horizon": config.grid.horizon,
                "n_steps": config.grid.n_steps,
                "mode": config.grid.mode,
            },
            "generator": config.generator.describe(),
            "constraint": config.constraint.describe(),
            "seed": config.seed,
        }
        if config.claim is not None:
            summary["claim"] = config.claim.describe()
        if config.barrier is not None:
            summary["barrier"] = config.barrier.describe()
        return summary

    # Detail tables

    def _field_rows(
        self, y: AdaptedField, z: AdaptedField, increments: Optional[AdaptedField] = None
    ) -> RunOutcome:
        lattice = self.lattice
        if lattice.n_steps <= DETAIL_NODE_LIMIT:
            columns = ["step", "node", "t", "w", "y", "z", "increment"]
            rows = []
            for step in range(lattice.n_steps + 1):
                for node in range(lattice.num_nodes(step)):
                    terminal = step == lattice.n_steps
                    increment = None
                    if not terminal and increments is not None:
                        increment = increments.value(step, node)
                    rows.append(
                        [
                            step,
                            node,
                            lattice.time(step),
                            float(lattice.w(step)[node]),
                            y.value(step, node),
                            None if terminal else z.value(step, node),
                            increment,
                        ]
                    )
            return RunOutcome({}, columns, rows)

        columns = ["step", "t", "nodes", "y_mean", "y_min", "y_max", "z_mean", "increment_mean"]
        rows = []
        for step in range(lattice.n_steps + 1):
            weights = lattice.probabilities(step)
            values = y.at(step)
            terminal = step == lattice.n_steps
            rows.append(
                [
                    step,
                    lattice.time(step),
                    lattice.num_nodes(step),
                    float(np.dot(weights, values)),
                    float(np.min(values)),
                    float(np.max(values)),
                    None if terminal else float(np.dot(weights, z.at(step))),
                    None
                    if terminal or increments is None
                    else float(np.dot(weights, increments.at(step))),
                ]
            )
        return RunOutcome({}, columns, rows)

    def _report_outcome(self, report: PropertyReport, **extra: Any) -> RunOutcome:
        summary = report.to_dict(include_records=False)
        summary.update(extra)
        rows = [
            [record.instance, record.violation, canonical_json(record.details)]
            for record in report.trace
        ]
        return RunOutcome(summary, ["instance", "violation", "details"], rows)

    # Solvers

    def _run_solve(self) -> RunOutcome:
        config = self.config
        solution = solve_bsde(config.generator, config.claim, self.lattice)
        residual = residual_check(
            Supersolution.from_solution(solution), config.generator, self.lattice
        )
        outcome = self._field_rows(solution.y, solution.z)
        outcome.summary = {
            "y_0": solution.y0,
            "max_residual": residual,
            "pass": residual <= RESIDUAL_TOLERANCE,
        }
        return outcome

    def _run_penalize(self) -> RunOutcome:
        config = self.config
        run = solve_penalized(
            config.generator, config.constraint, config.penalty, config.claim, self.lattice
        )
        residual = residual_check(run.to_supersolution(), config.generator, self.lattice)
        lowest = run.a_increments.min_signed()
        outcome = self._field_rows(run.y, run.z, run.a_increments)
        outcome.summary = {
            "y_0": run.y0,
            "m": run.m,
            "max_residual": residual,
            "min_increment": lowest,
            "pass": residual <= RESIDUAL_TOLERANCE and lowest >= INCREMENT_FLOOR,
        }
        return outcome

    def _run_minimal(self) -> RunOutcome:
        config = self.config
        result = solve_minimal(
            config.generator,
            config.constraint,
            config.claim,
            self.lattice,
            config.schedule,
            config.tolerances.tol_m,
            config.tolerances.y_max,
        )
        residual = residual_check(result.limit_supersolution, config.generator, self.lattice)
        monotone = result.monotonicity_violation()
        rows = [[m, run.y0, gap] for (m, gap), run in zip(result.gap_trace, result.runs)]
        return RunOutcome(
            {
                "y_0": result.y0,
                "domain_status": result.domain_status.value,
                "tolerance_met": result.tolerance_met,
                "final_gap": result.gap_trace[-1][1],
                "m_final": result.m_final,
                "reason": result.reason,
                "caveat": result.caveat,
                "monotonicity_violation": monotone,
                "max_residual": residual,
                "pass": monotone <= MONOTONE_TOLERANCE and residual <= RESIDUAL_TOLERANCE,
            },
            ["m", "y_0", "gap"],
            rows,
        )

    def _run_reflected(self) -> RunOutcome:
        config = self.config
        solution = solve_reflected(config.generator, config.barrier, config.claim, self.lattice)
        residual = residual_check(solution, config.generator, self.lattice)
        complementarity = complementarity_violation(solution, config.barrier, self.lattice)
        below = barrier_violation(solution, config.barrier, self.lattice)
        sensitivity = estimate_terminal_sensitivity(
            config.generator, config.barrier, config.claim, self.lattice, seed=config.seed
        )
        outcome = self._field_rows(solution.y, solution.z, solution.c_increments)
        outcome.summary = {
            "y_0": solution.y0,
            "max_residual": residual,
            "complementarity_violation": complementarity,
            "barrier_violation": below,
            "terminal_sensitivity": sensitivity.max_ratio,
            "sensitivity_ratios": [list(pair) for pair in sensitivity.ratios],
            "pass": residual <= RESIDUAL_TOLERANCE
            and complementarity <= RESIDUAL_TOLERANCE
            and below <= 1e-12,
        }
        return outcome

    def _run_compare_oracle(self) -> RunOutcome:
        config = self.config
        phi = config.constraint
        if phi.kind != "reflect_below":
            phi = Constraint.reflect_below(config.barrier)
        oracle = solve_reflected(config.generator, phi.barrier, config.claim, self.lattice)
        result = solve_minimal(
            config.generator,
            phi,
            config.claim,
            self.lattice,
            config.schedule,
            config.tolerances.tol_m,
            config.tolerances.y_max,
            stop_early=False,
        )
        rows = [[run.m, run.y0, oracle.y0, abs(run.y0 - oracle.y0)] for run in result.runs]
        gap = abs(result.y0 - oracle.y0)
        slack = config.tolerances.tol_m + 1e-2 * self.lattice.dt
        minimality = (result.limit_y - oracle.y).max_signed()
        monotone = result.monotonicity_violation()
        self.logger.info(f"Penalized y_0 {result.y0:.10g}, reflected y_0 {oracle.y0:.10g}")
        return RunOutcome(
            {
                "y_0": result.y0,
                "y_0_reflected": oracle.y0,
                "oracle_gap": gap,
                "oracle_tolerance": config.tolerances.oracle,
                "domain_status": result.domain_status.value,
                "m_final": result.m_final,
                "minimality_violation": max(minimality, 0.0),
                "monotonicity_violation": monotone,
                "max_violation": gap,
                "pass": gap <= config.tolerances.oracle
                and minimality <= slack
                and monotone <= MONOTONE_TOLERANCE,
            },
            ["m", "y_0_penalized", "y_0_reflected", "gap"],
            rows,
        )

    # Property checks

    def _t_step(self) -> int:
        if self.config.t_step is not None:
            return self.config.t_step
        return self.lattice.n_steps // 2

    def _run_comparison(self) -> RunOutcome:
        config = self.config
        if config.claim is not None and config.other_claim is not None:
            report = check_comparison(
                config.generator,
                config.constraint,
                config.claim,
                config.other_claim,
                self.lattice,
                config.schedule,
            )
        else:
            report = comparison_suite(
                config.generator,
                config.constraint,
                self.lattice,
                instances=config.instances or 200,
                seed=config.seed,
                schedule=config.schedule,
                scale=config.claim_scale or 1.0,
            )
        return self._report_outcome(report)

    def _run_convexity(self) -> RunOutcome:
        config = self.config
        if config.claim is not None and config.other_claim is not None:
            report = check_convexity(
                config.generator,
                config.constraint,
                config.claim,
                config.other_claim,
                config.mix_weight,
                self.lattice,
                config.schedule,
                config.tolerances.tol_m,
            )
        else:
            report = convexity_suite(
                config.generator,
                config.constraint,
                self.lattice,
                instances=config.instances or 200,
                seed=config.seed,
                schedule=config.schedule,
                tol_m=config.tolerances.tol_m,
                scale=config.claim_scale or 1.0,
            )
        return self._report_outcome(report)

    def _run_fatou(self) -> RunOutcome:
        config = self.config
        report = check_fatou(
            config.generator,
            config.constraint,
            config.claim,
            self.lattice,
            count=config.sequence.count or 100,
            scheme=config.sequence.scheme,
            schedule=config.schedule,
            tol_m=config.tolerances.tol_m,
            y_max=config.tolerances.y_max,
        )
        return self._report_outcome(report)

    def _run_l2(self) -> RunOutcome:
        config = self.config
        report = check_l2_continuity(
            config.generator,
            config.constraint,
            config.claim,
            self.lattice,
            self._t_step(),
            seed=config.seed,
            count=config.sequence.count or 6,
            rate=config.sequence.rate,
            noise_scale=config.sequence.noise_scale,
            schedule=config.schedule,
            tol_m=config.tolerances.tol_m,
            y_max=config.tolerances.y_max,
        )
        return self._report_outcome(report)

    def _run_from_below(self) -> RunOutcome:
        config = self.config
        report = check_from_below(
            config.generator,
            config.constraint,
            config.claim,
            self.lattice,
            self._t_step(),
            count=config.sequence.count or 20,
            schedule=config.schedule,
            tol_m=config.tolerances.tol_m,
            y_max=config.tolerances.y_max,
        )
        return self._report_outcome(report)

    def _run_risk(self) -> RunOutcome:
        config = self.config
        report = audit_risk_measure(
            config.generator,
            config.constraint,
            self.lattice,
            instances=config.instances or 100,
            seed=config.seed,
            scale=config.claim_scale or RISK_CLAIM_SCALE,
            schedule=config.schedule,
            tol_m=config.tolerances.tol_m,
            y_max=config.tolerances.y_max,
        )
        extra = {}
        if config.claim is not None:
            extra["rho"] = risk_measure(
                config.generator,
                config.constraint,
                config.claim,
                self.lattice,
                config.schedule,
                config.tolerances.tol_m,
                config.tolerances.y_max,
            )
        return self._report_outcome(report, **extra)
