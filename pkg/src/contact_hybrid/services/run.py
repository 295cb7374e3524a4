"""Run service: build a scenario, execute it, check it and write its outputs."""

import logging
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from pathlib import Path

from contact_hybrid import __version__
from contact_hybrid.core.executor import Execution, Termination, execute
from contact_hybrid.models.scenario import ScenarioConfig
from contact_hybrid.scenarios.build import BuiltScenario, build_scenario
from contact_hybrid.services.checks import InvariantChecker, InvariantResult
from contact_hybrid.services.output import (
    EVENTS_FILE,
    REPORT_FILE,
    TRAJECTORY_FILE,
    write_events,
    write_report,
    write_trajectory,
)

logger = logging.getLogger(__name__)


@dataclass
class RunReport:
    """Result of a run operation."""

    scenario: str
    termination: Termination
    execution: Execution
    built: BuiltScenario
    invariants: list[InvariantResult] = field(default_factory=list)
    outputs: dict[str, str] = field(default_factory=dict)

    @property
    def diagnostic(self) -> str | None:
        return self.execution.diagnostic

    @property
    def invariants_passed(self) -> bool:
        return all(result.passed for result in self.invariants)

    @property
    def exit_code(self) -> int:
        if self.termination is Termination.DIAGNOSTIC:
            return 2
        if not self.invariants_passed:
            return 3
        return 0

    def to_dict(self) -> dict:
        execution = self.execution
        system = execution.system
        options = self.built.options
        return {
            "success": self.exit_code == 0,
            "version": __version__,
            "scenario": self.scenario,
            "termination": self.termination.value,
            "diagnostic": execution.diagnostic,
            "diagnostic_message": execution.diagnostic_message,
            "t_end": self.built.t_end,
            "final_time": execution.time_domain.intervals[-1][1],
            "final_mode": system.mode_id(execution.final_mode),
            "transitions": execution.transitions,
            "word": execution.word_ids(),
            "time_domain": [list(interval) for interval in execution.time_domain.intervals],
            "zeno": [report.to_dict(system) for report in execution.zeno],
            "settings": {
                "delta_t": options.delta_t,
                "sample_dt": options.sample_dt,
                "zeno_policy": options.zeno_policy.value,
                "strict_scope": options.strict_scope,
                "strict_uniqueness": options.strict_uniqueness,
                "tolerances": asdict(options.tolerances),
            },
            "invariants": [result.to_dict() for result in self.invariants],
            "outputs": self.outputs,
        }


class RunService:
    """Service for executing one scenario."""

    def __init__(
        self,
        config: ScenarioConfig,
        output_dir: Path | None = None,
        check: bool = True,
        progress_callback: Callable[[str, int, int], None] | None = None,
    ):
        """Initialize the run service.

        Args:
            config: The scenario to run, with any overrides already applied.
            output_dir: Directory for trajectory, events and report; nothing is written if None.
            check: If True, run the invariant suite on the execution.
            progress_callback: Optional callback for progress updates.
        """
        self.config = config
        self.output_dir = output_dir
        self.check = check
        self.progress_callback = progress_callback

    def _report_progress(self, message: str, current: int, total: int):
        """Report progress to callback if set."""
        if self.progress_callback:
            self.progress_callback(message, current, total)

    def run(self) -> RunReport:
        """Build, execute, check and write.

        Raises:
            ScenarioValidationError: If the scenario cannot be built.
        """
        total = 4
        self._report_progress(f"Building {self.config.scenario}", 1, total)
        built = build_scenario(self.config)

        self._report_progress(f"Executing to t={built.t_end:g}", 2, total)
        execution = execute(built.system, built.mode, built.state, built.t_end, built.options)
        report = RunReport(self.config.scenario, execution.termination, execution, built)

        if self.check:
            self._report_progress("Checking invariants", 3, total)
            checker = InvariantChecker(built.options.tolerances, self.config.run.seed)
            report.invariants = checker.check(execution)

        if self.output_dir is not None:
            self._report_progress(f"Writing {self.output_dir}", 4, total)
            paths = {
                "trajectory": self.output_dir / TRAJECTORY_FILE,
                "events": self.output_dir / EVENTS_FILE,
                "report": self.output_dir / REPORT_FILE,
            }
            report.outputs = {name: str(path) for name, path in paths.items()}
            write_trajectory(execution, paths["trajectory"])
            write_events(execution, paths["events"])
            write_report(report.to_dict(), paths["report"])

        logger.info(
            "run_done scenario=%s termination=%s transitions=%d",
            self.config.scenario,
            execution.termination.value,
            execution.transitions,
        )
        return report
