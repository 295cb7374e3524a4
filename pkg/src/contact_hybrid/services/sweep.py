"""Sweep service: run one scenario over a range of values of a single parameter."""

import csv
import logging
import threading
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from contact_hybrid.core.executor import EventKind, Execution, Termination
from contact_hybrid.errors import ScenarioValidationError
from contact_hybrid.models.catalog import get_entry
from contact_hybrid.models.scenario import ScenarioConfig, with_overrides
from contact_hybrid.services.run import RunService

logger = logging.getLogger(__name__)

SWEEP_FILE = "sweep.csv"
SWEEP_COLUMNS = ["value", "settled", "transitions", "settle_time", "termination"]
# Run settings that can be swept alongside the scenario's own sweepable parameters
RUN_SWEEPABLE = ("delta_t",)


@dataclass
class SweepPoint:
    """Outcome of the run at one parameter value."""

    value: float
    settled: bool
    transitions: int
    settle_time: float
    termination: str
    diagnostic: str | None = None
    report: str | None = None


@dataclass
class SweepReport:
    """Result of a sweep operation."""

    scenario: str
    parameter: str
    points: list[SweepPoint] = field(default_factory=list)
    output: str | None = None

    @property
    def threshold(self) -> float | None:
        """Largest swept value whose run settled at its first event."""
        settled = [p.value for p in self.points if p.settled]
        return max(settled) if settled else None

    @property
    def diagnostics(self) -> int:
        return sum(1 for p in self.points if p.termination == Termination.DIAGNOSTIC.value)

    def to_dict(self) -> dict:
        return {
            "success": self.diagnostics == 0,
            "scenario": self.scenario,
            "parameter": self.parameter,
            "threshold": self.threshold,
            "points": [vars(p) for p in self.points],
            "output": self.output,
        }


def run_dirname(parameter: str, value: float) -> str:
    """Directory holding the outputs of one swept run, e.g. ``impact_speed=0.05``."""
    return f"{parameter}={value!r}"


def summarize(value: float, execution: Execution) -> SweepPoint:
    """Settled means every transition happened at the first event time."""
    times = [e.time for e in execution.events if e.kind is not EventKind.ZENO]
    diagnostic = execution.termination is Termination.DIAGNOSTIC
    settled = bool(times) and not diagnostic and all(t == times[0] for t in times)
    settle_time = times[-1] if times else 0.0
    return SweepPoint(
        value=value,
        settled=settled,
        transitions=execution.transitions,
        settle_time=settle_time,
        termination=execution.termination.value,
        diagnostic=execution.diagnostic,
    )


class SweepService:
    """Service for sweeping one scenario parameter."""

    def __init__(
        self,
        config: ScenarioConfig,
        parameter: str,
        values: Sequence[float],
        output_dir: Path | None = None,
        workers: int = 4,
        progress_callback: Callable[[str, int, int], None] | None = None,
    ):
        self.config = config
        self.parameter = parameter
        self.values = list(values)
        self.output_dir = output_dir
        self.workers = workers
        self.progress_callback = progress_callback
        self._done = 0
        self._lock = threading.Lock()

    def _report_progress(self, message: str, current: int, total: int):
        """Report progress to callback if set."""
        if self.progress_callback:
            self.progress_callback(message, current, total)

    def _validate(self) -> None:
        entry = get_entry(self.config.scenario)
        allowed = (*entry.sweepable, *RUN_SWEEPABLE)
        if self.parameter not in allowed:
            raise ScenarioValidationError(
                [
                    f"sweep: {self.config.scenario} has no sweepable parameter "
                    f"{self.parameter!r}; choose one of {', '.join(allowed)}"
                ]
            )
        if not self.values:
            raise ScenarioValidationError(["sweep: no values to sweep"])
        if self.parameter in RUN_SWEEPABLE and min(self.values) < 0:
            raise ScenarioValidationError([f"sweep: {self.parameter} must be >= 0"])

    def _run_one(self, value: float) -> SweepPoint:
        if self.parameter in RUN_SWEEPABLE:
            config = with_overrides(self.config, run={self.parameter: value})
        else:
            config = with_overrides(self.config, parameters={self.parameter: value})
        run_dir = None
        if self.output_dir is not None:
            run_dir = self.output_dir / run_dirname(self.parameter, value)
        report = RunService(config, output_dir=run_dir, check=False).run()
        point = summarize(value, report.execution)
        point.report = report.outputs.get("report")
        with self._lock:
            self._done += 1
            done = self._done
        self._report_progress(f"{self.parameter}={value:g}", done, len(self.values))
        logger.debug(
            "sweep_point %s=%g settled=%s transitions=%d",
            self.parameter,
            value,
            point.settled,
            point.transitions,
        )
        return point

    def sweep(self) -> SweepReport:
        """Run every value and aggregate the results in input order.

        Raises:
            ScenarioValidationError: If the parameter is unknown or a value is invalid.
        """
        self._validate()
        with ThreadPoolExecutor(max_workers=max(1, self.workers)) as pool:
            points = list(pool.map(self._run_one, self.values))
        report = SweepReport(self.config.scenario, self.parameter, points)

        if self.output_dir is not None:
            path = self.output_dir / SWEEP_FILE
            write_sweep(report, path)
            report.output = str(path)
        logger.info(
            "sweep_done scenario=%s parameter=%s points=%d threshold=%s",
            report.scenario,
            report.parameter,
            len(points),
            report.threshold,
        )
        return report


def write_sweep(report: SweepReport, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_COLUMNS)
        for p in report.points:
            writer.writerow(
                [repr(p.value), str(p.settled).lower(), p.transitions, repr(p.settle_time), p.termination]
            )
    logger.info("wrote path=%s rows=%d", path, len(report.points))
