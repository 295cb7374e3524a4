"""Invariant checks on a finished execution."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from contact_hybrid.core.dynamics import domain_residuals, dynamics_equivalence_check
from contact_hybrid.core.executor import EventKind, Execution
from contact_hybrid.core.system import Tolerances, validate_system
from contact_hybrid.errors import ContactHybridError

logger = logging.getLogger(__name__)

# Sampled states drift off the constraint manifold by integration error, so flow samples
# get this multiple of tol_domain.
SAMPLE_DOMAIN_FACTOR = 10.0
EQUIVALENCE_TOLERANCE = 1e-6
ENERGY_DRIFT_TOLERANCE = 1e-6
EQUIVALENCE_POINTS_PER_SEGMENT = 3
EQUIVALENCE_MAX_POINTS = 60


@dataclass
class InvariantResult:
    """Outcome of one invariant check."""

    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


class InvariantChecker:
    """Checks an execution against the properties every execution must have."""

    def __init__(
        self,
        tolerances: Tolerances | None = None,
        seed: int = 0,
        progress_callback: Callable[[str, int, int], None] | None = None,
    ):
        self.tolerances = tolerances or Tolerances()
        self.seed = seed
        self.progress_callback = progress_callback

    def _report_progress(self, message: str, current: int, total: int):
        """Report progress to callback if set."""
        if self.progress_callback:
            self.progress_callback(message, current, total)

    def check(self, execution: Execution) -> list[InvariantResult]:
        checks = [
            ("time_domain", self._time_domain),
            ("word", self._word),
            ("edges", self._edges),
            ("transitions_per_event", self._transitions_per_event),
            ("impact_energy", self._impact_energy),
            ("reset_domain", self._reset_domain),
            ("flow_domain", self._flow_domain),
            ("energy_drift", self._energy_drift),
            ("dynamics_equivalence", self._dynamics_equivalence),
            ("system", self._system),
        ]
        results = []
        for i, (name, check) in enumerate(checks, 1):
            self._report_progress(f"Checking {name.replace('_', ' ')}", i, len(checks))
            problems = check(execution)
            result = InvariantResult(name, not problems, "; ".join(problems[:5]))
            if not result.passed:
                logger.warning("invariant_failed name=%s detail=%s", name, result.detail)
            results.append(result)
        return results

    def _time_domain(self, execution: Execution) -> list[str]:
        problems = execution.time_domain.violations()
        if len(execution.time_domain.intervals) != len(execution.word):
            problems.append("time domain and word have different lengths")
        return problems

    def _word(self, execution: Execution) -> list[str]:
        system = execution.system
        problems = [
            f"mode {system.mode_id(m)} at position {i} is not valid"
            for i, m in enumerate(execution.word)
            if not system.is_valid_mode(m)
        ]
        for i, (a, b) in enumerate(zip(execution.word, execution.word[1:], strict=False)):
            if a == b:
                problems.append(f"modes {i} and {i + 1} are both {system.mode_id(a)}")
        return problems

    def _edges(self, execution: Execution) -> list[str]:
        system = execution.system
        return [
            f"t={e.time:.9g}: {system.mode_id(e.from_mode)} -> {system.mode_id(e.to_mode)} "
            "is not an edge"
            for e in execution.events
            if e.kind is not EventKind.ZENO and not system.is_edge(e.from_mode, e.to_mode)
        ]

    def _transitions_per_event(self, execution: Execution) -> list[str]:
        # Massless limbs can chain touchdown and liftoff, so the bound holds for massive systems.
        if execution.system.has_massless_limbs:
            return []
        return [
            f"{count} transitions at t={t:.9g}"
            for t, count in execution.transitions_per_event_time().items()
            if count > 2
        ]

    def _impact_energy(self, execution: Execution) -> list[str]:
        slack = self.tolerances.tol_energy * execution.system.scales.energy
        return [
            f"t={e.time:.9g}: kinetic energy rose by {-e.impulse.energy_change:.3e}"
            for e in execution.events
            if e.impulse is not None and e.impulse.energy_change < -slack
        ]

    def _reset_domain(self, execution: Execution) -> list[str]:
        system = execution.system
        problems = []
        for event, segment in zip(execution.events, execution.segments[1:], strict=False):
            residuals = domain_residuals(system, segment.mode, segment.states[0])
            worst = max(residuals.values())
            if worst > self.tolerances.tol_domain:
                problems.append(
                    f"t={event.time:.9g}: reset state is {worst:.3e} outside "
                    f"{system.mode_id(segment.mode)}"
                )
        return problems

    def _flow_domain(self, execution: Execution) -> list[str]:
        system = execution.system
        limit = self.tolerances.tol_domain * SAMPLE_DOMAIN_FACTOR
        problems = []
        for segment in execution.segments:
            for t, x in zip(segment.times, segment.states, strict=True):
                worst = max(domain_residuals(system, segment.mode, x).values())
                if worst > limit:
                    problems.append(
                        f"t={t:.9g}: sample is {worst:.3e} outside {system.mode_id(segment.mode)}"
                    )
                    break
        return problems

    def _energy_drift(self, execution: Execution) -> list[str]:
        system = execution.system
        if system.applied is not None or system.potential_energy is None:
            return []
        projected = {report.limit_time for report in execution.zeno if report.projected}
        problems = []
        for segment in execution.segments:
            if len(segment.states) < 2 or segment.times[-1] in projected:
                continue
            start = system.total_energy(segment.states[0])
            end = system.total_energy(segment.states[-1])
            reference = max(abs(start), system.scales.energy)
            if abs(end - start) / reference > ENERGY_DRIFT_TOLERANCE:
                problems.append(
                    f"energy drifted by {abs(end - start) / reference:.3e} in "
                    f"{system.mode_id(segment.mode)} starting t={segment.times[0]:.9g}"
                )
        return problems

    def _dynamics_equivalence(self, execution: Execution) -> list[str]:
        system = execution.system
        if system.has_massless_limbs:
            return []
        problems = []
        for segment, t, x in equivalence_points(execution):
            try:
                report = dynamics_equivalence_check(system, segment.mode, x)
            except ContactHybridError as e:
                logger.debug("equivalence_skipped mode=%s t=%.9g reason=%s", segment.mode, t, e)
                continue
            if report.max_relative_deviation > EQUIVALENCE_TOLERANCE:
                problems.append(
                    f"t={t:.9g} {system.mode_id(segment.mode)}: "
                    f"deviation {report.max_relative_deviation:.3e}"
                )
        return problems

    def _system(self, execution: Execution) -> list[str]:
        state = execution.segments[0].states[0]
        return validate_system(execution.system, state, np.random.default_rng(self.seed))


def equivalence_points(execution: Execution) -> list:
    """Sample states spread over every segment: start, middle and end of each.

    Long executions are thinned evenly to ``EQUIVALENCE_MAX_POINTS``.
    """
    points = []
    for segment in execution.segments:
        if not segment.states:
            continue
        count = min(EQUIVALENCE_POINTS_PER_SEGMENT, len(segment.states))
        for i in sorted({int(round(j)) for j in np.linspace(0, len(segment.states) - 1, count)}):
            points.append((segment, segment.times[i], segment.states[i]))
    if len(points) > EQUIVALENCE_MAX_POINTS:
        keep = np.linspace(0, len(points) - 1, EQUIVALENCE_MAX_POINTS).round().astype(int)
        points = [points[i] for i in sorted(set(keep))]
    return points
