"""Event-driven execution of the contact hybrid system.

Within a mode the flow is integrated with an adaptive Runge-Kutta method. The outlet
functions (gaps of inactive normals, cone values of active multipliers) are watched on
every accepted step; the first crossing is localized on the dense output, and at the event
time the guard is classified and the reset applied until the state is no longer in an
outlet set.
"""

from __future__ import annotations

import functools
import logging
import math
from collections import Counter
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

import jax
import jax.numpy as jnp
import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq, minimize_scalar

from contact_hybrid.core.complementarity import (
    ModeSelectionResult,
    distance_trend,
    force_trend,
    solve_fa,
    solve_piv,
)
from contact_hybrid.core.dynamics import (
    check_domain,
    cone_expression,
    domain_residuals,
    mode_kernels,
)
from contact_hybrid.core.impact import ImpulseRecord, new_touchdown, normal_kinematics, post_impact
from contact_hybrid.core.system import ContactMode, MechSystem, Tolerances, as_state
from contact_hybrid.core.zeno import (
    ZenoAction,
    ZenoMonitor,
    ZenoPolicy,
    ZenoReport,
    ZenoSettings,
    zeno_handle,
)
from contact_hybrid.errors import (
    ContactHybridError,
    EventBudgetExhaustedError,
    EventLocalizationError,
    InternalInconsistencyError,
)

logger = logging.getLogger(__name__)

# Dense-output samples per step for guard crossings; interior minima are refined.
GUARD_SAMPLES = 5


class Termination(Enum):
    REACHED_T_END = "ReachedTEnd"
    ZENO_TRUNCATED = "ZenoTruncated"
    ZENO_PROJECTED = "ZenoProjected"
    DIAGNOSTIC = "Diagnostic"


class EventKind(Enum):
    TOUCHDOWN = "touchdown"
    LIFTOFF = "liftoff"
    ZENO = "zeno"


@dataclass(frozen=True)
class ExecutionOptions:
    """Run options for :func:`execute`.

    ``max_step`` defaults to ``sample_dt``. ``max_transitions_per_event`` bounds the
    transition loop at a single event time.
    """

    delta_t: float = 0.03
    tolerances: Tolerances = field(default_factory=Tolerances)
    zeno_policy: ZenoPolicy = ZenoPolicy.PROJECT
    zeno: ZenoSettings = field(default_factory=ZenoSettings)
    sample_dt: float = 0.01
    max_step: float | None = None
    strict_scope: bool = False
    strict_uniqueness: bool = False
    max_transitions_per_event: int = 8
    max_events: int = 20000


@dataclass
class HybridTimeDomain:
    """Consecutive closed intervals; an interval may be degenerate."""

    intervals: list[list[float]] = field(default_factory=list)

    @property
    def event_times(self) -> list[float]:
        return [interval[1] for interval in self.intervals[:-1]]

    def violations(self) -> list[str]:
        problems = []
        for i, (start, end) in enumerate(self.intervals):
            if end < start:
                problems.append(f"interval {i} ends before it starts ({start} > {end})")
            if i and self.intervals[i - 1][1] != start:
                problems.append(f"interval {i} does not start where interval {i - 1} ends")
        return problems


@dataclass
class Segment:
    """Sampled trajectory of one interval; ``multipliers`` has one column per constraint."""

    mode: ContactMode
    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    multipliers: list[np.ndarray] = field(default_factory=list)

    def add(self, t: float, x: np.ndarray, lam: np.ndarray, n_constraints: int) -> None:
        full = np.zeros(n_constraints)
        full[list(self.mode.indices)] = lam
        self.times.append(float(t))
        self.states.append(np.array(x, dtype=float))
        self.multipliers.append(full)


@dataclass
class Event:
    time: float
    kind: EventKind
    from_mode: ContactMode
    to_mode: ContactMode
    impulse: ImpulseRecord | None = None
    selection: ModeSelectionResult | None = None
    trigger: str | None = None

    def to_dict(self, system: MechSystem) -> dict:
        data: dict = {
            "time": self.time,
            "kind": self.kind.value,
            "from": system.mode_id(self.from_mode),
            "to": system.mode_id(self.to_mode),
            "trigger": self.trigger,
        }
        if self.impulse is not None:
            impulse = self.impulse.to_dict(system)
            data["impulses"] = impulse["contact_impulse"]
            data["pseudo_impulses"] = impulse["pseudo_impulse"]
            data["energy_change"] = impulse["energy_change"]
        if self.selection is not None:
            data["predicate"] = self.selection.satisfied_predicate.value
            data["solutions_found"] = self.selection.solutions_found
            data["margins"] = self.selection.margins_by_label(system)
        return data


@dataclass
class Execution:
    system: MechSystem
    time_domain: HybridTimeDomain = field(default_factory=HybridTimeDomain)
    word: list[ContactMode] = field(default_factory=list)
    segments: list[Segment] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)
    termination: Termination = Termination.REACHED_T_END
    diagnostic: str | None = None
    diagnostic_message: str | None = None
    zeno: list[ZenoReport] = field(default_factory=list)
    final_state: np.ndarray | None = None

    @property
    def final_mode(self) -> ContactMode:
        return self.word[-1]

    @property
    def transitions(self) -> int:
        return len(self.events)

    def transitions_per_event_time(self) -> dict[float, int]:
        return dict(Counter(e.time for e in self.events if e.kind is not EventKind.ZENO))

    def word_ids(self) -> list[str]:
        return [self.system.mode_id(m) for m in self.word]


# Outlet functions


@dataclass(frozen=True, eq=False)
class OutletFunctions:
    names: tuple[str, ...]
    values: Callable


@functools.lru_cache(maxsize=256)
def outlet_functions(system: MechSystem, mode: ContactMode) -> OutletFunctions:
    """Scaled outlet scalars of ``mode``: inactive gaps, then active cone values."""
    inactive = tuple(k for k in system.normal_indices if k not in mode)
    active = mode.indices
    kernels = mode_kernels(system, mode)
    position = kernels.position
    scales = system.scales

    def values(x):
        parts = []
        if inactive:
            parts.append(system.distances(inactive, x[: system.dim]) / scales.position)
        if active:
            lam = kernels.multipliers(x)
            cones = [cone_expression(system, i, lam, position) for i in active]
            parts.append(jnp.stack(cones) / scales.force)
        return jnp.concatenate(parts) if parts else jnp.zeros((0,))

    names = tuple(f"gap:{system.label(k)}" for k in inactive) + tuple(
        f"force:{system.label(i)}" for i in active
    )
    return OutletFunctions(names, jax.jit(values))


def in_domain(
    system: MechSystem, mode: ContactMode, state, tolerances: Tolerances | None = None
) -> bool:
    tol = tolerances or Tolerances()
    return all(v <= tol.tol_domain for v in domain_residuals(system, mode, state).values())


def outlet_reasons(
    system: MechSystem, mode: ContactMode, state, tolerances: Tolerances | None = None
) -> list[str]:
    """Names of the outlet functions that put the state in the outlet set of ``mode``."""
    tol = tolerances or Tolerances()
    x = as_state(system, state)
    reasons = []
    for k, (distance, _) in normal_kinematics(system, x).items():
        if k in mode:
            continue
        if distance < -tol.tol_domain * system.scales.position:
            reasons.append(f"gap:{system.label(k)}")
        elif abs(distance) <= tol.tol_domain * system.scales.position:
            if not distance_trend(system, mode, k, x, tol).positive:
                reasons.append(f"gap:{system.label(k)}")
    for i in mode.indices:
        if force_trend(system, mode, mode, i, x, tol).negative:
            reasons.append(f"force:{system.label(i)}")
    return reasons


def in_outlet(
    system: MechSystem, mode: ContactMode, state, tolerances: Tolerances | None = None
) -> bool:
    """Some inactive gap trends ⪯ 0 or some active cone value trends ≺ 0."""
    return bool(outlet_reasons(system, mode, state, tolerances))


def select_transition(
    system: MechSystem,
    mode: ContactMode,
    state,
    delta_t: float,
    tolerances: Tolerances | None = None,
    *,
    strict_scope: bool = False,
    strict_uniqueness: bool = False,
) -> tuple[ModeSelectionResult, EventKind]:
    tol = tolerances or Tolerances()
    x = as_state(system, state)
    if new_touchdown(system, x, tol):
        result = solve_piv(system, mode, x, delta_t, tol, strict_uniqueness=strict_uniqueness)
        return result, EventKind.TOUCHDOWN
    result = solve_fa(
        system, x, mode, tol, strict_scope=strict_scope, strict_uniqueness=strict_uniqueness
    )
    return result, EventKind.LIFTOFF


def classify_guard(
    system: MechSystem,
    mode: ContactMode,
    state,
    delta_t: float,
    tolerances: Tolerances | None = None,
    **kwargs,
) -> ContactMode:
    """PIV selection on a new touchdown, FA selection otherwise."""
    return select_transition(system, mode, state, delta_t, tolerances, **kwargs)[0].selected


def apply_reset(
    system: MechSystem,
    from_mode: ContactMode,
    to_mode: ContactMode,
    state,
) -> np.ndarray:
    """Plastic reset into ``to_mode``; the configuration is unchanged."""
    x = as_state(system, state)
    record = post_impact(system, to_mode, x)
    logger.debug(
        "reset from=%s to=%s energy_loss=%.3e",
        system.mode_id(from_mode),
        system.mode_id(to_mode),
        record.energy_change,
    )
    return np.concatenate([system.split(x)[0], record.post_velocity])


# Execution


class _ExecutionStopped(Exception):
    def __init__(self, termination: Termination):
        self.termination = termination


class _Runner:
    def __init__(
        self,
        system: MechSystem,
        mode: ContactMode,
        x: np.ndarray,
        t_end: float,
        options: ExecutionOptions,
    ):
        self.system = system
        self.mode = mode
        self.x = x
        self.t_end = t_end
        self.options = options
        self.tol = options.tolerances
        self.execution = Execution(system)
        self.monitor = ZenoMonitor(options.zeno, system.scales.time)
        self.suppressed: set[str] = set()
        self.band = self.tol.tol_domain
        self.projected = False

    # bookkeeping

    def _lambda(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(mode_kernels(self.system, self.mode).multipliers(jnp.asarray(x)))

    def _sample(self, t: float, x: np.ndarray) -> None:
        self.execution.segments[-1].add(t, x, self._lambda(x), self.system.n_constraints)

    def _open_interval(self, t: float) -> None:
        self.execution.time_domain.intervals.append([t, t])
        self.execution.word.append(self.mode)
        self.execution.segments.append(Segment(self.mode))
        self._sample(t, self.x)

    def _close_interval(self, t: float) -> None:
        self.execution.time_domain.intervals[-1][1] = t

    def _switch(self, t: float, target: ContactMode, x: np.ndarray, event: Event) -> None:
        self._close_interval(t)
        self.execution.events.append(event)
        logger.info(
            "event t=%.12g kind=%s from=%s to=%s",
            t,
            event.kind.value,
            self.system.mode_id(event.from_mode),
            self.system.mode_id(target),
        )
        self.mode = target
        self.x = x
        self.suppressed.clear()
        self._open_interval(t)
        if len(self.execution.events) > self.options.max_events:
            raise EventBudgetExhaustedError(self.options.max_events, t)

    # integration

    def _first_crossing(self, dense, t_lo: float, t_hi: float, outlet: OutletFunctions):
        ts = np.linspace(t_lo, t_hi, GUARD_SAMPLES)
        values = np.array([np.asarray(outlet.values(jnp.asarray(dense(t)))) for t in ts])
        xtol = self.tol.event_time * self.system.scales.time
        best = None
        for j, name in enumerate(outlet.names):
            if name in self.suppressed:
                continue

            def g(s: float, j: int = j) -> float:
                return float(outlet.values(jnp.asarray(dense(s)))[j])

            below = np.nonzero(values[1:, j] < -self.band)[0]
            dip = None
            if below.size:
                i = int(below[0]) + 1
                dip = self._dip(g, ts[: i + 1], values[: i + 1, j], xtol)
            if dip is not None:
                a, b = dip
            elif below.size:
                a, b = ts[i - 1], ts[i]
                if values[i - 1, j] <= 0:
                    root = a
                    if best is None or root < best[0]:
                        best = (float(root), name)
                    continue
            else:
                dip = self._dip(g, ts, values[:, j], xtol)
                if dip is None:
                    continue
                a, b = dip
            try:
                root = brentq(g, a, b, xtol=xtol)
            except ValueError as e:
                raise EventLocalizationError(name, a, b, str(e)) from e
            if best is None or root < best[0]:
                best = (float(root), name)
        return best

    def _dip(self, g, ts: np.ndarray, column: np.ndarray, xtol: float) -> tuple[float, float] | None:
        """Bracket a guard that goes below the band and back up between two samples.

        Each strict interior minimum of the samples is refined with a bounded scalar
        minimization; returns ``(a, t_min)`` with g(a) > 0 and g(t_min) < -band.
        """
        for i in range(1, len(ts) - 1):
            if not (column[i] < column[i - 1] and column[i] < column[i + 1]):
                continue
            found = minimize_scalar(
                g, bounds=(ts[i - 1], ts[i + 1]), method="bounded", options={"xatol": xtol}
            )
            if found.fun >= -self.band:
                continue
            before = [k for k in (i - 1, i) if ts[k] < found.x and column[k] > 0]
            if not before:
                continue
            logger.debug("guard_dip t=%.12g value=%.3e", found.x, found.fun)
            return float(ts[before[-1]]), float(found.x)
        return None

    def _integrate(self, t0: float) -> tuple[float, str | None]:
        system, opts = self.system, self.options
        kernels = mode_kernels(system, self.mode)
        outlet = outlet_functions(system, self.mode)

        def rhs(_t: float, y: np.ndarray) -> np.ndarray:
            return np.asarray(kernels.flow(jnp.asarray(y)))

        solver = DOP853(
            rhs,
            t0,
            self.x,
            self.t_end,
            rtol=self.tol.rtol,
            atol=self.tol.atol * system.scales.position,
            max_step=opts.max_step or opts.sample_dt,
        )
        dt = opts.sample_dt
        next_sample = (math.floor(t0 / dt + 1e-9) + 1) * dt
        logger.debug("segment start t=%.12g mode=%s", t0, system.mode_id(self.mode))
        while solver.status == "running":
            message = solver.step()
            if solver.status == "failed":
                t_old = solver.t_old if solver.t_old is not None else t0
                raise EventLocalizationError("flow", t_old, solver.t, message or "step failed")
            dense = solver.dense_output()
            crossing = self._first_crossing(dense, solver.t_old, solver.t, outlet)
            t_stop = crossing[0] if crossing else solver.t
            while next_sample < t_stop and next_sample < self.t_end:
                self._sample(next_sample, dense(next_sample))
                next_sample += dt
            if crossing:
                self.x = np.asarray(dense(t_stop), dtype=float)
                self._sample(t_stop, self.x)
                self._close_interval(t_stop)
                return t_stop, crossing[1]
            if self.suppressed:
                current = np.asarray(outlet.values(jnp.asarray(solver.y)))
                for j, name in enumerate(outlet.names):
                    if name in self.suppressed and current[j] > self.band:
                        self.suppressed.discard(name)
        self.x = np.asarray(solver.y, dtype=float)
        self._sample(self.t_end, self.x)
        self._close_interval(self.t_end)
        return self.t_end, None

    # transitions

    def _transitions(self, t: float, trigger: str | None) -> None:
        system, opts = self.system, self.options
        count = 0
        while True:
            reasons = [
                r
                for r in outlet_reasons(system, self.mode, self.x, self.tol)
                if r not in self.suppressed
            ]
            if not reasons:
                if trigger is not None and count == 0:
                    self.suppressed.add(trigger)
                break
            selection, kind = select_transition(
                system,
                self.mode,
                self.x,
                opts.delta_t,
                self.tol,
                strict_scope=opts.strict_scope,
                strict_uniqueness=opts.strict_uniqueness,
            )
            target = selection.selected
            if target == self.mode:
                logger.debug("outlet_kept_mode t=%.12g reasons=%s", t, reasons)
                self.suppressed.update(reasons)
                break
            if count >= opts.max_transitions_per_event:
                raise InternalInconsistencyError(
                    f"more than {count} transitions at t={t:.12g} without leaving the outlet set"
                )
            record = post_impact(system, target, self.x, opts.delta_t, self.tol)
            x = np.concatenate([system.split(self.x)[0], record.post_velocity])
            first_trigger = trigger if count == 0 else None
            event = Event(t, kind, self.mode, target, record, selection, first_trigger)
            self._switch(t, target, x, event)
            count += 1
        if count:
            self.monitor.record(t, self.mode, self.x)
            self._zeno(t)

    def _zeno(self, t: float) -> None:
        decision = zeno_handle(self.system, self.monitor, self.options.zeno_policy, self.tol)
        if decision.action is ZenoAction.CONTINUE:
            return
        self.execution.zeno.append(decision.report)
        if decision.action is ZenoAction.TRUNCATE:
            raise _ExecutionStopped(Termination.ZENO_TRUNCATED)
        report = decision.report
        limit_time = min(report.limit_time, self.t_end)
        self._close_interval(limit_time)
        self.projected = True
        if report.limit_mode != self.mode:
            event = Event(limit_time, EventKind.ZENO, self.mode, report.limit_mode, trigger="zeno")
            self._switch(limit_time, report.limit_mode, decision.state, event)
        else:
            self.x = decision.state
            self._sample(limit_time, self.x)
        self.time = limit_time
        if limit_time < self.t_end:
            self._transitions(limit_time, None)

    def run(self) -> Execution:
        execution = self.execution
        self.time = 0.0
        self._open_interval(0.0)
        try:
            self._transitions(0.0, None)
            while self.time < self.t_end:
                t, trigger = self._integrate(self.time)
                self.time = t
                if trigger is None:
                    break
                self._transitions(t, trigger)
            execution.termination = (
                Termination.ZENO_PROJECTED if self.projected else Termination.REACHED_T_END
            )
        except _ExecutionStopped as stop:
            execution.termination = stop.termination
        except ContactHybridError as e:
            execution.termination = Termination.DIAGNOSTIC
            execution.diagnostic = type(e).__name__.removesuffix("Error")
            execution.diagnostic_message = str(e)
            logger.error("diagnostic t=%.12g kind=%s: %s", self.time, execution.diagnostic, e)
        execution.final_state = self.x
        return execution


def execute(
    system: MechSystem,
    initial_mode: ContactMode,
    initial_state,
    t_end: float,
    options: ExecutionOptions | None = None,
) -> Execution:
    """Run the hybrid execution from ``initial_state`` in ``initial_mode`` up to ``t_end``.

    Engine diagnostics end the run with ``Termination.DIAGNOSTIC``; they are not raised.

    Raises:
        DomainViolationError: If the initial state is not in the initial mode's domain.
    """
    options = options or ExecutionOptions()
    x = as_state(system, initial_state)
    check_domain(system, initial_mode, x, options.tolerances.tol_domain)
    logger.info(
        "execute system=%s mode=%s t_end=%g delta_t=%g",
        system.name,
        system.mode_id(initial_mode),
        t_end,
        options.delta_t,
    )
    return _Runner(system, initial_mode, x, t_end, options).run()
