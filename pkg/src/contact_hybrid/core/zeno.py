"""Detection and projection of Zeno accumulation.

A run of event times whose gaps contract geometrically is extrapolated to its limit: the
limit time by the geometric series of the gaps, the limit state by Aitken acceleration of
the post-event states, and the limit mode by the union of the modes visited.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import jax.numpy as jnp
import numpy as np

from contact_hybrid.core.dynamics import domain_residuals
from contact_hybrid.core.impact import post_impact
from contact_hybrid.core.system import (
    EMPTY_MODE,
    ContactMode,
    MechSystem,
    Tolerances,
    independent_subset,
)
from contact_hybrid.errors import ContactHybridError, ProjectionRejectedError

logger = logging.getLogger(__name__)


class ZenoPolicy(Enum):
    PROJECT = "project"
    ABORT = "abort"


@dataclass(frozen=True)
class ZenoSettings:
    """Detector thresholds.

    Either ``events`` transitions inside ``window`` seconds with every gap ratio below
    ``ratio``, or ``min_events`` contracting gaps ending below ``gap_floor`` time scales.
    """

    events: int = 50
    window: float = 0.5
    ratio: float = 0.95
    min_events: int = 8
    gap_floor: float = 1e-3


@dataclass(frozen=True)
class EventSample:
    time: float
    mode: ContactMode
    state: np.ndarray


@dataclass(frozen=True)
class ZenoReport:
    """What the detector saw and where the projection went."""

    detected_at: float
    events: int
    ratio: float
    limit_time: float
    limit_mode: ContactMode
    projected: bool
    gaps: tuple[float, ...] = field(default_factory=tuple)
    rejected: str | None = None

    def to_dict(self, system: MechSystem) -> dict:
        return {
            "detected_at": self.detected_at,
            "events": self.events,
            "ratio": self.ratio,
            "limit_time": self.limit_time,
            "limit_mode": system.mode_id(self.limit_mode),
            "projected": self.projected,
            "rejected": self.rejected,
            "policy_note": "limit extrapolated from the geometric event tail",
        }


class ZenoMonitor:
    """Keeps the recent event times and post-event states of one execution."""

    def __init__(self, settings: ZenoSettings, time_scale: float = 1.0):
        self.settings = settings
        self.time_scale = time_scale
        self._samples: deque[EventSample] = deque(maxlen=max(settings.events, settings.min_events) + 2)

    def record(self, time: float, mode: ContactMode, state: np.ndarray) -> None:
        """Record the state after all transitions at ``time``; repeated times overwrite."""
        sample = EventSample(time, mode, np.array(state, dtype=float))
        if self._samples and self._samples[-1].time == time:
            self._samples[-1] = sample
        else:
            self._samples.append(sample)

    def clear(self) -> None:
        self._samples.clear()

    @property
    def samples(self) -> list[EventSample]:
        return list(self._samples)

    @staticmethod
    def _gaps(samples: list[EventSample]) -> np.ndarray:
        times = np.array([s.time for s in samples])
        return np.diff(times)

    def suspect(self) -> list[EventSample] | None:
        """The contracting tail that triggered detection, or None."""
        s = self.settings
        samples = self.samples
        if len(samples) < 3:
            return None

        # Dense window of many contracting events.
        last = samples[-1].time
        window = [e for e in samples if e.time >= last - s.window]
        if len(window) >= s.events:
            gaps = self._gaps(window)
            if np.all(gaps > 0) and np.all(gaps[1:] / gaps[:-1] < s.ratio):
                return window

        # Short tail that has already shrunk below the floor.
        if len(samples) >= s.min_events + 1:
            tail = samples[-(s.min_events + 1) :]
            gaps = self._gaps(tail)
            contracting = np.all(gaps > 0) and np.all(gaps[1:] / gaps[:-1] < s.ratio)
            if contracting and gaps[-1] < s.gap_floor * self.time_scale:
                return tail
        return None


def _stride(samples: list[EventSample]) -> int:
    modes = [e.mode for e in samples]
    alternating = len(set(modes)) == 2 and all(a != b for a, b in zip(modes, modes[1:], strict=False))
    return 2 if alternating and len(samples) >= 5 else 1


def contraction_ratio(samples: list[EventSample]) -> float:
    gaps = np.diff([e.time for e in samples])
    ratios = gaps[1:] / gaps[:-1]
    return float(np.median(ratios[-min(5, len(ratios)) :]))


def extrapolate(samples: list[EventSample]) -> tuple[float, np.ndarray, float]:
    """Limit time, limit state and gap ratio of a contracting event tail."""
    ratio = min(contraction_ratio(samples), 0.999)
    last_gap = samples[-1].time - samples[-2].time
    limit_time = samples[-1].time + last_gap * ratio / (1.0 - ratio)

    stride = _stride(samples)
    x2 = samples[-1].state
    x1 = samples[-1 - stride].state
    x0 = samples[-1 - 2 * stride].state
    d1 = x2 - x1
    d0 = x1 - x0
    n0 = float(np.linalg.norm(d0))
    rho = float(np.linalg.norm(d1)) / n0 if n0 > 0 else 0.0
    if 0.0 < rho < 1.0:
        limit_state = x2 + d1 * rho / (1.0 - rho)
    else:
        limit_state = x2.copy()
    return limit_time, limit_state, ratio


def _project_configuration(system: MechSystem, mode: ContactMode, q: np.ndarray) -> np.ndarray:
    """Gauss-Newton steps onto a_k(q) = 0 for the normals of ``mode``."""
    normals = mode.normals
    if not normals:
        return q
    q = q.copy()
    for _ in range(10):
        qj = jnp.asarray(q)
        residual = np.asarray(system.distances(normals, qj))
        if np.max(np.abs(residual)) < 1e-14 * system.scales.position:
            break
        rows = np.asarray(system.constraint_rows(normals, qj))
        q = q - rows.T @ np.linalg.lstsq(rows @ rows.T, residual, rcond=None)[0]
    return q


def project_limit(
    system: MechSystem,
    samples: list[EventSample],
    tolerances: Tolerances,
) -> tuple[float, ContactMode, np.ndarray, float]:
    """Extrapolate the tail and land the limit state in the limit mode's domain.

    Returns ``(time, mode, state, ratio)``.

    Raises:
        ProjectionRejectedError: If the projected state is not in the domain of the mode.
    """
    limit_time, limit_state, ratio = extrapolate(samples)
    union = EMPTY_MODE
    for sample in samples:
        union = union.union(sample.mode)
    q, _ = system.split(limit_state)
    limit_mode = independent_subset(system, union, q)

    q = _project_configuration(system, limit_mode, q)
    state = np.concatenate([q, limit_state[system.dim :]])
    try:
        state = np.concatenate([q, post_impact(system, limit_mode, state).post_velocity])
    except ContactHybridError as e:
        raise ProjectionRejectedError(system.mode_id(limit_mode), str(e)) from e

    residuals = domain_residuals(system, limit_mode, state)
    violations = {k: v for k, v in residuals.items() if v > tolerances.tol_domain}
    if violations:
        raise ProjectionRejectedError(
            system.mode_id(limit_mode),
            ", ".join(f"{k}={v:.3e}" for k, v in violations.items()),
        )
    logger.info(
        "zeno_projection t=%.9g ratio=%.4f mode=%s",
        limit_time,
        ratio,
        system.mode_id(limit_mode),
    )
    return limit_time, limit_mode, state, ratio


class ZenoAction(Enum):
    CONTINUE = "continue"
    PROJECT = "project"
    TRUNCATE = "truncate"


@dataclass(frozen=True)
class ZenoDecision:
    action: ZenoAction
    report: ZenoReport | None = None
    state: np.ndarray | None = None


def zeno_handle(
    system: MechSystem,
    monitor: ZenoMonitor,
    policy: ZenoPolicy,
    tolerances: Tolerances,
) -> ZenoDecision:
    """Decide how an execution continues after its latest event time.

    A projection whose limit state falls outside the limit mode's domain truncates the
    execution; the report then carries the rejection reason and ``projected=False``.
    """
    tail = monitor.suspect()
    if tail is None:
        return ZenoDecision(ZenoAction.CONTINUE)
    gaps = tuple(float(g) for g in np.diff([e.time for e in tail]))
    logger.info(
        "zeno_detected t=%.9g events=%d last_gap=%.3e", tail[-1].time, len(tail), gaps[-1]
    )
    if policy is ZenoPolicy.ABORT:
        ratio = contraction_ratio(tail)
        report = ZenoReport(tail[-1].time, len(tail), ratio, tail[-1].time, tail[-1].mode, False, gaps)
        return ZenoDecision(ZenoAction.TRUNCATE, report)

    try:
        time, mode, state, ratio = project_limit(system, tail, tolerances)
    except ProjectionRejectedError as e:
        logger.warning("zeno_projection_rejected t=%.9g: %s", tail[-1].time, e)
        ratio = contraction_ratio(tail)
        report = ZenoReport(
            tail[-1].time, len(tail), ratio, tail[-1].time, tail[-1].mode, False, gaps, e.reason
        )
        return ZenoDecision(ZenoAction.TRUNCATE, report)
    monitor.clear()
    report = ZenoReport(tail[-1].time, len(tail), ratio, time, mode, True, gaps)
    return ZenoDecision(ZenoAction.PROJECT, report, state)
