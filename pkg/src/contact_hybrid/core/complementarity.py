"""Mode selection by exhaustive enumeration of complementarity conditions.

Three predicates decide which constraints are active after an event:

* FA (force/acceleration): k ∈ J ⟺ U_k(λ_{J∪{k}}) trends ⪰ 0 along the flow of J.
* IV (impulse/velocity): k ∈ J ⟺ U_k(P̂_{J∪{k}}) ≥ 0.
* PIV: as IV, but k may also stay when U_k(P̂_{J∪{k}} + P̃_{J∪{k}}) ≥ 0.

Candidates are the valid modes inside the scope, largest first and then lexicographic in
the global constraint order. The first satisfying candidate is the answer.
"""

from __future__ import annotations

import functools
import itertools
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum

import jax.numpy as jnp
import numpy as np

from contact_hybrid.core.dynamics import cone_expression, mode_kernels
from contact_hybrid.core.impact import ImpactTerms, impact_terms, normal_kinematics, touchdown_set
from contact_hybrid.core.linalg import (
    BlockInverse,
    build_block_inverse,
    constraint_rank,
    extend_block_inverse,
)
from contact_hybrid.core.system import ContactMode, MechSystem, Tolerances, as_state
from contact_hybrid.core.trending import (
    JaxLieOracle,
    Sign,
    TrendSign,
    trend_sign_from_oracle,
)
from contact_hybrid.errors import (
    DegenerateExtensionError,
    MultipleSolutionsError,
    NoSolutionError,
    RankDeficientConstraintsError,
    SingularBlockMatrixError,
)

logger = logging.getLogger(__name__)

_UNUSABLE = (RankDeficientConstraintsError, SingularBlockMatrixError, DegenerateExtensionError)


class Predicate(Enum):
    FA = "FA"
    IV = "IV"
    PIV = "PIV"


@dataclass(frozen=True)
class ModeSelectionResult:
    """Outcome of one mode-selection solve.

    ``per_constraint_margins`` maps each scope index to the value that decided it: the cone
    value of the impulse for IV/PIV, or the trend description for FA.
    """

    selected: ContactMode
    satisfied_predicate: Predicate
    solutions_found: int
    per_constraint_margins: dict[int, float | str]
    scope: tuple[int, ...] = ()
    solutions: tuple[ContactMode, ...] = field(default_factory=tuple)
    contact_level: bool = False

    def margins_by_label(self, system: MechSystem) -> dict[str, float | str]:
        return {system.label(k): v for k, v in sorted(self.per_constraint_margins.items())}


# Scopes


def scope_touching(system: MechSystem, state, tolerances: Tolerances | None = None) -> set[int]:
    """Constraints whose normal is closed and not separating."""
    tol = tolerances or Tolerances()
    scales = system.scales
    touching = {
        k
        for k, (distance, speed) in normal_kinematics(system, state).items()
        if abs(distance) <= tol.tol_domain * scales.position
        and speed <= tol.tol_vel * scales.velocity
    }
    return {i for i in range(system.n_constraints) if system.parent(i) in touching}


def scope_iv(
    system: MechSystem, mode: ContactMode, state, tolerances: Tolerances | None = None
) -> set[int]:
    """Active constraints plus every constraint of a contact that is touching down."""
    down = touchdown_set(system, state, tolerances)
    return set(mode.indices) | {
        i for i in range(system.n_constraints) if i not in mode and system.parent(i) in down
    }


# Trend oracles, cached per (system, flow mode, ...) so compiled derivatives are reused.


@functools.lru_cache(maxsize=4096)
def _force_oracle(system: MechSystem, flow_mode: ContactMode, force_mode: ContactMode, k: int):
    return JaxLieOracle(
        mode_kernels(system, force_mode).cone(k), mode_kernels(system, flow_mode).flow, jit=True
    )


@functools.lru_cache(maxsize=1024)
def _distance_oracle(system: MechSystem, flow_mode: ContactMode, k: int, max_order: int):
    if system.gap_oracles is not None:
        oracle = system.gap_oracles(k, flow_mode, max_order)
        if oracle is not None:
            return oracle
    distance = system.constraints[k].distance
    dim = system.dim
    return JaxLieOracle(lambda x: distance(x[:dim]), mode_kernels(system, flow_mode).flow, jit=True)


def distance_trend(
    system: MechSystem, flow_mode: ContactMode, k: int, state, tolerances: Tolerances | None = None
) -> TrendSign:
    """Trend of the gap a_k along the flow of ``flow_mode``.

    A gap inside the domain tolerance counts as closed, so the decision starts at order 1.
    """
    tol = tolerances or Tolerances()
    x = as_state(system, state)
    distance, _ = normal_kinematics(system, x)[k]
    closed = abs(distance) <= tol.tol_domain * system.scales.position
    return trend_sign_from_oracle(
        _distance_oracle(system, flow_mode, k, tol.max_order),
        x,
        tol.max_order,
        tol.tol_trend,
        value_scale=system.scales.position,
        time_scale=system.scales.time,
        first_order=1 if closed else 0,
    )


def force_trend(
    system: MechSystem,
    flow_mode: ContactMode,
    force_mode: ContactMode,
    k: int,
    state,
    tolerances: Tolerances | None = None,
) -> TrendSign:
    """Trend of U_k(λ_force_mode) along the flow of ``flow_mode``.

    Order 0 is evaluated first with the compiled multipliers; derivatives are only traced
    when it falls inside the tolerance band.
    """
    tol = tolerances or Tolerances()
    x = as_state(system, state)
    kernels = mode_kernels(system, force_mode)
    lam = kernels.multipliers(jnp.asarray(x))
    value = float(cone_expression(system, k, lam, kernels.position)) / system.scales.force
    if abs(value) > tol.tol_trend:
        return TrendSign(Sign.POSITIVE if value > 0 else Sign.NEGATIVE, 0, (value,))
    return trend_sign_from_oracle(
        _force_oracle(system, flow_mode, force_mode, k),
        x,
        tol.max_order,
        tol.tol_trend,
        value_scale=system.scales.force,
        time_scale=system.scales.time,
    )


# Enumeration engine

Verdict = tuple[bool, float | str] | None
"""``(maintainable, margin)`` for constraint k under mode K, or None if K is unusable."""


@dataclass
class _Candidate:
    mode: ContactMode
    margins: dict[int, float | str]


def _units(system: MechSystem, scope: Sequence[int], contact_level: bool) -> list[tuple[int, ...]]:
    if not contact_level:
        return [(k,) for k in sorted(scope)]
    groups: dict[int, list[int]] = {}
    for k in sorted(scope):
        groups.setdefault(system.parent(k), []).append(k)
    return [tuple(sorted(g)) for _, g in sorted(groups.items())]


def _candidates(system: MechSystem, units: list[tuple[int, ...]]) -> list[ContactMode]:
    modes = []
    for size in range(len(units), -1, -1):
        for combo in itertools.combinations(units, size):
            mode = system.mode(i for unit in combo for i in unit)
            if system.is_valid_mode(mode):
                modes.append(mode)
    modes.sort(key=lambda m: (-len(m), m.indices))
    return modes


def _equivalence_classes(system: MechSystem, solutions: list[ContactMode], q) -> int:
    """Solutions with the same normals and the same constraint row space count once."""
    rows = np.asarray(system.constraint_rows(tuple(range(system.n_constraints)), jnp.asarray(q)))
    representatives: list[ContactMode] = []
    for mode in solutions:
        for rep in representatives:
            if rep.normals != mode.normals:
                continue
            union = sorted(set(rep.indices) | set(mode.indices))
            r_rep = constraint_rank(rows[list(rep.indices)])
            r_mode = constraint_rank(rows[list(mode.indices)])
            if r_rep == r_mode == constraint_rank(rows[union]):
                break
        else:
            representatives.append(mode)
    return len(representatives)


def _enumerate(
    system: MechSystem,
    scope: Sequence[int],
    predicate: Predicate,
    usable: Callable[[ContactMode], bool],
    verdict: Callable[[ContactMode, ContactMode, int], Verdict],
    q: np.ndarray,
    *,
    contact_level: bool = False,
    required: ContactMode | None = None,
    strict_uniqueness: bool = False,
) -> ModeSelectionResult:
    units = _units(system, scope, contact_level)
    solutions: list[_Candidate] = []
    table: dict[str, object] = {}

    for candidate in _candidates(system, units):
        name = system.mode_id(candidate)
        if required is not None and not required.issubset(candidate):
            continue
        if not usable(candidate):
            table[name] = "block matrix singular or rows dependent"
            continue
        margins: dict[int, float | str] = {}
        failure = None
        for unit in units:
            inside = unit[0] in candidate
            augmented = candidate if inside else candidate.union(system.mode(unit))
            if not inside and not system.is_valid_mode(augmented):
                continue
            outcomes = [verdict(candidate, augmented, k) for k in unit]
            if any(o is None for o in outcomes):
                if inside:
                    failure = f"{system.labels(unit)} unusable"
                    break
                continue
            for k, (_, margin) in zip(unit, outcomes, strict=True):
                margins[k] = margin
            maintainable = all(ok for ok, _ in outcomes)
            if maintainable != inside:
                failure = (
                    f"{'+'.join(system.labels(unit))} "
                    f"{'cannot be maintained' if inside else 'would be maintained'}"
                )
                break
        logger.debug(
            "candidate predicate=%s mode=%s result=%s", predicate.value, name, failure or "ok"
        )
        if failure is None:
            solutions.append(_Candidate(candidate, margins))
        else:
            table[name] = failure

    if not solutions:
        raise NoSolutionError(predicate.value, system.labels(sorted(scope)), table)

    modes = [s.mode for s in solutions]
    count = _equivalence_classes(system, modes, q)
    if count > 1:
        names = [system.mode_id(m) for m in modes]
        if strict_uniqueness:
            raise MultipleSolutionsError(predicate.value, names)
        logger.warning(
            "multiple_solutions predicate=%s count=%d solutions=%s", predicate.value, count, names
        )
    chosen = solutions[0]
    return ModeSelectionResult(
        selected=chosen.mode,
        satisfied_predicate=predicate,
        solutions_found=count,
        per_constraint_margins=chosen.margins,
        scope=tuple(sorted(scope)),
        solutions=tuple(modes),
        contact_level=contact_level,
    )


def _enumerate_with_fallback(
    system: MechSystem, scope: Sequence[int], predicate: Predicate, *args, **kwargs
) -> ModeSelectionResult:
    try:
        return _enumerate(system, scope, predicate, *args, **kwargs)
    except NoSolutionError:
        if not any(not system.is_normal(k) for k in scope):
            raise
        logger.warning(
            "contact_level_fallback predicate=%s scope=%s",
            predicate.value,
            "+".join(system.labels(sorted(scope))),
        )
        return _enumerate(system, scope, predicate, *args, contact_level=True, **kwargs)


# FA


class _ForceEvaluator:
    def __init__(self, system: MechSystem, x: np.ndarray, tolerances: Tolerances):
        self.system = system
        self.x = x
        self.tolerances = tolerances
        self._usable: dict[ContactMode, bool] = {}

    def usable(self, mode: ContactMode) -> bool:
        if mode not in self._usable:
            terms = impact_terms(self.system, mode, self.x)
            try:
                build_block_inverse(terms.inertia, terms.rows, mode=mode)
                self._usable[mode] = True
            except _UNUSABLE:
                self._usable[mode] = False
        return self._usable[mode]

    def verdict(self, flow_mode: ContactMode, force_mode: ContactMode, k: int) -> Verdict:
        if not self.usable(force_mode):
            return None
        trend = force_trend(self.system, flow_mode, force_mode, k, self.x, self.tolerances)
        return trend.persists, trend.describe()


def fa_scope(
    system: MechSystem,
    mode: ContactMode | None,
    state,
    tolerances: Tolerances | None = None,
    *,
    strict_scope: bool = False,
) -> set[int]:
    """Constraints considered by :func:`solve_fa`.

    With a current mode and without ``strict_scope``: the active constraints, plus touching
    inactive normals whose gap trends ⪯ 0 along the current flow, plus the tangentials of
    those normals. Tangentials that are sliding are never added.
    """
    tol = tolerances or Tolerances()
    x = as_state(system, state)
    touching = scope_touching(system, x, tol)
    if mode is None or strict_scope:
        candidates = touching
    else:
        candidates = set(mode.indices)
        for k in sorted(touching):
            if system.is_normal(k) and k not in mode:
                if not distance_trend(system, mode, k, x, tol).positive:
                    candidates.update(i for i in touching if system.parent(i) == k)
    q, qd = system.split(x)
    rows = np.asarray(system.constraint_rows(tuple(range(system.n_constraints)), jnp.asarray(q)))
    sliding = {
        i
        for i in system.tangential_indices
        if abs(float(rows[i] @ qd)) > tol.tol_vel * system.scales.velocity
    }
    active = set(mode.indices) if mode is not None else set()
    return {i for i in candidates if i in active or i not in sliding}


def solve_fa(
    system: MechSystem,
    state,
    mode: ContactMode | None = None,
    tolerances: Tolerances | None = None,
    *,
    strict_scope: bool = False,
    strict_uniqueness: bool = False,
) -> ModeSelectionResult:
    """Select the mode whose contact forces are consistent with the accelerations.

    Raises:
        NoSolutionError: If no candidate satisfies the biconditional.
        MultipleSolutionsError: Under ``strict_uniqueness`` when several inequivalent
            candidates satisfy it.
    """
    tol = tolerances or Tolerances()
    x = as_state(system, state)
    scope = fa_scope(system, mode, x, tol, strict_scope=strict_scope)
    evaluator = _ForceEvaluator(system, x, tol)
    return _enumerate_with_fallback(
        system,
        sorted(scope),
        Predicate.FA,
        evaluator.usable,
        evaluator.verdict,
        system.split(x)[0],
        strict_uniqueness=strict_uniqueness,
    )


# IV and PIV


@dataclass
class _Impulses:
    bi: BlockInverse
    terms: ImpactTerms
    contact: np.ndarray
    pseudo: np.ndarray

    @property
    def position(self) -> dict[int, int]:
        return {index: p for p, index in enumerate(self.bi.rows)}


class _ImpulseEvaluator:
    """Contact and pseudo impulses per candidate mode at one pre-impact state.

    A mode that adds one constraint to an already evaluated mode with the same active
    coordinates reuses its block inverse through the rank-one extension.
    """

    def __init__(self, system: MechSystem, x: np.ndarray, delta_t: float, tolerances: Tolerances):
        self.system = system
        self.x = x
        self.delta_t = delta_t
        self.tolerances = tolerances
        self.tol = tolerances.tol_lin * system.scales.impulse
        self._cache: dict[ContactMode, _Impulses | None] = {}
        q = jnp.asarray(system.split(x)[0])
        self._rows = np.asarray(system.constraint_rows(tuple(range(system.n_constraints)), q))

    def _build(self, mode: ContactMode) -> _Impulses | None:
        terms = impact_terms(self.system, mode, self.x)
        try:
            bi = build_block_inverse(terms.inertia, terms.rows, mode=mode, rows=mode.indices)
        except _UNUSABLE:
            return None
        contact = bi.adag @ (terms.inertia @ terms.velocity)
        return _Impulses(bi, terms, contact, bi.adag @ terms.forces * self.delta_t)

    def _extend(self, base: _Impulses, mode: ContactMode, k: int) -> _Impulses | None:
        terms = base.terms
        try:
            bi = extend_block_inverse(
                base.bi,
                self._rows[k][terms.coords],
                index=k,
                mode=mode,
                tol=self.tolerances.tol_lin,
            )
        except DegenerateExtensionError:
            return None
        if constraint_rank(self._rows[list(bi.rows)][:, terms.coords]) < len(bi.rows):
            return None
        if self.delta_t:
            forces = impact_terms(self.system, mode, self.x).forces
        else:
            forces = terms.forces
        terms = ImpactTerms(mode, terms.coords, terms.inertia, terms.rows, forces, terms.velocity)
        contact = bi.adag @ (terms.inertia @ terms.velocity)
        return _Impulses(bi, terms, contact, bi.adag @ forces * self.delta_t)

    def impulses(self, mode: ContactMode, base: ContactMode | None = None) -> _Impulses | None:
        if mode in self._cache:
            return self._cache[mode]
        result = None
        extra = [i for i in mode.indices if base is not None and i not in base]
        if base is not None and len(extra) == 1 and self.usable(base):
            prior = self._cache[base]
            if tuple(self.system.active_coords(mode)) == tuple(prior.terms.coords):
                result = self._extend(prior, mode, extra[0])
        if result is None:
            result = self._build(mode)
        self._cache[mode] = result
        return result

    def usable(self, mode: ContactMode) -> bool:
        return self.impulses(mode) is not None

    def cone(self, k: int, mode: ContactMode, base: ContactMode) -> tuple[float, float] | None:
        imp = self.impulses(mode, base)
        if imp is None:
            return None
        position = imp.position
        plain = float(cone_expression(self.system, k, imp.contact, position))
        pseudo = float(cone_expression(self.system, k, imp.contact + imp.pseudo, position))
        return plain, pseudo

    def iv_verdict(self, base: ContactMode, mode: ContactMode, k: int) -> Verdict:
        values = self.cone(k, mode, base)
        if values is None:
            return None
        return values[0] >= -self.tol, values[0]

    def piv_verdict(self, base: ContactMode, mode: ContactMode, k: int) -> Verdict:
        values = self.cone(k, mode, base)
        if values is None:
            return None
        plain, pseudo = values
        return (plain >= -self.tol or pseudo >= -self.tol), max(plain, pseudo)


def solve_iv(
    system: MechSystem,
    mode: ContactMode,
    state,
    tolerances: Tolerances | None = None,
    *,
    strict_uniqueness: bool = False,
) -> ModeSelectionResult:
    """Select the post-impact mode from the contact impulses.

    Raises:
        NoSolutionError: If no candidate satisfies the biconditional.
        MultipleSolutionsError: Under ``strict_uniqueness`` with inequivalent solutions.
    """
    tol = tolerances or Tolerances()
    x = as_state(system, state)
    evaluator = _ImpulseEvaluator(system, x, 0.0, tol)
    return _enumerate_with_fallback(
        system,
        sorted(scope_iv(system, mode, x, tol)),
        Predicate.IV,
        evaluator.usable,
        evaluator.iv_verdict,
        system.split(x)[0],
        strict_uniqueness=strict_uniqueness,
    )


def solve_piv(
    system: MechSystem,
    mode: ContactMode,
    state,
    delta_t: float,
    tolerances: Tolerances | None = None,
    *,
    strict_uniqueness: bool = False,
) -> ModeSelectionResult:
    """IV selection where the pseudo-impulse over ``delta_t`` may keep a contact closed.

    The result always contains the IV selection when that one exists. With ``delta_t == 0``
    it is the IV selection.
    """
    if delta_t < 0:
        raise ValueError(f"delta_t must be non-negative, got {delta_t}")
    tol = tolerances or Tolerances()
    x = as_state(system, state)
    iv = solve_iv(system, mode, x, tol, strict_uniqueness=strict_uniqueness)
    if delta_t == 0:
        return ModeSelectionResult(
            selected=iv.selected,
            satisfied_predicate=Predicate.PIV,
            solutions_found=iv.solutions_found,
            per_constraint_margins=iv.per_constraint_margins,
            scope=iv.scope,
            solutions=iv.solutions,
            contact_level=iv.contact_level,
        )
    evaluator = _ImpulseEvaluator(system, x, delta_t, tol)
    scope = sorted(scope_iv(system, mode, x, tol))
    q = system.split(x)[0]
    try:
        return _enumerate_with_fallback(
            system,
            scope,
            Predicate.PIV,
            evaluator.usable,
            evaluator.piv_verdict,
            q,
            required=iv.selected,
            strict_uniqueness=strict_uniqueness,
        )
    except NoSolutionError:
        logger.warning("piv_without_containment scope=%s", "+".join(system.labels(scope)))
        return _enumerate_with_fallback(
            system,
            scope,
            Predicate.PIV,
            evaluator.usable,
            evaluator.piv_verdict,
            q,
            strict_uniqueness=strict_uniqueness,
        )
