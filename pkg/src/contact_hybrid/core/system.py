"""Mechanical system description and contact modes.

A :class:`MechSystem` is immutable after construction. Its callables are written with
``jax.numpy`` so that the engine can differentiate them to any order; they take the
configuration ``q`` (and velocity ``qd`` where noted) as 1-D arrays.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import jax
import jax.numpy as jnp
import numpy as np

from contact_hybrid.core.linalg import constraint_rank
from contact_hybrid.errors import ScenarioValidationError

logger = logging.getLogger(__name__)

Array = Any


@dataclass(frozen=True)
class ContactMode:
    """A set of active constraint indices, split into normals and tangentials."""

    normals: tuple[int, ...] = ()
    tangentials: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "normals", tuple(sorted(set(self.normals))))
        object.__setattr__(self, "tangentials", tuple(sorted(set(self.tangentials))))

    @property
    def indices(self) -> tuple[int, ...]:
        """All active indices in the global constraint order."""
        return tuple(sorted(self.normals + self.tangentials))

    def __contains__(self, index: object) -> bool:
        return index in self.normals or index in self.tangentials

    def __len__(self) -> int:
        return len(self.normals) + len(self.tangentials)

    def __iter__(self):
        return iter(self.indices)

    def __bool__(self) -> bool:
        return len(self) > 0

    def union(self, other: ContactMode) -> ContactMode:
        return ContactMode(self.normals + other.normals, self.tangentials + other.tangentials)

    def difference(self, other: ContactMode) -> ContactMode:
        return ContactMode(
            tuple(i for i in self.normals if i not in other.normals),
            tuple(i for i in self.tangentials if i not in other.tangentials),
        )

    def issubset(self, other: ContactMode) -> bool:
        return all(i in other for i in self.indices)

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.indices) + "}"


EMPTY_MODE = ContactMode()


@dataclass(frozen=True, eq=False)
class NormalConstraint:
    """Non-penetration constraint a(q) ≥ 0.

    ``cone_sign`` maps the multiplier of this row to the unilateral cone value: with the
    engine's force convention a compressive contact has a negative multiplier, so the
    default ``-1`` makes a maintainable contact positive.
    """

    name: str
    contact: int
    distance: Callable[[Array], Array]
    gradient: Callable[[Array], Array] | None = None
    cone_sign: float = -1.0

    is_normal = True

    @property
    def label(self) -> str:
        return f"n{self.contact}"

    def row(self, q: Array) -> Array:
        if self.gradient is not None:
            return self.gradient(q)
        return jax.grad(self.distance)(q)


@dataclass(frozen=True, eq=False)
class TangentialConstraint:
    """Non-sliding constraint A(q) q̇ = 0 attached to a parent normal constraint."""

    name: str
    contact: int
    row_fn: Callable[[Array], Array]
    parent: int
    mu: float

    is_normal = False

    @property
    def label(self) -> str:
        return f"t{self.contact}"

    def row(self, q: Array) -> Array:
        return self.row_fn(q)


Constraint = NormalConstraint | TangentialConstraint


@dataclass(frozen=True, eq=False)
class MasslessLimb:
    """Zero-inertia coordinates pinned by ``contacts`` and driven by ``flow`` when free.

    ``flow(q, qd)`` returns the accelerations of ``coords`` while none of the limb's
    contacts is active.
    """

    name: str
    coords: tuple[int, ...]
    contacts: tuple[int, ...]
    flow: Callable[[Array, Array], Array]


@dataclass(frozen=True)
class Scales:
    """Characteristic magnitudes used to normalize tolerances."""

    position: float = 1.0
    time: float = 1.0
    force: float = 1.0

    @property
    def velocity(self) -> float:
        return self.position / self.time

    @property
    def impulse(self) -> float:
        return self.force * self.time

    @property
    def energy(self) -> float:
        return self.force * self.position


@dataclass(frozen=True)
class Tolerances:
    """Dimensionless tolerances; multiply by the system scales before use."""

    tol_lin: float = 1e-10
    tol_trend: float = 1e-9
    tol_domain: float = 1e-7
    tol_vel: float = 1e-8
    tol_energy: float = 1e-9
    event_time: float = 1e-10
    max_order: int = 4
    rtol: float = 1e-10
    atol: float = 1e-12

    def updated(self, **overrides: float) -> Tolerances:
        known = {f for f in self.__dataclass_fields__}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ScenarioValidationError([f"unknown tolerance: {name}" for name in unknown])
        if "max_order" in overrides:
            overrides["max_order"] = int(overrides["max_order"])
        return replace(self, **overrides)


@dataclass(frozen=True, eq=False)
class MechSystem:
    """Full description of a Lagrangian system with unilateral contact constraints.

    Attributes:
        name: Scenario identifier.
        dim: Number of configuration coordinates.
        inertia: M̄(q), q×q positive semi-definite.
        constraints: Normal and tangential constraints in the fixed global order.
        potential: N̄(q), generalized conservative force (gravity) as a covector.
        applied: Υ(q, q̇, mode), generalized applied force including any control law.
        coriolis: C̄(q, q̇) q̇; computed from Christoffel symbols of M̄ when None.
        limbs: Massless limbs with their decoupled free-flight dynamics.
        scales: Characteristic magnitudes for tolerance normalization.
        potential_energy: V(q) for energy accounting, if the system has one.
        gap_oracles: Optional closed-form derivatives of the gaps: called as
            ``gap_oracles(k, flow_mode, max_order)``, it returns a derivative oracle for gap k
            along that mode's flow, or None to fall back to automatic differentiation.
    """

    name: str
    dim: int
    inertia: Callable[[Array], Array]
    constraints: tuple[Constraint, ...]
    potential: Callable[[Array], Array]
    applied: Callable[[Array, Array, ContactMode], Array] | None = None
    coriolis: Callable[[Array, Array], Array] | None = None
    limbs: tuple[MasslessLimb, ...] = ()
    scales: Scales = field(default_factory=Scales)
    coordinate_names: tuple[str, ...] = ()
    potential_energy: Callable[[Array], Array] | None = None
    contact_names: tuple[str, ...] = ()
    gap_oracles: Callable[[int, ContactMode, int], Any] | None = None

    def __post_init__(self):
        for i, c in enumerate(self.constraints):
            if isinstance(c, TangentialConstraint):
                parent_ok = 0 <= c.parent < len(self.constraints) and isinstance(
                    self.constraints[c.parent], NormalConstraint
                )
                if not parent_ok:
                    raise ScenarioValidationError(
                        [f"constraint {i} ({c.name}): parent {c.parent} is not a normal index"]
                    )

    # Index bookkeeping

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def normal_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.constraints) if c.is_normal)

    @property
    def tangential_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.constraints) if not c.is_normal)

    @property
    def has_massless_limbs(self) -> bool:
        return bool(self.limbs)

    def is_normal(self, index: int) -> bool:
        return self.constraints[index].is_normal

    def parent(self, index: int) -> int:
        """α(i): the normal constraint a tangential constraint belongs to (identity for normals)."""
        c = self.constraints[index]
        return index if c.is_normal else c.parent

    def contact_group(self, index: int) -> tuple[int, ...]:
        """The normal constraint of ``index`` together with all of its tangentials."""
        normal = self.parent(index)
        return (normal,) + tuple(
            i for i in self.tangential_indices if self.constraints[i].parent == normal
        )

    def label(self, index: int) -> str:
        return self.constraints[index].label

    def labels(self, mode: ContactMode | Iterable[int]) -> list[str]:
        return [self.label(i) for i in mode]

    def mode_id(self, mode: ContactMode) -> str:
        """Canonical mode rendering, e.g. ``n1+t1+n2``; ``none`` for the empty mode."""
        return "+".join(self.labels(mode)) or "none"

    def mode(self, indices: Iterable[int]) -> ContactMode:
        indices = list(indices)
        return ContactMode(
            tuple(i for i in indices if self.is_normal(i)),
            tuple(i for i in indices if not self.is_normal(i)),
        )

    def mode_from_labels(self, labels: Iterable[str]) -> ContactMode:
        lookup = {c.label: i for i, c in enumerate(self.constraints)}
        labels = list(labels)
        unknown = [name for name in labels if name not in lookup]
        if unknown:
            raise ScenarioValidationError(
                [f"unknown constraint label {name!r}; known: {sorted(lookup)}" for name in unknown]
            )
        return self.mode(lookup[name] for name in labels)

    def is_valid_mode(self, mode: ContactMode) -> bool:
        """Every tangential constraint in the mode has its parent normal in the mode."""
        return all(self.constraints[i].parent in mode.normals for i in mode.tangentials)

    def is_edge(self, source: ContactMode, target: ContactMode) -> bool:
        return source != target and self.is_valid_mode(source.union(target))

    def valid_subsets(self, scope: Sequence[int]) -> list[ContactMode]:
        """Valid modes within ``scope``, by decreasing size then lexicographic index order."""
        scope = sorted(scope)
        subsets = []
        for size in range(len(scope), -1, -1):
            for combo in itertools.combinations(scope, size):
                mode = self.mode(combo)
                if self.is_valid_mode(mode):
                    subsets.append(mode)
        return subsets

    # Massless limbs

    def free_limbs(self, mode: ContactMode) -> tuple[MasslessLimb, ...]:
        return tuple(limb for limb in self.limbs if not any(c in mode for c in limb.contacts))

    def free_coords(self, mode: ContactMode) -> tuple[int, ...]:
        return tuple(sorted(c for limb in self.free_limbs(mode) for c in limb.coords))

    def active_coords(self, mode: ContactMode) -> tuple[int, ...]:
        free = set(self.free_coords(mode))
        return tuple(i for i in range(self.dim) if i not in free)

    # Kinematics (traceable)

    def constraint_rows(self, indices: Sequence[int], q: Array) -> Array:
        if not indices:
            return jnp.zeros((0, self.dim))
        return jnp.stack([self.constraints[i].row(q) for i in indices])

    def distances(self, indices: Sequence[int], q: Array) -> Array:
        return jnp.stack([self.constraints[i].distance(q) for i in indices])

    def rows_dot_qd(self, indices: Sequence[int], q: Array, qd: Array) -> Array:
        """Ȧ q̇: the derivative of A(q) along q̇ applied to q̇."""
        if not indices:
            return jnp.zeros((0,))
        _, tangent = jax.jvp(lambda qq: self.constraint_rows(indices, qq) @ qd, (q,), (qd,))
        return tangent

    def coriolis_vector(self, q: Array, qd: Array) -> Array:
        if self.coriolis is not None:
            return self.coriolis(q, qd)
        return christoffel_vector(self.inertia, q, qd)

    def generalized_forces(self, q: Array, qd: Array, mode: ContactMode) -> Array:
        """Υ − C̄q̇ − N̄."""
        forces = -self.potential(q) - self.coriolis_vector(q, qd)
        if self.applied is not None:
            forces = forces + self.applied(q, qd, mode)
        return forces

    # State helpers

    def split(self, x: Array) -> tuple[Array, Array]:
        return x[: self.dim], x[self.dim :]

    def kinetic_energy(self, x: np.ndarray) -> float:
        q, qd = self.split(np.asarray(x, dtype=float))
        m = np.asarray(self.inertia(jnp.asarray(q)))
        return 0.5 * float(qd @ m @ qd)

    def total_energy(self, x: np.ndarray) -> float | None:
        if self.potential_energy is None:
            return None
        q, _ = self.split(np.asarray(x, dtype=float))
        return self.kinetic_energy(x) + float(self.potential_energy(jnp.asarray(q)))


def christoffel_vector(inertia: Callable[[Array], Array], q: Array, qd: Array) -> Array:
    """C̄(q, q̇) q̇ from Christoffel symbols of the first kind of M̄."""
    dm = jax.jacfwd(inertia)(q)  # dm[i, j, k] = ∂M_ij / ∂q_k
    return jnp.einsum("ijk,j,k->i", dm, qd, qd) - 0.5 * jnp.einsum("jki,j,k->i", dm, qd, qd)


def as_state(system: MechSystem, state: Any) -> np.ndarray:
    """Accept ``(q, qd)`` or a flat ``[q, qd]`` vector and return the flat float array."""
    if isinstance(state, tuple | list) and len(state) == 2:
        q, qd = state
        x = np.concatenate([np.asarray(q, dtype=float), np.asarray(qd, dtype=float)])
    else:
        x = np.asarray(state, dtype=float).reshape(-1)
    if x.shape != (2 * system.dim,):
        raise ValueError(f"state must have {2 * system.dim} entries, got {x.shape}")
    return x


def independent_subset(system: MechSystem, mode: ContactMode, q: np.ndarray) -> ContactMode:
    """Greedily keep rows of ``mode`` in global order while they raise the row rank.

    Tangential rows whose parent was dropped are dropped too.
    """
    q = jnp.asarray(q)
    coords = list(system.active_coords(mode))
    kept: list[int] = []
    for index in mode.indices:
        if not system.is_normal(index) and system.parent(index) not in kept:
            continue
        candidate = kept + [index]
        rows = np.asarray(system.constraint_rows(candidate, q))[:, coords]
        if constraint_rank(rows) == len(candidate):
            kept = candidate
    reduced = system.mode(kept)
    if reduced != mode:
        logger.debug(
            "independent_subset from=%s to=%s", system.mode_id(mode), system.mode_id(reduced)
        )
    return reduced


def validate_system(
    system: MechSystem,
    x: np.ndarray,
    rng: np.random.Generator,
    samples: int = 5,
    spread: float = 0.05,
) -> list[str]:
    """Check MechSystem invariants at states sampled around ``x``.

    Returns human-readable failures: normal rows that disagree with a central finite
    difference of the distance (1e-6 relative), and inertia matrices that are not symmetric
    positive semi-definite.
    """
    failures: list[str] = []
    q0, _ = system.split(np.asarray(x, dtype=float))
    scale = system.scales.position
    for sample in range(samples):
        q = q0 + spread * scale * rng.standard_normal(system.dim)
        qj = jnp.asarray(q)
        m = np.asarray(system.inertia(qj))
        if not np.allclose(m, m.T, rtol=1e-9, atol=1e-12 * max(np.abs(m).max(), 1.0)):
            failures.append(f"sample {sample}: inertia is not symmetric")
        eigenvalues = np.linalg.eigvalsh(0.5 * (m + m.T))
        if eigenvalues.min() < -1e-9 * max(eigenvalues.max(), 1.0):
            failures.append(f"sample {sample}: inertia has eigenvalue {eigenvalues.min():.3e}")
        for i in system.normal_indices:
            c = system.constraints[i]
            row = np.asarray(c.row(qj))
            step = 1e-6 * scale
            fd = np.array(
                [
                    (
                        float(c.distance(jnp.asarray(q + step * e)))
                        - float(c.distance(jnp.asarray(q - step * e)))
                    )
                    / (2 * step)
                    for e in np.eye(system.dim)
                ]
            )
            denom = max(np.linalg.norm(row), np.linalg.norm(fd), 1e-12)
            if np.linalg.norm(row - fd) / denom > 1e-6:
                failures.append(
                    f"sample {sample}: row of {c.label} differs from finite difference "
                    f"by {np.linalg.norm(row - fd) / denom:.3e}"
                )
    return failures
