"""Plastic impact resets, contact impulses and the pseudo-impulse."""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from contact_hybrid.core.dynamics import mode_kernels
from contact_hybrid.core.linalg import BlockInverse, build_block_inverse
from contact_hybrid.core.system import ContactMode, MechSystem, Tolerances, as_state
from contact_hybrid.errors import InternalInconsistencyError

logger = logging.getLogger(__name__)

# Relative agreement required between the two contact impulse expressions.
IMPULSE_AGREEMENT = 1e-8


@dataclass(frozen=True)
class ImpulseRecord:
    """Everything an impact into ``mode`` does to the state.

    ``contact_impulse`` and ``pseudo_impulse`` are ordered like ``mode.indices``;
    ``body_impulse`` and the velocities live in configuration coordinates.
    """

    mode: ContactMode
    pre_velocity: np.ndarray
    post_velocity: np.ndarray
    body_impulse: np.ndarray
    contact_impulse: np.ndarray
    pseudo_impulse: np.ndarray
    delta_t: float
    energy_before: float
    energy_after: float

    @property
    def energy_change(self) -> float:
        """Kinetic energy lost in the impact (non-negative for a plastic impact)."""
        return self.energy_before - self.energy_after

    def to_dict(self, system: MechSystem) -> dict:
        labels = system.labels(self.mode)
        return {
            "mode": system.mode_id(self.mode),
            "contact_impulse": dict(zip(labels, map(float, self.contact_impulse), strict=True)),
            "pseudo_impulse": dict(zip(labels, map(float, self.pseudo_impulse), strict=True)),
            "body_impulse": [float(v) for v in self.body_impulse],
            "pre_velocity": [float(v) for v in self.pre_velocity],
            "post_velocity": [float(v) for v in self.post_velocity],
            "energy_change": self.energy_change,
        }


@functools.lru_cache(maxsize=64)
def _normal_kinematics(system: MechSystem):
    normals = system.normal_indices

    def kinematics(x):
        q, qd = x[: system.dim], x[system.dim :]
        if not normals:
            return jnp.zeros((0,)), jnp.zeros((0,))
        return system.distances(normals, q), system.constraint_rows(normals, q) @ qd

    return jax.jit(kinematics)


def normal_kinematics(system: MechSystem, state) -> dict[int, tuple[float, float]]:
    """Map each normal index to ``(a_k(q), A_k q̇)``."""
    x = as_state(system, state)
    distances, speeds = (np.asarray(v) for v in _normal_kinematics(system)(jnp.asarray(x)))
    return {
        index: (float(distances[p]), float(speeds[p]))
        for p, index in enumerate(system.normal_indices)
    }


def _is_touchdown(system: MechSystem, distance: float, speed: float, tol: Tolerances) -> bool:
    scales = system.scales
    return abs(distance) <= tol.tol_domain * scales.position and speed < -tol.tol_vel * scales.velocity


def touchdown(system: MechSystem, k: int, state, tolerances: Tolerances | None = None) -> bool:
    """Normal constraint ``k`` is closed and its separation velocity is strictly negative."""
    if not system.is_normal(k):
        raise ValueError(f"constraint {k} ({system.label(k)}) is not a normal constraint")
    distance, speed = normal_kinematics(system, state)[k]
    return _is_touchdown(system, distance, speed, tolerances or Tolerances())


def touchdown_set(system: MechSystem, state, tolerances: Tolerances | None = None) -> set[int]:
    tol = tolerances or Tolerances()
    return {
        k
        for k, (distance, speed) in normal_kinematics(system, state).items()
        if _is_touchdown(system, distance, speed, tol)
    }


def new_touchdown(system: MechSystem, state, tolerances: Tolerances | None = None) -> bool:
    return bool(touchdown_set(system, state, tolerances))


@dataclass(frozen=True)
class ImpactTerms:
    """Reduced matrices of one mode at one state, as used by the impact law."""

    mode: ContactMode
    coords: np.ndarray
    inertia: np.ndarray
    rows: np.ndarray
    forces: np.ndarray
    velocity: np.ndarray


def impact_terms(system: MechSystem, mode: ContactMode, state) -> ImpactTerms:
    x = as_state(system, state)
    kernels = mode_kernels(system, mode)
    m, a, forces, _ = (np.asarray(v) for v in kernels.terms(jnp.asarray(x)))
    _, qd = system.split(x)
    return ImpactTerms(mode, kernels.coords, m, a, forces, qd[kernels.coords])


def contact_impulses(
    bi: BlockInverse,
    terms: ImpactTerms,
    delta_t: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """P̂ = A† M̄ q̇⁻ and P̃ = A† (Υ − C̄q̇ − N̄) δ_t, in the row order of ``bi``."""
    contact = bi.adag @ (terms.inertia @ terms.velocity)
    pseudo = bi.adag @ terms.forces * delta_t
    return contact, pseudo


def post_impact(
    system: MechSystem,
    target: ContactMode,
    state,
    delta_t: float = 0.0,
    tolerances: Tolerances | None = None,
) -> ImpulseRecord:
    """Plastic impact into ``target``.

    Raises:
        SingularBlockMatrixError: If ``target`` has no block inverse at q.
        InternalInconsistencyError: If −Λ A q̇⁻ and A† M̄ q̇⁻ disagree beyond ``IMPULSE_AGREEMENT``.
    """
    tol = tolerances or Tolerances()
    x = as_state(system, state)
    terms = impact_terms(system, target, x)
    bi = build_block_inverse(terms.inertia, terms.rows, mode=target, rows=target.indices)

    velocity = terms.velocity
    post_active = velocity - bi.adag_t @ (terms.rows @ velocity)
    contact = -bi.lambda_mat @ (terms.rows @ velocity)
    contact_alt, pseudo = contact_impulses(bi, terms, delta_t)
    reference = max(
        float(np.linalg.norm(contact_alt)),
        float(np.linalg.norm(terms.inertia, 2) * np.linalg.norm(velocity)),
        system.scales.impulse * tol.tol_lin,
    )
    if contact.size and np.linalg.norm(contact - contact_alt) > IMPULSE_AGREEMENT * reference:
        raise InternalInconsistencyError(
            f"contact impulse mismatch in mode {system.mode_id(target)}: "
            f"-ΛAq̇={contact.tolist()} vs A†Mq̇={contact_alt.tolist()}"
        )

    q, pre = system.split(x)
    post = pre.copy()
    post[terms.coords] = post_active
    m_full = np.asarray(system.inertia(jnp.asarray(q)))
    record = ImpulseRecord(
        mode=target,
        pre_velocity=pre.copy(),
        post_velocity=post,
        body_impulse=-m_full @ (post - pre),
        contact_impulse=contact,
        pseudo_impulse=pseudo,
        delta_t=delta_t,
        energy_before=0.5 * float(pre @ m_full @ pre),
        energy_after=0.5 * float(post @ m_full @ post),
    )
    logger.debug(
        "post_impact mode=%s contact=%s energy_loss=%.3e",
        system.mode_id(target),
        np.array2string(contact, precision=6),
        record.energy_change,
    )
    return record


def pseudo_impulse(system: MechSystem, target: ContactMode, state, delta_t: float) -> np.ndarray:
    """P̃_J = A†_J (Υ − C̄q̇⁻ − N̄) δ_t, ordered like ``target.indices``.

    Raises:
        SingularBlockMatrixError: If ``target`` has no block inverse at q.
    """
    if delta_t < 0:
        raise ValueError(f"delta_t must be non-negative, got {delta_t}")
    terms = impact_terms(system, target, state)
    bi = build_block_inverse(terms.inertia, terms.rows, mode=target, rows=target.indices)
    return contact_impulses(bi, terms, delta_t)[1]
