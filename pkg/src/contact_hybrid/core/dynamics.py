"""Constrained continuous-time dynamics within a fixed contact mode.

The equations of motion in mode I are

    M̄ q̈ + A_Iᵀ λ = Υ − C̄ q̇ − N̄,    A_I q̈ + Ȧ_I q̇ = 0

restricted to the coordinates that carry inertia or are pinned by an active contact.
Coordinates of massless limbs with no active contact follow the limb's own flow.
"""

from __future__ import annotations

import functools
import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from contact_hybrid.core.linalg import SINGULAR_CUTOFF, build_block_inverse
from contact_hybrid.core.system import (
    ContactMode,
    MasslessLimb,
    MechSystem,
    Tolerances,
    as_state,
)
from contact_hybrid.errors import DomainViolationError, NotApplicableError

logger = logging.getLogger(__name__)


def _mode_terms(system: MechSystem, mode: ContactMode, coords: np.ndarray, x):
    q, qd = x[: system.dim], x[system.dim :]
    rows = mode.indices
    m = system.inertia(q)[np.ix_(coords, coords)]
    forces = system.generalized_forces(q, qd, mode)[coords]
    a = system.constraint_rows(rows, q)[:, coords]
    adq = system.rows_dot_qd(rows, q, qd)
    return m, a, forces, adq


def _accelerations(
    system: MechSystem,
    mode: ContactMode,
    coords: np.ndarray,
    free: tuple[MasslessLimb, ...],
    x,
):
    q, qd = x[: system.dim], x[system.dim :]
    m, a, forces, adq = _mode_terms(system, mode, coords, x)
    n_active, c = len(coords), a.shape[0]
    if c == 0:
        qdd_active = jnp.linalg.solve(m, forces)
        lam = jnp.zeros((0,))
    else:
        kkt = jnp.block([[m, a.T], [a, jnp.zeros((c, c))]])
        solution = jnp.linalg.solve(kkt, jnp.concatenate([forces, -adq]))
        qdd_active, lam = solution[:n_active], solution[n_active:]
    qdd = jnp.zeros(system.dim).at[coords].set(qdd_active)
    for limb in free:
        qdd = qdd.at[np.asarray(limb.coords)].set(limb.flow(q, qd))
    return qdd, lam


def cone_expression(system: MechSystem, k: int, w, position: Mapping[int, int]):
    """U_k(w) for a covector ``w`` whose entry for constraint i sits at ``position[i]``.

    Normals: ``cone_sign · w_k``. Tangentials: ``μ_k · U_parent(w) − |w_k|``.
    """
    c = system.constraints[k]
    if c.is_normal:
        return c.cone_sign * w[position[k]]
    parent = system.constraints[c.parent]
    return c.mu * parent.cone_sign * w[position[c.parent]] - jnp.abs(w[position[k]])


@dataclass(frozen=True, eq=False)
class ModeKernels:
    """Compiled per-mode callables on the flat state ``x = [q, q̇]``."""

    system: MechSystem
    mode: ContactMode
    coords: np.ndarray
    free: tuple[MasslessLimb, ...]
    terms: Callable
    accelerations: Callable
    flow: Callable
    multipliers: Callable

    @property
    def position(self) -> dict[int, int]:
        return {index: p for p, index in enumerate(self.mode.indices)}

    def cone(self, k: int) -> Callable:
        """Traceable x ↦ U_k(λ_mode(x)) for an index k in the mode."""
        position = self.position
        multipliers = self.multipliers
        return lambda x: cone_expression(self.system, k, multipliers(x), position)


@functools.lru_cache(maxsize=1024)
def mode_kernels(system: MechSystem, mode: ContactMode) -> ModeKernels:
    coords = np.asarray(system.active_coords(mode), dtype=int)
    free = system.free_limbs(mode)

    def accelerations(x):
        return _accelerations(system, mode, coords, free, x)

    def flow(x):
        return jnp.concatenate([x[system.dim :], accelerations(x)[0]])

    def multipliers(x):
        return accelerations(x)[1]

    logger.debug("compile_mode system=%s mode=%s", system.name, system.mode_id(mode))
    return ModeKernels(
        system=system,
        mode=mode,
        coords=coords,
        free=free,
        terms=jax.jit(functools.partial(_mode_terms, system, mode, coords)),
        accelerations=jax.jit(accelerations),
        flow=jax.jit(flow),
        multipliers=jax.jit(multipliers),
    )


@functools.lru_cache(maxsize=256)
def _domain_kernel(system: MechSystem, mode: ContactMode):
    normals = system.normal_indices
    rows = mode.indices

    def residuals(x):
        q, qd = x[: system.dim], x[system.dim :]
        distances = system.distances(normals, q) if normals else jnp.zeros((0,))
        velocities = system.constraint_rows(rows, q) @ qd
        return distances, velocities

    return jax.jit(residuals)


def domain_residuals(system: MechSystem, mode: ContactMode, state) -> dict[str, float]:
    """Scaled distances from the domain D_mode.

    ``active_distance``: max |a_k| over active normals; ``penetration``: max of −a_k over
    all normals (clipped at 0); ``velocity``: max |A_I q̇|. Positions are divided by the
    position scale and velocities by the velocity scale.
    """
    x = as_state(system, state)
    distances, velocities = (np.asarray(v) for v in _domain_kernel(system, mode)(jnp.asarray(x)))
    normals = system.normal_indices
    active = [p for p, i in enumerate(normals) if i in mode.normals]
    scales = system.scales
    return {
        "active_distance": float(np.max(np.abs(distances[active]), initial=0.0)) / scales.position,
        "penetration": float(np.max(-distances, initial=0.0)) / scales.position,
        "velocity": float(np.max(np.abs(velocities), initial=0.0)) / scales.velocity,
    }


def check_domain(system: MechSystem, mode: ContactMode, state, tol_domain: float) -> None:
    residuals = domain_residuals(system, mode, state)
    violations = {name: value for name, value in residuals.items() if value > tol_domain}
    if violations:
        raise DomainViolationError(system.mode_id(mode), violations)


def continuous_dynamics(
    system: MechSystem,
    mode: ContactMode,
    state,
    tolerances: Tolerances | None = None,
    *,
    check: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Accelerations and multipliers in ``mode``.

    Returns ``(qdd, lam)`` with q̈ = M†(Υ − C̄q̇ − N̄) − A†ᵀȦq̇ and λ = A†(Υ − C̄q̇ − N̄) − ΛȦq̇
    on the active coordinates; free massless coordinates take their limb flow. ``lam`` is
    ordered like ``mode.indices``.

    Raises:
        DomainViolationError: If ``check`` is set and the state is outside D_mode.
        SingularBlockMatrixError: If the mode's block matrix is not invertible.
    """
    tolerances = tolerances or Tolerances()
    x = as_state(system, state)
    if check:
        check_domain(system, mode, x, tolerances.tol_domain)

    kernels = mode_kernels(system, mode)
    m, a, forces, adq = (np.asarray(v) for v in kernels.terms(jnp.asarray(x)))
    bi = build_block_inverse(m, a, mode=mode, rows=mode.indices)
    qdd_active = bi.mdag @ forces - bi.adag_t @ adq
    lam = bi.adag @ forces - bi.lambda_mat @ adq

    qdd = np.zeros(system.dim)
    qdd[kernels.coords] = qdd_active
    if kernels.free:
        q, qd = (jnp.asarray(v) for v in system.split(x))
        for limb in kernels.free:
            qdd[list(limb.coords)] = np.asarray(limb.flow(q, qd))
    return qdd, lam


@dataclass(frozen=True)
class EquivalenceReport:
    """Relative deviation between the block-inverse and explicit-M̄⁻¹ dynamics."""

    mode: ContactMode
    qdd_deviation: float
    lambda_deviation: float

    @property
    def max_relative_deviation(self) -> float:
        return max(self.qdd_deviation, self.lambda_deviation)


def _relative(a: np.ndarray, b: np.ndarray, floor: float) -> float:
    """‖a − b‖ relative to ‖b‖, never dividing by less than ``floor``."""
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), floor, np.finfo(float).tiny))


def dynamics_equivalence_check(system: MechSystem, mode: ContactMode, state) -> EquivalenceReport:
    """Compare :func:`continuous_dynamics` with the massive-limit formulas

        λ = (A M̄⁻¹ Aᵀ)⁻¹ (A M̄⁻¹ f + Ȧ q̇),    q̈ = M̄⁻¹ (f − Aᵀ λ).

    Raises:
        NotApplicableError: If the system has massless limbs or M̄ is singular at the state.
    """
    if system.has_massless_limbs:
        raise NotApplicableError(f"{system.name} has massless limbs; M̄ is singular")
    x = as_state(system, state)
    m, a, forces, adq = (np.asarray(v) for v in mode_kernels(system, mode).terms(jnp.asarray(x)))
    singular = np.linalg.svd(m, compute_uv=False)
    if singular[-1] < SINGULAR_CUTOFF * singular[0]:
        raise NotApplicableError(f"inertia of {system.name} is singular at this state")

    qdd, lam = continuous_dynamics(system, mode, x, check=False)
    m_inv_f = np.linalg.solve(m, forces)
    if a.shape[0]:
        m_inv_at = np.linalg.solve(m, a.T)
        lam_ref = np.linalg.solve(a @ m_inv_at, a @ m_inv_f + adq)
        qdd_ref = m_inv_f - m_inv_at @ lam_ref
    else:
        lam_ref = np.zeros(0)
        qdd_ref = m_inv_f
    return EquivalenceReport(
        mode=mode,
        qdd_deviation=_relative(qdd, qdd_ref, float(np.linalg.norm(m_inv_f))),
        lambda_deviation=_relative(lam, lam_ref, float(np.linalg.norm(forces))),
    )


def cone_value(
    system: MechSystem,
    k: int,
    w: Sequence[float] | np.ndarray,
    rows: Sequence[int] | None = None,
) -> float:
    """U_k(w); non-negative means constraint ``k`` can be maintained.

    ``w`` is indexed by global constraint index unless ``rows`` gives the constraint index
    of each of its entries.
    """
    w = np.asarray(w, dtype=float)
    indices = rows if rows is not None else range(system.n_constraints)
    position = {index: p for p, index in enumerate(indices)}
    return float(cone_expression(system, k, w, position))
