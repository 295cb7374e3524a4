"""Rectangular block rocking on its two bottom corners.

Coordinates are the centre of mass (x, z) and the tilt θ, counter-clockwise positive.
Each bottom corner is a frictional contact: constraint order is left normal, left
tangential, right normal, right tangential.
"""

from __future__ import annotations

import math
from collections.abc import Mapping

import jax
import jax.numpy as jnp
import numpy as np

from contact_hybrid.core.system import (
    ContactMode,
    MechSystem,
    NormalConstraint,
    Scales,
    TangentialConstraint,
)
from contact_hybrid.scenarios.base import ScenarioBuilder


def block_inertia(params: Mapping[str, float]) -> float:
    return params["mass"] * (params["width"] ** 2 + params["height"] ** 2) / 12.0


def corner_impulse(params: Mapping[str, float], speed: float) -> float:
    """Cone value of the left-corner impulse when the right corner lands.

    The block is flat, pivoting on its left corner, with its centre of mass descending at
    ``speed``. Negative values mean the impact alone lifts the left corner.
    """
    m, w, h = params["mass"], params["width"], params["height"]
    return speed * (m * (w**2 - h**2) / 2.0 - 2.0 * block_inertia(params)) / w**2


def settle_speed(params: Mapping[str, float], delta_t: float) -> float:
    """Largest landing speed at which both corners stay down under the pseudo-impulse."""
    m, g, w, h = params["mass"], params["gravity"], params["width"], params["height"]
    lift = 2.0 * block_inertia(params) - m * (w**2 - h**2) / 2.0
    return delta_t * m * g / 2.0 * w**2 / lift


def lifts_on_impact(params: Mapping[str, float]) -> bool:
    """Sufficient condition for the plastic impact to lift the pivot corner: h² > w² + 4I/m."""
    m, w, h = params["mass"], params["width"], params["height"]
    return h**2 > w**2 + 4.0 * block_inertia(params) / m


def pendulum_acceleration(params: Mapping[str, float], q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
    """Accelerations [ẍ, z̈, θ̈] of the block pivoting on a fixed left corner."""
    m, g, w, h = params["mass"], params["gravity"], params["width"], params["height"]
    theta, omega = q[2], qdot[2]
    c, s = math.cos(theta), math.sin(theta)
    rx = w / 2 * c - h / 2 * s
    rz = w / 2 * s + h / 2 * c
    alpha = -m * g * rx / (block_inertia(params) + m * (w**2 + h**2) / 4.0)
    return np.array([-alpha * rz - omega**2 * rx, alpha * rx - omega**2 * rz, alpha])


def _corner(side: float, w: float, h: float):
    """Corner position at body offset (side·w/2, −h/2)."""

    def position(q):
        c, s = jnp.cos(q[2]), jnp.sin(q[2])
        ox, oz = side * w / 2, -h / 2
        return jnp.array([q[0] + c * ox - s * oz, q[1] + s * ox + c * oz])

    return position


class RockingBlock(ScenarioBuilder):
    """Block released tilted on its left corner, or flat with a given landing speed."""

    name = "rocking_block"
    description = "Block rocking on frictional corners; settles once impacts are slow"
    defaults = {
        "mass": 5.0,
        "gravity": 9.81,
        "width": 0.05,
        "height": 0.1,
        "mu": 1.5,
        "tilt": 0.02,
        "impact_speed": 0.0,
    }
    positive = ("mass", "gravity", "width", "height")
    non_negative = ("mu", "tilt", "impact_speed")
    run_defaults = {"t_end": 0.5, "delta_t": 0.03, "sample_dt": 0.002}

    def system(self) -> MechSystem:
        p = self.params
        m, g, w, h, mu = p["mass"], p["gravity"], p["width"], p["height"], p["mu"]
        inertia = jnp.diag(jnp.array([m, m, block_inertia(p)]))
        left, right = _corner(-1.0, w, h), _corner(1.0, w, h)

        def slip_row(corner):
            return jax.grad(lambda q: corner(q)[0])

        constraints = (
            NormalConstraint("left corner", 1, lambda q: left(q)[1]),
            TangentialConstraint("left friction", 1, slip_row(left), 0, mu),
            NormalConstraint("right corner", 2, lambda q: right(q)[1]),
            TangentialConstraint("right friction", 2, slip_row(right), 2, mu),
        )
        return MechSystem(
            name=self.name,
            dim=3,
            inertia=lambda q: inertia,
            constraints=constraints,
            potential=lambda q: jnp.array([0.0, m * g, 0.0]),
            coriolis=lambda q, qd: jnp.zeros(3),
            scales=Scales(position=w, time=math.sqrt(w / g), force=m * g),
            coordinate_names=("x", "z", "theta"),
            potential_energy=lambda q: m * g * q[1],
            contact_names=("left", "right"),
        )

    def initial(self, system: MechSystem) -> tuple[ContactMode, np.ndarray]:
        p = self.params
        w, h = p["width"], p["height"]
        pivot = system.mode([0, 1])
        # Left corner at the origin in both cases.
        if p["impact_speed"] > 0:
            speed = p["impact_speed"]
            return pivot, np.array([w / 2, h / 2, 0.0, speed * h / w, -speed, -2.0 * speed / w])
        theta = p["tilt"]
        c, s = math.cos(theta), math.sin(theta)
        return pivot, np.array([w / 2 * c - h / 2 * s, w / 2 * s + h / 2 * c, theta, 0.0, 0.0, 0.0])
