"""Sagittal-plane hexapod: a rigid body with a front and a rear massless leg pair.

Coordinates are (x, z, φ, θ_f, θ_r): body position and pitch, then the leg angles measured
from the body's downward axis. Each leg ends in a frictional foot contact. A leg in stance
is driven by a fixed-voltage motor, τ = κ_P κ_G (1 − κ_G θ̇); a leg in flight relaxes to
the motor's no-load speed 1/κ_G.
"""

from __future__ import annotations

import math

import jax
import jax.numpy as jnp
import numpy as np

from contact_hybrid.core.system import (
    EMPTY_MODE,
    ContactMode,
    MasslessLimb,
    MechSystem,
    NormalConstraint,
    Scales,
    TangentialConstraint,
)
from contact_hybrid.scenarios.base import ScenarioBuilder

FRONT, REAR = 3, 4


def motor_torque(kappa_p: float, kappa_g: float, speed):
    return kappa_p * kappa_g * (1.0 - kappa_g * speed)


class PlanarHexapod(ScenarioBuilder):
    name = "planar_hexapod"
    description = "Rigid body on two massless motor-driven leg pairs"
    defaults = {
        "mass": 7.5,
        "gravity": 9.81,
        "pitch_inertia": 0.16,
        "hip_offset": 0.2,
        "leg_length": 0.17,
        "mu": 1.0,
        "kappa_p": 60.0,
        "kappa_g": 0.1,
        "leg_relaxation": 0.02,
        "height": 0.17,
        "rear_angle": -0.3,
        "front_angle": -0.3 + math.pi,
    }
    positive = (
        "mass",
        "gravity",
        "pitch_inertia",
        "hip_offset",
        "leg_length",
        "kappa_p",
        "kappa_g",
        "leg_relaxation",
        "height",
    )
    non_negative = ("mu",)
    run_defaults = {"t_end": 1.5, "delta_t": 0.03, "sample_dt": 0.005}

    def system(self) -> MechSystem:
        p = self.params
        m, g, d, ell = p["mass"], p["gravity"], p["hip_offset"], p["leg_length"]
        kp, kg, relax = p["kappa_p"], p["kappa_g"], p["leg_relaxation"]
        inertia = jnp.diag(jnp.array([m, m, p["pitch_inertia"], 0.0, 0.0]))

        def foot(side: float, coord: int):
            def position(q):
                phi = q[2]
                angle = phi + q[coord]
                return jnp.array(
                    [
                        q[0] + side * d * jnp.cos(phi) + ell * jnp.sin(angle),
                        q[1] + side * d * jnp.sin(phi) - ell * jnp.cos(angle),
                    ]
                )

            return position

        front, rear = foot(1.0, FRONT), foot(-1.0, REAR)
        constraints = (
            NormalConstraint("front foot", 1, lambda q: front(q)[1]),
            TangentialConstraint("front friction", 1, jax.grad(lambda q: front(q)[0]), 0, p["mu"]),
            NormalConstraint("rear foot", 2, lambda q: rear(q)[1]),
            TangentialConstraint("rear friction", 2, jax.grad(lambda q: rear(q)[0]), 2, p["mu"]),
        )

        def applied(q, qd, mode: ContactMode):
            torque = jnp.zeros(5)
            for normal, coord in ((0, FRONT), (2, REAR)):
                if normal in mode:
                    torque = torque.at[coord].set(motor_torque(kp, kg, qd[coord]))
            return torque

        def relax_to_no_load(coord: int):
            return lambda q, qd: jnp.array([(1.0 / kg - qd[coord]) / relax])

        limbs = (
            MasslessLimb("front legs", (FRONT,), (0, 1), relax_to_no_load(FRONT)),
            MasslessLimb("rear legs", (REAR,), (2, 3), relax_to_no_load(REAR)),
        )
        return MechSystem(
            name=self.name,
            dim=5,
            inertia=lambda q: inertia,
            constraints=constraints,
            potential=lambda q: jnp.array([0.0, m * g, 0.0, 0.0, 0.0]),
            applied=applied,
            coriolis=lambda q, qd: jnp.zeros(5),
            limbs=limbs,
            scales=Scales(position=ell, time=math.sqrt(ell / g), force=m * g),
            coordinate_names=("x", "z", "pitch", "theta_front", "theta_rear"),
            potential_energy=lambda q: m * g * q[1],
            contact_names=("front", "rear"),
        )

    def initial(self, system: MechSystem) -> tuple[ContactMode, np.ndarray]:
        p = self.params
        no_load = 1.0 / p["kappa_g"]
        q = [0.0, p["height"], 0.0, p["front_angle"], p["rear_angle"]]
        return EMPTY_MODE, np.array(q + [0.0, 0.0, 0.0, no_load, no_load])
