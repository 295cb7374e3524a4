"""Point mass sliding along flat ground into the foot of an inclined hill."""

from __future__ import annotations

import math

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


class SlidingPoint(ScenarioBuilder):
    """Ground z = 0 for x < ``foot``, a hill rising at ``slope_deg`` beyond it.

    Constraint order: ground normal, ground tangential, hill normal, hill tangential.
    The point starts at the origin sliding on the ground with horizontal ``speed``.
    """

    name = "sliding_point"
    description = "Point sliding into an incline; ground contact kept only when slow"
    defaults = {
        "mass": 1.0,
        "gravity": 9.81,
        "slope_deg": 30.0,
        "mu": 0.2,
        "speed": 1.0,
        "foot": 0.5,
    }
    positive = ("mass", "gravity", "slope_deg", "foot")
    non_negative = ("mu", "speed")
    run_defaults = {"t_end": 1.5, "delta_t": 0.03, "sample_dt": 0.005}

    def check(self) -> list[str]:
        if self.params["slope_deg"] >= 90:
            return [f"parameters.slope_deg: must be < 90, got {self.params['slope_deg']}"]
        return []

    @property
    def slope(self) -> float:
        return math.radians(self.params["slope_deg"])

    def system(self) -> MechSystem:
        p = self.params
        s, c = math.sin(self.slope), math.cos(self.slope)
        foot, mass, gravity = p["foot"], p["mass"], p["gravity"]
        constraints = (
            NormalConstraint("ground", 1, lambda q: q[1]),
            TangentialConstraint("ground friction", 1, lambda q: jnp.array([1.0, 0.0]), 0, p["mu"]),
            NormalConstraint("hill", 2, lambda q: c * q[1] - s * (q[0] - foot)),
            TangentialConstraint("hill friction", 2, lambda q: jnp.array([c, s]), 2, p["mu"]),
        )
        scales = Scales(
            position=foot,
            time=foot / max(p["speed"], math.sqrt(gravity * foot)),
            force=mass * gravity,
        )
        return MechSystem(
            name=self.name,
            dim=2,
            inertia=lambda q: mass * jnp.eye(2),
            constraints=constraints,
            potential=lambda q: jnp.array([0.0, mass * gravity]),
            coriolis=lambda q, qd: jnp.zeros(2),
            scales=scales,
            coordinate_names=("x", "z"),
            potential_energy=lambda q: mass * gravity * q[1],
            contact_names=("ground", "hill"),
        )

    def initial(self, system: MechSystem) -> tuple[ContactMode, np.ndarray]:
        mode = system.mode([0]) if self.params["speed"] > 0 else system.mode([0, 1])
        return mode, np.array([0.0, 0.0, self.params["speed"], 0.0])

    def arrival_time(self) -> float:
        """Sliding carries no friction force, so the point reaches the hill at foot/speed."""
        return self.params["foot"] / self.params["speed"]

    def retention_speed(self, delta_t: float) -> float:
        """Largest arrival speed at which the ground contact is kept: g·δ·tanθ."""
        return self.params["gravity"] * delta_t * math.tan(self.slope)
