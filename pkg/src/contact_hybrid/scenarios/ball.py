"""Planar point mass dropped onto a floor or thrown up against a ceiling."""

from __future__ import annotations

import math

import jax.numpy as jnp
import numpy as np

from contact_hybrid.core.system import (
    EMPTY_MODE,
    ContactMode,
    MechSystem,
    NormalConstraint,
    Scales,
    TangentialConstraint,
)
from contact_hybrid.scenarios.base import ScenarioBuilder


def _point_mass(name: str, mass: float, gravity: float, constraints: tuple, scales: Scales):
    return MechSystem(
        name=name,
        dim=2,
        inertia=lambda q: mass * jnp.eye(2),
        constraints=constraints,
        potential=lambda q: jnp.array([0.0, mass * gravity]),
        coriolis=lambda q, qd: jnp.zeros(2),
        scales=scales,
        coordinate_names=("x", "z"),
        potential_energy=lambda q: mass * gravity * q[1],
    )


class BallFloor(ScenarioBuilder):
    """Point mass released at ``height`` above the floor z = 0."""

    name = "ball_floor"
    description = "Point mass dropped onto a plastic floor"
    defaults = {"mass": 1.0, "gravity": 9.81, "height": 1.0, "vx": 0.0, "mu": 0.0}
    positive = ("mass", "gravity")
    non_negative = ("height", "mu")
    run_defaults = {"t_end": 1.0, "delta_t": 0.03, "sample_dt": 0.01}

    def system(self) -> MechSystem:
        p = self.params
        constraints: tuple = (NormalConstraint("floor", 1, lambda q: q[1]),)
        if p["mu"] > 0:
            constraints += (
                TangentialConstraint("floor friction", 1, lambda q: jnp.array([1.0, 0.0]), 0, p["mu"]),
            )
        time = math.sqrt(max(p["height"], 0.01) / p["gravity"])
        scales = Scales(position=max(p["height"], 0.01), time=time, force=p["mass"] * p["gravity"])
        return _point_mass(self.name, p["mass"], p["gravity"], constraints, scales)

    def initial(self, system: MechSystem) -> tuple[ContactMode, np.ndarray]:
        p = self.params
        state = np.array([0.0, p["height"], p["vx"], 0.0])
        if p["height"] == 0:
            return system.mode([0]), state
        return EMPTY_MODE, state

    def impact_time(self) -> float:
        """√(2h/g)."""
        return math.sqrt(2 * self.params["height"] / self.params["gravity"])


class BallCeiling(ScenarioBuilder):
    """Point mass thrown up against a ceiling while gravity pulls it away.

    The ceiling contact closes on impact and opens again at the same instant, giving two
    transitions at one event time.
    """

    name = "ball_ceiling"
    description = "Point mass hitting a ceiling, double transition at one instant"
    defaults = {"mass": 1.0, "gravity": 9.81, "ceiling": 1.0, "gap": 0.1, "speed": 3.0}
    positive = ("mass", "gravity", "ceiling", "gap", "speed")
    run_defaults = {"t_end": 0.6, "delta_t": 0.03, "sample_dt": 0.005}

    def check(self) -> list[str]:
        p = self.params
        if p["speed"] ** 2 <= 2 * p["gravity"] * p["gap"]:
            return ["parameters.speed: too slow to reach the ceiling from the given gap"]
        return []

    def system(self) -> MechSystem:
        p = self.params
        ceiling = p["ceiling"]
        constraints = (NormalConstraint("ceiling", 1, lambda q: ceiling - q[1]),)
        scales = Scales(position=p["gap"], time=p["gap"] / p["speed"], force=p["mass"] * p["gravity"])
        return _point_mass(self.name, p["mass"], p["gravity"], constraints, scales)

    def initial(self, system: MechSystem) -> tuple[ContactMode, np.ndarray]:
        p = self.params
        return EMPTY_MODE, np.array([0.0, p["ceiling"] - p["gap"], 0.0, p["speed"]])

    def contact_state(self) -> np.ndarray:
        """At the ceiling with zero velocity, the state shared by both start modes."""
        return np.array([0.0, self.params["ceiling"], 0.0, 0.0])
