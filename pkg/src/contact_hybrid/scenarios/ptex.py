"""Force-free unit mass sliding through the origin of a curved constraint.

Four variants of the gap a(q) = s·x^p + c·y with the particle at the origin moving with
velocity (v, 0). The gap and the contact force there vanish to first order, so only higher
derivatives decide whether the constraint is entered or left.
"""

from __future__ import annotations

import math
from collections.abc import Callable

import jax.numpy as jnp
import numpy as np

from contact_hybrid.core.system import (
    EMPTY_MODE,
    ContactMode,
    MechSystem,
    NormalConstraint,
    Scales,
)
from contact_hybrid.core.trending import ClosedFormOracle
from contact_hybrid.scenarios.base import ScenarioBuilder

# variant -> (sign of x-term, power, y coefficient, starts in contact)
VARIANTS: dict[str, tuple[float, int, float, bool]] = {
    "a": (1.0, 2, 4.0, False),
    "b": (-1.0, 2, 4.0, False),
    "c": (1.0, 3, 8.0, True),
    "d": (-1.0, 3, 8.0, True),
}


def gap_function(variant: str) -> Callable:
    sign, power, coeff, _ = VARIANTS[variant]
    return lambda q: sign * q[0] ** power + coeff * q[1]


def gap_derivatives(variant: str, max_order: int = 4) -> list[Callable[[np.ndarray], float]]:
    """Closed-form Lie derivatives of the gap along the force-free flow on x = [q, qd].

    L^k a = s·p!/(p−k)!·x^(p−k)·ẋ^k for the x-term; the y-term contributes c·y and c·ẏ at
    orders 0 and 1 only.
    """
    sign, power, coeff, _ = VARIANTS[variant]

    def order_k(k: int) -> Callable[[np.ndarray], float]:
        def value(x: np.ndarray) -> float:
            px, py, vx, vy = x
            term = 0.0
            if k <= power:
                falling = math.factorial(power) / math.factorial(power - k)
                term = sign * falling * px ** (power - k) * vx**k
            if k == 0:
                term += coeff * py
            elif k == 1:
                term += coeff * vy
            return float(term)

        return value

    return [order_k(k) for k in range(max_order + 1)]


class PointTrendExample(ScenarioBuilder):
    """One of the four curved-constraint variants ``a``..``d``."""

    defaults = {"speed": 1.0}
    positive = ("speed",)
    run_defaults = {"t_end": 0.5, "delta_t": 0.0, "sample_dt": 0.01}
    variant: str = "a"

    def gap_oracles(self, k: int, flow_mode: ContactMode, max_order: int) -> ClosedFormOracle | None:
        """Closed-form trend oracle for the curve gap; only the free flow is force-free."""
        if flow_mode:
            return None
        return ClosedFormOracle(gap_derivatives(self.variant, max_order))

    def system(self) -> MechSystem:
        gap = gap_function(self.variant)
        return MechSystem(
            name=self.name,
            dim=2,
            inertia=lambda q: jnp.eye(2),
            constraints=(NormalConstraint("curve", 1, gap),),
            potential=lambda q: jnp.zeros(2),
            coriolis=lambda q, qd: jnp.zeros(2),
            scales=Scales(position=1.0, time=1.0 / self.params["speed"], force=self.params["speed"] ** 2),
            coordinate_names=("x", "y"),
            potential_energy=lambda q: jnp.zeros(()),
            gap_oracles=self.gap_oracles,
        )

    def initial(self, system: MechSystem) -> tuple[ContactMode, np.ndarray]:
        in_contact = VARIANTS[self.variant][3]
        mode = system.mode([0]) if in_contact else EMPTY_MODE
        return mode, np.array([0.0, 0.0, self.params["speed"], 0.0])


def _variant(letter: str) -> type[PointTrendExample]:
    sign, power, coeff, _ = VARIANTS[letter]
    formula = f"{'-' if sign < 0 else ''}x^{power}+{coeff:g}y"
    return type(
        f"PointTrendExample{letter.upper()}",
        (PointTrendExample,),
        {
            "name": f"ptex_{letter}",
            "variant": letter,
            "description": f"Force-free particle through the origin of a = {formula}",
        },
    )


PtexA = _variant("a")
PtexB = _variant("b")
PtexC = _variant("c")
PtexD = _variant("d")
