"""Base interface for scenario builders."""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Mapping
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from contact_hybrid.core.system import ContactMode, MechSystem
from contact_hybrid.errors import ScenarioValidationError


@dataclass
class ScenarioInstance:
    """A built scenario: the system, where it starts, and its run defaults."""

    system: MechSystem
    mode: ContactMode
    state: np.ndarray
    run_defaults: dict


class ScenarioBuilder(ABC):
    """Builds a :class:`MechSystem` and its initial condition from a parameter table.

    Subclasses declare ``defaults`` (every accepted parameter with its default), the keys
    that must be strictly ``positive`` and those that must be ``non_negative``.
    """

    name: ClassVar[str]
    description: ClassVar[str] = ""
    defaults: ClassVar[dict[str, float]] = {}
    positive: ClassVar[tuple[str, ...]] = ()
    non_negative: ClassVar[tuple[str, ...]] = ()
    run_defaults: ClassVar[dict] = {"t_end": 1.0, "delta_t": 0.03, "sample_dt": 0.01}

    def __init__(self, parameters: Mapping[str, float] | None = None):
        parameters = dict(parameters or {})
        unknown = sorted(set(parameters) - set(self.defaults))
        errors = [f"parameters.{key}: unknown parameter for {self.name}" for key in unknown]
        self.params = {**self.defaults, **parameters}
        for key in self.positive:
            if not self.params[key] > 0:
                errors.append(f"parameters.{key}: must be > 0, got {self.params[key]}")
        for key in self.non_negative:
            if not self.params[key] >= 0:
                errors.append(f"parameters.{key}: must be >= 0, got {self.params[key]}")
        errors.extend(self.check())
        if errors:
            raise ScenarioValidationError(errors)

    def check(self) -> list[str]:
        """Cross-parameter validation; override when parameters constrain each other."""
        return []

    @abstractmethod
    def system(self) -> MechSystem:
        """Build the mechanical system."""
        pass

    @abstractmethod
    def initial(self, system: MechSystem) -> tuple[ContactMode, np.ndarray]:
        """Initial mode and flat state ``[q, qd]``."""
        pass

    def build(self) -> ScenarioInstance:
        system = self.system()
        mode, state = self.initial(system)
        return ScenarioInstance(system, mode, np.asarray(state, dtype=float), dict(self.run_defaults))
