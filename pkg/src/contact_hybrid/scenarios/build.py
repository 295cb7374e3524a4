"""Turn a scenario configuration into a system, initial condition and run options."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from contact_hybrid.core.dynamics import check_domain
from contact_hybrid.core.executor import ExecutionOptions
from contact_hybrid.core.system import ContactMode, MechSystem, Scales, Tolerances
from contact_hybrid.core.zeno import ZenoPolicy, ZenoSettings
from contact_hybrid.errors import DomainViolationError, ScenarioValidationError
from contact_hybrid.models.catalog import CatalogEntry, get_entry
from contact_hybrid.models.scenario import ScenarioConfig
from contact_hybrid.scenarios.base import ScenarioBuilder

logger = logging.getLogger(__name__)


@dataclass
class BuiltScenario:
    """Everything :func:`~contact_hybrid.core.executor.execute` needs for one run."""

    config: ScenarioConfig
    entry: CatalogEntry
    builder: ScenarioBuilder
    system: MechSystem
    mode: ContactMode
    state: np.ndarray
    t_end: float
    options: ExecutionOptions


def execution_options(config: ScenarioConfig, defaults: dict) -> ExecutionOptions:
    """Resolve run settings over the builder's defaults."""
    run = config.run
    try:
        tolerances = Tolerances().updated(**run.tolerances)
        zeno = ZenoSettings(**run.zeno)
    except TypeError as e:
        raise ScenarioValidationError([f"run.zeno: {e}"]) from e

    def pick(name: str):
        value = getattr(run, name)
        return defaults.get(name) if value is None else value

    options = ExecutionOptions(
        delta_t=pick("delta_t"),
        tolerances=tolerances,
        zeno_policy=ZenoPolicy(run.zeno_policy or "project"),
        zeno=zeno,
        sample_dt=pick("sample_dt"),
        max_step=run.max_step,
        strict_scope=run.strict_scope,
        strict_uniqueness=run.strict_uniqueness,
    )
    return options


def _apply_scales(system: MechSystem, config: ScenarioConfig) -> MechSystem:
    if config.scales is None:
        return system
    current = system.scales
    scales = Scales(
        position=config.scales.position or current.position,
        time=config.scales.time or current.time,
        force=config.scales.force or current.force,
    )
    return replace(system, scales=scales)


def _initial(system: MechSystem, mode: ContactMode, state: np.ndarray, config: ScenarioConfig):
    initial = config.initial
    errors = []
    if initial.mode is not None:
        mode = system.mode_from_labels(initial.mode)
        if not system.is_valid_mode(mode):
            errors.append(f"initial.mode: {initial.mode} has a tangential without its normal")
    state = state.copy()
    for key, values, offset in (("q", initial.q, 0), ("qdot", initial.qdot, system.dim)):
        if values is None:
            continue
        if len(values) != system.dim:
            errors.append(f"initial.{key}: expected {system.dim} values, got {len(values)}")
            continue
        state[offset : offset + system.dim] = values
    if errors:
        raise ScenarioValidationError(errors)
    return mode, state


def build_scenario(config: ScenarioConfig) -> BuiltScenario:
    """Build the system and initial condition a scenario file describes.

    Raises:
        ScenarioValidationError: If the parameters, the initial condition or the run
            settings are invalid, or the initial state is outside its mode's domain.
    """
    try:
        entry = get_entry(config.scenario)
    except KeyError:
        raise ScenarioValidationError([f"scenario: unknown scenario {config.scenario!r}"]) from None

    builder = entry.builder(config.parameters)
    instance = builder.build()
    system = _apply_scales(instance.system, config)
    mode, state = _initial(system, instance.mode, instance.state, config)
    options = execution_options(config, instance.run_defaults)
    t_end = config.run.t_end if config.run.t_end is not None else instance.run_defaults["t_end"]

    try:
        check_domain(system, mode, state, options.tolerances.tol_domain)
    except DomainViolationError as e:
        raise ScenarioValidationError([f"initial: {line}" for line in str(e).splitlines()]) from e

    logger.debug(
        "scenario_built id=%s mode=%s dim=%d constraints=%d",
        entry.id,
        system.mode_id(mode),
        system.dim,
        system.n_constraints,
    )
    return BuiltScenario(config, entry, builder, system, mode, state, t_end, options)
