"""Data models for scenario files."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from importlib.resources import files
from pathlib import Path
from typing import Any

import yaml

from contact_hybrid.errors import ScenarioFileError
from contact_hybrid.models.catalog import catalog_ids
from contact_hybrid.models.schema import validate_scenario_strict


@dataclass
class InitialCondition:
    """Optional override of the catalog initial condition."""

    mode: list[str] | None = None
    q: list[float] | None = None
    qdot: list[float] | None = None


@dataclass
class RunSettings:
    """Execution settings; ``None`` means the catalog default applies."""

    delta_t: float | None = None
    t_end: float | None = None
    sample_dt: float | None = None
    max_step: float | None = None
    zeno_policy: str | None = None
    strict_scope: bool = False
    strict_uniqueness: bool = False
    seed: int = 0
    tolerances: dict[str, float] = field(default_factory=dict)
    zeno: dict[str, float] = field(default_factory=dict)


@dataclass
class ScaleSettings:
    """Characteristic magnitudes overriding the scenario's own."""

    position: float | None = None
    time: float | None = None
    force: float | None = None


@dataclass
class ScenarioConfig:
    """A scenario file: which system, its parameters, and how to run it."""

    scenario: str
    description: str | None = None
    parameters: dict[str, float] = field(default_factory=dict)
    initial: InitialCondition = field(default_factory=InitialCondition)
    run: RunSettings = field(default_factory=RunSettings)
    scales: ScaleSettings | None = None
    source: Path | None = None


def _parse_initial(data: dict | None) -> InitialCondition:
    """Parse the initial condition from YAML dict."""
    if data is None:
        return InitialCondition()
    return InitialCondition(mode=data.get("mode"), q=data.get("q"), qdot=data.get("qdot"))


def _parse_run(data: dict | None) -> RunSettings:
    """Parse run settings from YAML dict."""
    if data is None:
        return RunSettings()
    return RunSettings(
        delta_t=data.get("delta_t"),
        t_end=data.get("t_end"),
        sample_dt=data.get("sample_dt"),
        max_step=data.get("max_step"),
        zeno_policy=data.get("zeno_policy"),
        strict_scope=data.get("strict_scope", False),
        strict_uniqueness=data.get("strict_uniqueness", False),
        seed=data.get("seed", 0),
        tolerances=dict(data.get("tolerances") or {}),
        zeno=dict(data.get("zeno") or {}),
    )


def _parse_scales(data: dict | None) -> ScaleSettings | None:
    if data is None:
        return None
    return ScaleSettings(
        position=data.get("position"), time=data.get("time"), force=data.get("force")
    )


def parse_scenario(data: dict, source: Path | None = None) -> ScenarioConfig:
    """Build a ScenarioConfig from an already validated dictionary."""
    return ScenarioConfig(
        scenario=data["scenario"],
        description=data.get("description"),
        parameters={k: float(v) for k, v in (data.get("parameters") or {}).items()},
        initial=_parse_initial(data.get("initial")),
        run=_parse_run(data.get("run")),
        scales=_parse_scales(data.get("scales")),
        source=source,
    )


def _line_lookup(text: str) -> Callable[[Sequence[str | int]], int | None]:
    """Map a path inside the YAML document to the 1-based line of the deepest node found."""
    root = yaml.compose(text)

    def line_of(path: Sequence[str | int]) -> int | None:
        node = root
        if node is None:
            return None
        line = node.start_mark.line + 1
        for key in path:
            child = None
            if isinstance(node, yaml.MappingNode):
                for key_node, value_node in node.value:
                    if key_node.value == key:
                        child = value_node
                        break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int):
                if key < len(node.value):
                    child = node.value[key]
            if child is None:
                break
            node = child
            line = node.start_mark.line + 1
        return line

    return line_of


def load_scenario(path: Path) -> ScenarioConfig:
    """Load and validate a scenario from a YAML file.

    Args:
        path: Path to the YAML scenario file.

    Returns:
        A ScenarioConfig object.

    Raises:
        ScenarioFileError: If the file is missing or is not valid YAML.
        ScenarioValidationError: If the file does not match the scenario schema.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioFileError(str(path), e.strerror or str(e)) from e

    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        if mark is not None:
            raise ScenarioFileError(str(path), problem, mark.line + 1, mark.column + 1) from e
        raise ScenarioFileError(str(path), problem) from e

    if not isinstance(data, dict):
        raise ScenarioFileError(str(path), "top level must be a mapping", 1, 1)

    validate_scenario_strict(data, _line_lookup(text))
    return parse_scenario(data, source=path)


def resolve_scenario(name_or_path: str | Path) -> Path:
    """Resolve a catalog id to its packaged file; anything else is a filesystem path."""
    candidate = Path(name_or_path)
    if candidate.exists() or str(name_or_path) not in catalog_ids():
        return candidate
    return Path(str(files("contact_hybrid").joinpath(f"library/{name_or_path}.yaml")))


def with_overrides(
    config: ScenarioConfig,
    run: dict[str, Any] | None = None,
    tolerances: dict[str, float] | None = None,
    parameters: dict[str, float] | None = None,
) -> ScenarioConfig:
    """Copy of ``config`` with command-line overrides applied on top of the file values."""
    settings = replace(
        config.run,
        **{k: v for k, v in (run or {}).items() if v is not None},
        tolerances={**config.run.tolerances, **(tolerances or {})},
    )
    return replace(
        config,
        run=settings,
        parameters={**config.parameters, **(parameters or {})},
    )


def _run_to_dict(run: RunSettings) -> dict:
    result: dict[str, Any] = {}
    for key in ("delta_t", "t_end", "sample_dt", "max_step", "zeno_policy"):
        value = getattr(run, key)
        if value is not None:
            result[key] = value
    if run.strict_scope:
        result["strict_scope"] = True
    if run.strict_uniqueness:
        result["strict_uniqueness"] = True
    if run.seed:
        result["seed"] = run.seed
    if run.tolerances:
        result["tolerances"] = dict(run.tolerances)
    if run.zeno:
        result["zeno"] = dict(run.zeno)
    return result


def scenario_to_dict(config: ScenarioConfig) -> dict:
    """Convert a ScenarioConfig to a YAML-serializable dict."""
    result: dict[str, Any] = {"scenario": config.scenario}
    if config.description:
        result["description"] = config.description
    if config.parameters:
        result["parameters"] = dict(config.parameters)
    initial = {
        k: v
        for k, v in (
            ("mode", config.initial.mode),
            ("q", config.initial.q),
            ("qdot", config.initial.qdot),
        )
        if v is not None
    }
    if initial:
        result["initial"] = initial
    run = _run_to_dict(config.run)
    if run:
        result["run"] = run
    if config.scales is not None:
        scales = {
            k: v
            for k, v in (
                ("position", config.scales.position),
                ("time", config.scales.time),
                ("force", config.scales.force),
            )
            if v is not None
        }
        if scales:
            result["scales"] = scales
    return result


def save_scenario(config: ScenarioConfig, path: Path) -> None:
    """Save a scenario to a YAML file.

    Args:
        config: The scenario to save.
        path: Path to write the YAML file.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.dump(
            scenario_to_dict(config),
            f,
            default_flow_style=False,
            sort_keys=False,
            allow_unicode=True,
        )
