"""JSON schema validation for scenario files."""

import json
from collections.abc import Callable, Sequence
from importlib.resources import files

from jsonschema import Draft202012Validator

from contact_hybrid.errors import ScenarioValidationError


def load_schema() -> dict:
    """Load the scenario schema shipped with the package."""
    schema_file = files("contact_hybrid").joinpath("schemas/scenario.schema.json")
    return json.loads(schema_file.read_text())


def validate_scenario(
    data: dict,
    line_of: Callable[[Sequence[str | int]], int | None] | None = None,
) -> list[str]:
    """Validate a scenario dictionary against the schema.

    Args:
        data: The parsed scenario file.
        line_of: Optional lookup from a path inside ``data`` to its source line; when given,
            each message ends with ``(line N)``.

    Returns:
        A list of validation error messages. Empty list if valid.
    """
    validator = Draft202012Validator(load_schema())
    errors = []
    for error in sorted(validator.iter_errors(data), key=lambda e: e.json_path):
        message = f"{error.json_path}: {error.message}"
        line = line_of(list(error.absolute_path)) if line_of else None
        if line is not None:
            message += f" (line {line})"
        errors.append(message)
    return errors


def is_valid(data: dict) -> bool:
    """Check if a scenario dictionary is valid."""
    return len(validate_scenario(data)) == 0


def validate_scenario_strict(data: dict, line_of=None) -> None:
    """Validate a scenario dictionary and raise if invalid.

    Raises:
        ScenarioValidationError: If validation fails.
    """
    errors = validate_scenario(data, line_of)
    if errors:
        raise ScenarioValidationError(errors)
