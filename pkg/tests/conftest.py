"""Shared fixtures: seeded randomness, scenario files and built catalog systems."""

from pathlib import Path

import numpy as np
import pytest
import yaml


@pytest.fixture
def rng():
    """Seeded generator so randomized checks are reproducible."""
    return np.random.default_rng(20240611)


@pytest.fixture
def scenario_file(tmp_path):
    """Factory writing a scenario dictionary (or raw text) to a YAML file."""

    def write(content: dict | str, name: str = "scenario.yaml") -> Path:
        path = tmp_path / name
        if isinstance(content, str):
            path.write_text(content)
        else:
            path.write_text(yaml.dump(content, default_flow_style=False, sort_keys=False))
        return path

    return write


@pytest.fixture
def built():
    """Factory building a catalog scenario with optional parameter overrides."""
    from contact_hybrid.models.catalog import get_entry

    def build(scenario_id: str, **parameters):
        return get_entry(scenario_id).builder(parameters).build()

    return build
