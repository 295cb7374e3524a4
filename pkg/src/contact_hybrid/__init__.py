"""Event-driven simulation of rigid-body systems with intermittent frictional contact."""

__version__ = "0.1.0"
