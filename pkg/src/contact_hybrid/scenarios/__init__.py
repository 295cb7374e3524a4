"""Builders for the physical systems shipped with the package."""
