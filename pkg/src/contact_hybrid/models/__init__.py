"""Scenario configuration models and the scenario catalog."""
