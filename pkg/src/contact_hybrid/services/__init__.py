"""Run, sweep and invariant-check services."""
