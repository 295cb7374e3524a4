"""Numerical engine: constrained linear algebra, trending, dynamics, impact and execution."""

import jax

# Lie derivatives and event localization are compared against 1e-9 class tolerances.
jax.config.update("jax_enable_x64", True)
