"""Random system generators for the property checks."""

import jax.numpy as jnp
import numpy as np


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    b = rng.standard_normal((n, n))
    return b @ b.T + n * np.eye(n)


def random_inertia(rng: np.random.Generator, q: int, massless: int = 0) -> np.ndarray:
    """SPD inertia, or block-diagonal with ``massless`` trailing zero rows and columns."""
    m = np.zeros((q, q))
    massive = q - massless
    m[:massive, :massive] = random_spd(rng, massive)
    return m


def random_mech_system(rng: np.random.Generator, dim: int, normals: int):
    """Massive system with configuration-dependent inertia and curved normal constraints.

    The data are fixed at construction, so one system serves many random states without
    recompiling its per-mode kernels.
    """
    from contact_hybrid.core.system import MechSystem, NormalConstraint

    base = jnp.asarray(random_spd(rng, dim))
    weights = jnp.asarray(rng.standard_normal(dim))
    gravity = jnp.asarray(rng.standard_normal(dim))
    stiffness = float(rng.uniform(0.1, 1.0))

    def inertia(q):
        return base + jnp.diag(0.5 * jnp.sin(q) ** 2) + 0.1 * jnp.outer(weights, weights) * jnp.cos(
            q @ weights
        ) ** 2

    def make_distance(a, c):
        return lambda q: q @ a + 0.3 * jnp.sin(q @ c)

    constraints = tuple(
        NormalConstraint(
            f"wall {i}",
            i + 1,
            make_distance(jnp.asarray(rng.standard_normal(dim)), jnp.asarray(rng.standard_normal(dim))),
        )
        for i in range(normals)
    )
    return MechSystem(
        name=f"random_{dim}x{normals}",
        dim=dim,
        inertia=inertia,
        constraints=constraints,
        potential=lambda q: gravity + stiffness * q,
    )
