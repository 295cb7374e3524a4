"""Lexicographic sign of a scalar function along a flow.

A function h trends negative at x under f when the first Lie derivative L⁰h, L¹h, ... that
is not zero is negative. Derivatives come from a :class:`DerivativeOracle`; the default one
differentiates jax-traceable callables with nested forward-mode products.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Protocol

import jax
import jax.numpy as jnp
import numpy as np
from scipy.integrate import solve_ivp

from contact_hybrid.errors import DerivativeUnavailableError, InconclusiveTrendError

logger = logging.getLogger(__name__)

ScalarFunc = Callable[[Any], Any]
VectorFunc = Callable[[Any], Any]

DEFAULT_MAX_ORDER = 4
DEFAULT_TOL_TREND = 1e-9


class Sign(Enum):
    NEGATIVE = "negative"
    ZERO = "zero"
    POSITIVE = "positive"

    def flipped(self) -> Sign:
        return {Sign.NEGATIVE: Sign.POSITIVE, Sign.POSITIVE: Sign.NEGATIVE}.get(self, self)


@dataclass(frozen=True)
class TrendSign:
    """Outcome of a trend test.

    ``decided_at_order`` is None when every order up to the maximum stayed inside the
    tolerance band (sign ZERO) or when the sign came from a short flow integration, in which case
    ``flow_time`` holds the first conclusive sample time. ``values`` are the normalized
    derivatives that were evaluated.
    """

    sign: Sign
    decided_at_order: int | None
    values: tuple[float, ...] = field(default_factory=tuple)
    flow_time: float | None = None

    @property
    def negative(self) -> bool:
        return self.sign is Sign.NEGATIVE

    @property
    def positive(self) -> bool:
        return self.sign is Sign.POSITIVE

    @property
    def persists(self) -> bool:
        """The ⪰ 0 relation: positive or identically zero."""
        return self.sign is not Sign.NEGATIVE

    @property
    def max_order_reached(self) -> bool:
        return self.sign is Sign.ZERO and self.flow_time is None

    def describe(self) -> str:
        if self.flow_time is not None:
            return f"{self.sign.value}@flow(t={self.flow_time:.3g})"
        if self.decided_at_order is None:
            return f"{self.sign.value}@max"
        return f"{self.sign.value}@{self.decided_at_order}"


class DerivativeOracle(Protocol):
    """Source of Lie derivatives of a fixed (h, f) pair."""

    def derivative(self, x: np.ndarray, order: int) -> float: ...


def lie_derivative(h: ScalarFunc, f: VectorFunc, order: int = 1) -> ScalarFunc:
    """Return L_f^order h as a jax-traceable function."""
    if order < 0:
        raise ValueError(f"order must be non-negative but is {order}")
    if order == 0:
        return h
    lower = lie_derivative(h, f, order - 1)
    return lambda x: jax.jvp(lower, (x,), (f(x),))[1]


class JaxLieOracle:
    """Lie derivatives by automatic differentiation, built lazily order by order.

    Higher orders are only traced when a lower order was inconclusive. Each order is
    compiled separately when ``jit`` is set, so an oracle held across many calls pays the
    tracing cost once.
    """

    def __init__(self, h: ScalarFunc, f: VectorFunc, *, jit: bool = False):
        self._h = h
        self._f = f
        self._jit = jit
        self._orders: list[ScalarFunc] = []

    def _function(self, order: int) -> ScalarFunc:
        while len(self._orders) <= order:
            k = len(self._orders)
            fn = lie_derivative(self._h, self._f, k)
            self._orders.append(jax.jit(fn) if self._jit else fn)
        return self._orders[order]

    def derivative(self, x: np.ndarray, order: int) -> float:
        return float(self._function(order)(jnp.asarray(x, dtype=float)))


class ClosedFormOracle:
    """Caller-supplied derivatives: ``derivatives[k](x)`` is L^k h at x."""

    def __init__(self, derivatives: Sequence[Callable[[np.ndarray], float]]):
        self._derivatives = list(derivatives)

    def derivative(self, x: np.ndarray, order: int) -> float:
        if order >= len(self._derivatives):
            raise DerivativeUnavailableError(order, len(self._derivatives) - 1)
        return float(self._derivatives[order](np.asarray(x, dtype=float)))


def trend_sign_from_oracle(
    oracle: DerivativeOracle,
    x: np.ndarray,
    max_order: int = DEFAULT_MAX_ORDER,
    tol_trend: float = DEFAULT_TOL_TREND,
    *,
    value_scale: float = 1.0,
    time_scale: float = 1.0,
    first_order: int = 0,
) -> TrendSign:
    """Sign of the first derivative whose normalized magnitude exceeds ``tol_trend``.

    The k-th derivative is normalized by ``time_scale**k / value_scale``. Orders below
    ``first_order`` are taken as zero without being evaluated.

    Raises:
        DerivativeUnavailableError: If the oracle cannot reach an order that is needed, or
            returns a non-finite value.
    """
    values: list[float] = [0.0] * first_order
    for order in range(first_order, max_order + 1):
        raw = oracle.derivative(x, order)
        if not math.isfinite(raw):
            raise DerivativeUnavailableError(order, order - 1)
        scaled = raw * time_scale**order / value_scale
        values.append(scaled)
        if abs(scaled) > tol_trend:
            sign = Sign.POSITIVE if scaled > 0 else Sign.NEGATIVE
            return TrendSign(sign, order, tuple(values))
    return TrendSign(Sign.ZERO, None, tuple(values))


def trend_sign(
    h: ScalarFunc,
    f: VectorFunc,
    x: np.ndarray,
    max_order: int = DEFAULT_MAX_ORDER,
    tol_trend: float = DEFAULT_TOL_TREND,
    *,
    value_scale: float = 1.0,
    time_scale: float = 1.0,
) -> TrendSign:
    """Lexicographic sign of ``h`` along ``f`` at ``x`` using automatic differentiation."""
    return trend_sign_from_oracle(
        JaxLieOracle(h, f),
        x,
        max_order,
        tol_trend,
        value_scale=value_scale,
        time_scale=time_scale,
    )


def trend_sign_by_flow(
    h: ScalarFunc,
    f: VectorFunc,
    x: np.ndarray,
    horizon: float,
    steps: int,
    tol_trend: float = DEFAULT_TOL_TREND,
    *,
    value_scale: float = 1.0,
    rtol: float = 1e-12,
    atol: float = 1e-14,
) -> TrendSign:
    """Classify by the sign of ``h`` on a short forward integration of ``f``.

    Samples x itself and then ``steps`` evenly spaced times in (0, horizon]; the first
    sample with ``|h| / value_scale > tol_trend`` decides.

    Raises:
        InconclusiveTrendError: If no sample leaves the tolerance band.
    """
    x0 = np.asarray(x, dtype=float)

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        return np.asarray(f(jnp.asarray(y)), dtype=float)

    times = np.linspace(0.0, horizon, steps + 1)
    solution = solve_ivp(
        rhs,
        (0.0, horizon),
        x0,
        method="DOP853",
        t_eval=times[1:],
        rtol=rtol,
        atol=atol,
    )
    samples = [(0.0, x0)] + list(zip(solution.t, solution.y.T, strict=True))
    for t, y in samples:
        value = float(h(jnp.asarray(y))) / value_scale
        if abs(value) > tol_trend:
            sign = Sign.POSITIVE if value > 0 else Sign.NEGATIVE
            logger.debug("flow_trend sign=%s t=%.6g value=%.3e", sign.value, t, value)
            return TrendSign(sign, None, (value,), flow_time=float(t))
    raise InconclusiveTrendError(horizon, tol_trend)
