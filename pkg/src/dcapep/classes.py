"""Function classes F_{mu,L} and the infinity conventions used throughout.

An infinite smoothness modulus is stored as ``math.inf``; arithmetic that
would produce ``inf/inf`` or ``0*inf`` is never done on raw floats. Callers
branch on :func:`is_inf` (or go through :mod:`dcapep.extended`) instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

INF = math.inf


def is_inf(value: float) -> bool:
    return value == INF


def inv(value: float) -> float:
    """Reciprocal with ``1/inf = 0`` and ``1/0 = inf``."""
    if is_inf(value):
        return 0.0
    if value == 0.0:
        return INF
    return 1.0 / value


class ParameterError(ValueError):
    """Raised when class parameters violate their invariants."""


@dataclass(frozen=True)
class FunctionClassParams:
    """Moduli of a class F_{mu,L}: ``mu``-strongly convex and ``L``-smooth.

    ``L`` may be ``math.inf`` (no smoothness). A finite ``L`` must exceed
    ``mu`` because the interpolation inequality divides by ``1 - mu/L``.
    """

    mu: float = 0.0
    L: float = INF

    def __post_init__(self) -> None:
        mu, L = float(self.mu), float(self.L)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "L", L)
        if math.isnan(mu) or math.isnan(L):
            raise ParameterError("class parameters must not be NaN")
        if not math.isfinite(mu) or mu < 0:
            raise ParameterError(f"mu must be finite and >= 0, got {mu}")
        if not L > 0:
            raise ParameterError(f"L must be > 0 (or inf), got {L}")
        if not is_inf(L) and not mu < L:
            raise ParameterError(f"need mu < L for finite L, got mu={mu}, L={L}")

    @property
    def smooth(self) -> bool:
        return not is_inf(self.L)

    @property
    def inv_L(self) -> float:
        return inv(self.L)

    @property
    def interp_scale(self) -> float:
        """The factor 1 / (2 (1 - mu/L)), equal to 1/2 when L is infinite."""
        return 0.5 / (1.0 - self.mu * self.inv_L)

    def contains(self, other: "FunctionClassParams") -> bool:
        """True when ``other`` describes a subclass of this class."""
        return other.mu >= self.mu and other.L <= self.L

    def __str__(self) -> str:
        L = "inf" if is_inf(self.L) else repr(self.L)
        return f"F(mu={self.mu!r}, L={L})"


def check_standing_assumptions(p1: FunctionClassParams, p2: FunctionClassParams) -> None:
    """Reject pairs with ``L1 <= mu2`` (f concave) or ``L2 <= mu1`` (f convex)."""
    if not p1.L > p2.mu:
        raise ParameterError(f"need L1 > mu2, got L1={p1.L}, mu2={p2.mu}")
    if not p2.L > p1.mu:
        raise ParameterError(f"need L2 > mu1, got L2={p2.L}, mu1={p1.mu}")
