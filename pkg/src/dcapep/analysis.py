"""Interpolation conditions for F_{mu,L} and the DC descent lemma."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classes import FunctionClassParams, ParameterError, is_inf

TOL_INTERP = 1e-9


@dataclass(frozen=True)
class SamplePoint:
    """One oracle answer: point ``x``, subgradient ``g`` and value ``f``."""

    x: np.ndarray
    g: np.ndarray
    f: float

    def __post_init__(self) -> None:
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "f", float(self.f))
        if x.shape != g.shape:
            raise ValueError(f"x and g shapes differ: {x.shape} vs {g.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(g)) and np.isfinite(self.f)):
            raise ValueError("sample entries must be finite")


@dataclass(frozen=True)
class InterpolationReport:
    ok: bool
    worst_violation: float
    witness: tuple[int, int] | None

    def __iter__(self):
        # allows ``ok, worst, witness = check_interpolable(...)``
        return iter((self.ok, self.worst_violation, self.witness))


def interpolation_violations(samples: Sequence[SamplePoint], params: FunctionClassParams) -> np.ndarray:
    """Matrix V with V[i, j] = LHS - RHS of the (i, j) interpolation inequality.

    The diagonal is zero. Entries are <= 0 exactly when the pair condition
    holds.
    """
    X = np.array([s.x for s in samples])
    G = np.array([s.g for s in samples])
    F = np.array([s.f for s in samples])
    mu, inv_L = params.mu, params.inv_L

    dX = X[:, None, :] - X[None, :, :]  # x^i - x^j
    dG = G[:, None, :] - G[None, :, :]  # g^i - g^j
    sq_g = np.einsum("ijk,ijk->ij", dG, dG)
    sq_x = np.einsum("ijk,ijk->ij", dX, dX)
    # <g^j - g^i, x^j - x^i> = <g^i - g^j, x^i - x^j>
    cross = np.einsum("ijk,ijk->ij", dG, dX)
    lhs = params.interp_scale * (inv_L * sq_g + mu * sq_x - 2.0 * mu * inv_L * cross)
    # f^i - f^j - <g^j, x^i - x^j>
    rhs = F[:, None] - F[None, :] - np.einsum("jk,ijk->ij", G, dX)
    viol = lhs - rhs
    np.fill_diagonal(viol, 0.0)
    return viol


def check_interpolable(
    samples: Sequence[SamplePoint],
    params: FunctionClassParams,
    tol: float = TOL_INTERP,
) -> InterpolationReport:
    """Check every ordered pair of ``samples`` against the F_{mu,L} conditions.

    Returns ``(ok, worst_violation, witness)``: ``worst_violation`` is the
    largest ``LHS - RHS`` over pairs ``i != j`` and ``witness`` is the first
    such maximising pair in lexicographic order (0-based), or ``None`` when
    there are fewer than two samples.
    """
    # mu = L (finite) is already rejected when the params are constructed
    samples = list(samples)
    if len(samples) < 2:
        return InterpolationReport(True, 0.0, None)
    viol = interpolation_violations(samples, params)
    n = len(samples)
    off = ~np.eye(n, dtype=bool)
    worst = float(viol[off].max())
    # argmax over row-major order returns the lexicographically first pair
    masked = np.where(off, viol, -np.inf)
    flat = int(np.argmax(masked))
    witness = (flat // n, flat % n)
    return InterpolationReport(worst <= tol, worst, witness)


def descent_constant(params1: FunctionClassParams, params2: FunctionClassParams) -> float:
    """S = min(L1 - mu2, L2), which may be infinite."""
    a = params1.L - params2.mu if params1.smooth else np.inf
    return float(min(a, params2.L))


def descent_gap(
    f_value: float,
    g1,
    g2,
    params1: FunctionClassParams,
    params2: FunctionClassParams,
) -> float:
    """Certified lower bound ``f(x) - |g1 - g2|^2 / (2S)`` on the optimal value."""
    S = descent_constant(params1, params2)
    if is_inf(S):
        raise ParameterError("descent lemma needs L1 or L2 finite (S = inf)")
    if not S > 0:
        raise ParameterError(f"descent lemma needs S > 0, got S = {S}")
    d = np.atleast_1d(np.asarray(g1, dtype=float) - np.asarray(g2, dtype=float))
    return float(f_value) - float(d @ d) / (2.0 * S)
