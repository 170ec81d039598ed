"""Closed-form worst-case bounds for DCA.

Every bound is a pure function of the class parameters, the iteration
budget ``N`` and the initial gap ``Delta = f(x^1) - f_star``. Infinite
smoothness moduli are handled by explicit case analysis: when exactly one
``L`` is infinite the dedicated limit formula is used, never IEEE ``inf``
arithmetic. The general formulas are also exposed as plain callables so
they can be pushed through :func:`dcapep.extended.evaluate` for limit
cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace

from . import extended
from .classes import FunctionClassParams, check_standing_assumptions, inv, is_inf

THEOREMS = (
    "thm31_i", "thm31_ii", "cor31_i", "cor31_ii", "cor31_iii",
    "prop31_i", "prop31_ii", "thm41", "cor41", "thm51",
)


class BoundError(ValueError):
    """Raised when a bound is requested outside its hypotheses."""


def indicator_nonneg(t: float) -> int:
    """1 for t >= 0 (including +inf), 0 for t < 0 (including -inf)."""
    if math.isnan(t):
        raise ValueError("indicator of NaN")
    return 1 if t >= 0 else 0


@dataclass(frozen=True)
class BoundRequest:
    theorem: str
    params1: FunctionClassParams
    params2: FunctionClassParams
    N: int = 1
    Delta: float = 1.0
    eta: float | None = None

    def __post_init__(self) -> None:
        if self.theorem not in THEOREMS:
            raise BoundError(f"unknown theorem {self.theorem!r}")
        if int(self.N) != self.N or self.N < 1:
            raise BoundError("N must be a positive integer")
        if not (self.Delta >= 0 and math.isfinite(self.Delta)):
            raise BoundError("Delta must be finite and >= 0")
        check_standing_assumptions(self.params1, self.params2)


@dataclass(frozen=True)
class BoundResult:
    value: float
    constants: dict = field(default_factory=dict)
    case_taken: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.value) and self.value >= 0):
            raise BoundError(f"bound value must be finite and >= 0, got {self.value}")


# ---------------------------------------------------------------------------
# general formulas, written against a namespace ``v`` and an indicator ``I``
# (usable with floats or through extended.evaluate)


def _thm31_i_constants(v, I):
    i12, i21 = I(v.L1 - v.L2), I(v.L2 - v.L1)
    core = v.L1 * v.L2 - v.mu1 * v.L2 * i12 - v.mu2 * v.L1 * i21
    A = 2 * core
    B = v.L1 + v.L2 + v.mu1 * (v.L1 / v.L2 - 3) * i12 + v.mu2 * (v.L2 / v.L1 - 3) * i21
    C = core / (v.L1 - v.mu2)
    return A, B, C


def thm31_i_squared(v, I):
    """A Delta / (B N + C): square of the gradient-gap bound when L1 - mu2 <= L2."""
    if v.L1 == v.L2:
        # A, B, C share the factor L - mu1 - mu2 here; cancelling it
        # removes the 0/0 at mu1 + mu2 = L
        L, mu2 = v.L1, v.mu2
        return 2 * L * (L - mu2) * v.Delta / (2 * v.N * (L - mu2) + L)
    A, B, C = _thm31_i_constants(v, I)
    return A * v.Delta / (B * v.N + C)


def thm31_ii_squared(v, I):
    """Square of the gradient-gap bound when L1 - mu2 > L2 (free of mu2)."""
    num = 2 * (v.L1 * v.L2 - v.mu1 * v.L2) * v.Delta
    den = (v.L1 + v.L2 + v.mu1 * (v.L1 / v.L2 - 3)) * v.N + v.L1 - v.mu1
    return num / den


def cor31_i_squared(v, I=None):
    """L1 = inf, L2 finite."""
    return 2 * v.L2 ** 2 * v.Delta / (v.N * (v.L2 + v.mu1) + v.L2)


def cor31_ii_squared(v, I=None):
    """L2 = inf, L1 finite."""
    return 2 * v.L1 ** 2 * (v.L1 - v.mu2) * v.Delta / ((v.L1 ** 2 - v.mu2 ** 2) * v.N + v.L1 ** 2)


def cor31_iii_squared(v, I=None):
    """mu1 = mu2 = 0, both L finite."""
    return 2 * v.L1 * v.L2 * v.Delta / ((v.L1 + v.L2) * v.N + max(v.L1, v.L2))


def _ns(p1, p2, N, Delta):
    return SimpleNamespace(**_values(p1, p2, N, Delta))


def _values(p1, p2, N, Delta) -> dict:
    return dict(mu1=p1.mu, L1=p1.L, mu2=p2.mu, L2=p2.L, N=float(N), Delta=float(Delta))


# ---------------------------------------------------------------------------
# gradient gap


def gradient_case(params1: FunctionClassParams, params2: FunctionClassParams) -> str:
    """``"thm31_i"`` when L1 - mu2 <= L2, else ``"thm31_ii"``."""
    if params1.smooth and params1.L - params2.mu <= params2.L:
        return "thm31_i"
    return "thm31_ii"


def gradient_gap_bound(req: BoundRequest) -> BoundResult:
    """Bound on min_{1<=k<=N+1} |g1^k - g2^k| after N DCA steps."""
    p1, p2 = req.params1, req.params2
    if not (p1.smooth or p2.smooth):
        raise BoundError("theorem inapplicable: L1 and L2 are both infinite")
    v = _ns(p1, p2, req.N, req.Delta)
    th = req.theorem

    if th == "cor31_i":
        if p1.smooth or not p2.smooth:
            raise BoundError("cor31_i needs L1 = inf and L2 finite")
        return BoundResult(math.sqrt(cor31_i_squared(v)), {}, "L1 = inf")
    if th == "cor31_ii":
        if p2.smooth or not p1.smooth:
            raise BoundError("cor31_ii needs L2 = inf and L1 finite")
        return BoundResult(math.sqrt(cor31_ii_squared(v)), {}, "L2 = inf")
    if th == "cor31_iii":
        if p1.mu != 0 or p2.mu != 0:
            raise BoundError("cor31_iii needs mu1 = mu2 = 0")
        if not p1.smooth:
            return BoundResult(math.sqrt(cor31_i_squared(v)), {}, "mu = 0, L1 = inf")
        if not p2.smooth:
            return BoundResult(math.sqrt(cor31_ii_squared(v)), {}, "mu = 0, L2 = inf")
        return BoundResult(math.sqrt(cor31_iii_squared(v)), {}, "mu = 0")
    if th not in ("thm31_i", "thm31_ii"):
        raise BoundError(f"{th} is not a gradient-gap bound")

    case = gradient_case(p1, p2)
    if th != case:
        cond = "L1 - mu2 <= L2" if th == "thm31_i" else "L1 - mu2 > L2"
        raise BoundError(f"{th} requires {cond}; got L1={p1.L}, mu2={p2.mu}, L2={p2.L}")
    if th == "thm31_i":
        if not p2.smooth:
            return BoundResult(math.sqrt(cor31_ii_squared(v)), {}, "case (i), L2 = inf")
        A, B, C = _thm31_i_constants(v, indicator_nonneg)
        val = thm31_i_squared(v, indicator_nonneg)
        tag = "case (i), L1 >= L2" if p1.L >= p2.L else "case (i), L1 < L2"
        return BoundResult(math.sqrt(val), {"A": A, "B": B, "C": C}, tag)
    if not p1.smooth:
        return BoundResult(math.sqrt(cor31_i_squared(v)), {}, "case (ii), L1 = inf")
    val = thm31_ii_squared(v, indicator_nonneg)
    consts = {
        "A": 2 * (p1.L * p2.L - p1.mu * p2.L),
        "B": p1.L + p2.L + p1.mu * (p1.L / p2.L - 3),
        "C": p1.L - p1.mu,
    }
    return BoundResult(math.sqrt(val), consts, "case (ii)")


def gradient_gap_bound_auto(params1, params2, N: int, Delta: float = 1.0) -> BoundResult:
    """Theorem-3.1 bound with the case chosen from the parameters."""
    return gradient_gap_bound(BoundRequest(gradient_case(params1, params2), params1, params2, N, Delta))


def gradient_gap_bound_limit(params1, params2, N: int, Delta: float = 1.0) -> float:
    """Same bound via the general formulas and a symbolic limit in the infinite L."""
    case = gradient_case(params1, params2)
    formula = thm31_i_squared if case == "thm31_i" else thm31_ii_squared
    return math.sqrt(extended.evaluate(formula, **_values(params1, params2, N, Delta)))


# ---------------------------------------------------------------------------
# iterate gap via the conjugate (Toland dual) problem


def swap_params(params1: FunctionClassParams, params2: FunctionClassParams):
    """Classes of the conjugates f2*, f1*: (1/L2, 1/mu2) and (1/L1, 1/mu1)."""
    q1 = FunctionClassParams(inv(params2.L), inv(params2.mu))
    q2 = FunctionClassParams(inv(params1.L), inv(params1.mu))
    return q1, q2


def iterate_case(params1, params2) -> str:
    """``"prop31_i"`` when 1/mu2 - 1/L1 <= 1/mu1, else ``"prop31_ii"``."""
    q1, q2 = swap_params(params1, params2)
    return "prop31_i" if gradient_case(q1, q2) == "thm31_i" else "prop31_ii"


def _direct_iterate_squared(params1, params2, N, Delta, case) -> float:
    q1, q2 = swap_params(params1, params2)
    formula = thm31_i_squared if case == "prop31_i" else thm31_ii_squared
    return extended.evaluate(formula, **_values(q1, q2, N, Delta))


def iterate_gap_bound(req: BoundRequest) -> BoundResult:
    """Bound on min_{1<=k<=N} |x^{k+1} - x^k|.

    Computed twice: through :func:`gradient_gap_bound` on the swapped
    classes, and by evaluating the general formula in inverse parameters
    (symbolic limit where an inverse is infinite). The two must agree.
    """
    p1, p2 = req.params1, req.params2
    if req.theorem not in ("prop31_i", "prop31_ii"):
        raise BoundError(f"{req.theorem} is not an iterate-gap bound")
    if p1.mu == 0 and p2.mu == 0:
        raise BoundError("inapplicable: needs mu1 > 0 or mu2 > 0")
    case = iterate_case(p1, p2)
    if case != req.theorem:
        cond = "1/mu2 - 1/L1 <= 1/mu1" if req.theorem == "prop31_i" else "1/mu2 - 1/L1 > 1/mu1"
        raise BoundError(f"{req.theorem} requires {cond}")
    q1, q2 = swap_params(p1, p2)
    dual = gradient_gap_bound_auto(q1, q2, req.N, req.Delta)
    direct = math.sqrt(_direct_iterate_squared(p1, p2, req.N, req.Delta, case))
    if abs(dual.value - direct) > 1e-12 * max(1.0, direct):
        raise ArithmeticError(f"iterate bound routes disagree: {dual.value!r} vs {direct!r}")
    return BoundResult(dual.value, dict(dual.constants, direct=direct), dual.case_taken + " (conjugate)")


def iterate_gap_bound_auto(params1, params2, N: int, Delta: float = 1.0) -> BoundResult:
    return iterate_gap_bound(BoundRequest(iterate_case(params1, params2), params1, params2, N, Delta))


def iterate_gap_bound_corrected(params1, params2, N: int, Delta: float = 1.0) -> float:
    """Iterate-gap bound with the dual iteration count N - 1.

    N primal steps give the N dual iterates g2^1..g2^N, whose dual gradient
    gaps are the primal steps; that is a dual run of N - 1 steps. The
    formula of :func:`iterate_gap_bound` evaluated at N (instead of N - 1)
    is violated on simple instances, e.g. f1 = 1.5 x^2, f2 = 0.5 x^2 with
    classes (3, inf) and (1, inf), where one step from x = 1 has length
    2/3 > sqrt(2/7).
    """
    if int(N) != N or N < 1:
        raise BoundError("N must be a positive integer")
    p1, p2 = params1, params2
    if p1.mu == 0 and p2.mu == 0:
        raise BoundError("inapplicable: needs mu1 > 0 or mu2 > 0")
    check_standing_assumptions(p1, p2)
    return math.sqrt(_direct_iterate_squared(p1, p2, N - 1, Delta, iterate_case(p1, p2)))


def iterate_gap_simplified(mu1: float, mu2: float, N: int, Delta: float = 1.0) -> float:
    """sqrt(2 Delta / (N (mu1 + mu2) + max(mu1, mu2))), the nonsmooth special case."""
    if mu1 + mu2 <= 0:
        raise BoundError("needs mu1 + mu2 > 0")
    return math.sqrt(2 * Delta / (N * (mu1 + mu2) + max(mu1, mu2)))


# ---------------------------------------------------------------------------
# model decrease and PL


def model_decrease_factors(params1, params2, N: int) -> tuple[float, float]:
    """(L1/(N(L1+mu2)), L2/(N(L2+mu1)-mu1)); each equals 1/N when its L is inf."""
    if N < 1:
        raise BoundError("N must be >= 1")
    if not params2.L > params1.mu:
        raise BoundError("needs L2 > mu1")
    a = 1.0 / N if is_inf(params1.L) else params1.L / (N * (params1.L + params2.mu))
    b = 1.0 / N if is_inf(params2.L) else params2.L / (N * (params2.L + params1.mu) - params1.mu)
    return a, b


def model_decrease_bound(params1, params2, N: int, Delta: float = 1.0) -> float:
    """Bound on min_{1<=k<=N} T(x^{k+1})."""
    return min(model_decrease_factors(params1, params2, N)) * Delta


def pl_contraction_factor(params1, params2, eta: float) -> float:
    """(1 - eta/L1) / (1 + eta/L2) for one DCA step under the PL inequality."""
    if not (params1.smooth or params2.smooth):
        raise BoundError("theorem inapplicable: L1 and L2 are both infinite")
    if not (eta > 0 and math.isfinite(eta)):
        raise BoundError("eta must be positive and finite")
    if eta > params1.L:
        raise BoundError(f"eta = {eta} > L1 = {params1.L} makes the factor negative")
    return (1.0 - eta * params1.inv_L) / (1.0 + eta * params2.inv_L)


# ---------------------------------------------------------------------------
# prior-work comparisons and helpers


def prior_gradient_bound(params1, params2, N: int, Delta: float = 1.0) -> float:
    """L1 sqrt(2 Delta / ((mu1 + mu2) N)), the earlier bound this work improves."""
    s = params1.mu + params2.mu
    if s <= 0 or not params1.smooth:
        raise BoundError("needs mu1 + mu2 > 0 and L1 finite")
    return params1.L * math.sqrt(2 * Delta / (s * N))


def prior_iterate_bound(params1, params2, N: int, Delta: float = 1.0) -> float:
    """sqrt(2 Delta / ((mu1 + mu2) N))."""
    s = params1.mu + params2.mu
    if s <= 0:
        raise BoundError("needs mu1 + mu2 > 0")
    return math.sqrt(2 * Delta / (s * N))


def delta_from_trace(trace) -> float:
    """f(x^1) - f_star for a DCA trace."""
    return trace[1].f - trace.f_star


def evaluate_bound(req: BoundRequest) -> BoundResult:
    """Dispatch on ``req.theorem``.

    Norm bounds (thm31, cor31, prop31) are returned as norms; thm41/cor41
    bound min T; thm51 bounds f(x^2) - f_star given ``Delta``.
    """
    th = req.theorem
    if th.startswith(("thm31", "cor31")):
        return gradient_gap_bound(req)
    if th.startswith("prop31"):
        return iterate_gap_bound(req)
    if th in ("thm41", "cor41"):
        if th == "cor41" and (req.params1.smooth or req.params2.smooth):
            raise BoundError("cor41 needs L1 = L2 = inf")
        a, b = model_decrease_factors(req.params1, req.params2, req.N)
        return BoundResult(min(a, b) * req.Delta, {"B1": a, "B2": b}, "min(B1, B2)")
    if req.eta is None:
        raise BoundError("thm51 needs eta")
    rho = pl_contraction_factor(req.params1, req.params2, req.eta)
    return BoundResult(rho * req.Delta, {"rho": rho}, "one step")

