"""DC instances: oracles for f1 and f2, their classes, and built-in families.

An oracle maps a point to ``(value, subgradient)``. Outside the domain the
value is ``inf`` and the subgradient ``None``. The argmin oracle solves the
DCA subproblem ``min_x f1(x) - <g2, x>`` and returns ``(x_next, g1_next)``,
where ``g1_next`` is the subgradient of f1 certifying optimality (it equals
``g2`` exactly for every family below).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np
from scipy import linalg

from .analysis import InterpolationReport, SamplePoint, check_interpolable
from .classes import INF, FunctionClassParams, ParameterError, check_standing_assumptions

Oracle = Callable[[np.ndarray], tuple]
ArgminOracle = Callable[[np.ndarray, np.ndarray], tuple]

FAMILIES = ("quadratic", "tightness", "nonsmooth-counterexample", "pl-quadratic")


class InstanceError(ValueError):
    """Raised when an instance cannot be constructed."""


@dataclass(frozen=True)
class DCInstance:
    """f = f1 - f2 with f1 in F(params1), f2 in F(params2) and f >= f_star."""

    f1_oracle: Oracle
    f2_oracle: Oracle
    argmin_oracle: ArgminOracle
    params1: FunctionClassParams
    params2: FunctionClassParams
    f_star: float
    dimension: int
    name: str = "custom"
    start_point: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        try:
            check_standing_assumptions(self.params1, self.params2)
        except ParameterError as exc:
            raise InstanceError(str(exc)) from exc
        if self.dimension < 1:
            raise InstanceError("dimension must be positive")
        if not math.isfinite(self.f_star):
            raise InstanceError("f_star must be finite")

    def f(self, x) -> float:
        v1, _ = self.f1_oracle(_as_point(x))
        if math.isinf(v1):
            return v1
        v2, _ = self.f2_oracle(_as_point(x))
        return v1 - v2

    def samples(self, points: Iterable) -> tuple[list[SamplePoint], list[SamplePoint]]:
        """Query both oracles at ``points``; points outside the domain are skipped."""
        s1, s2 = [], []
        for p in points:
            x = _as_point(p)
            v1, g1 = self.f1_oracle(x)
            v2, g2 = self.f2_oracle(x)
            if g1 is None or g2 is None or not (math.isfinite(v1) and math.isfinite(v2)):
                continue
            s1.append(SamplePoint(x, g1, v1))
            s2.append(SamplePoint(x, g2, v2))
        return s1, s2


@dataclass(frozen=True)
class OracleAudit:
    f1: InterpolationReport
    f2: InterpolationReport
    min_gap_to_f_star: float

    @property
    def ok(self) -> bool:
        return self.f1.ok and self.f2.ok and self.min_gap_to_f_star >= -1e-9


def audit_oracles(instance: DCInstance, points: Iterable, tol: float = 1e-9) -> OracleAudit:
    """Check the accumulated oracle answers against the declared classes."""
    s1, s2 = instance.samples(points)
    rep1 = check_interpolable(s1, instance.params1, tol)
    rep2 = check_interpolable(s2, instance.params2, tol)
    gaps = [a.f - b.f - instance.f_star for a, b in zip(s1, s2)]
    return OracleAudit(rep1, rep2, min(gaps) if gaps else 0.0)


def _as_point(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# quadratic family


def _spectrum_params(lam: np.ndarray) -> FunctionClassParams:
    lo, hi = float(lam.min()), float(lam.max())
    lo = max(lo, 0.0)
    if hi <= 0.0:
        return FunctionClassParams(0.0, INF)
    if hi - lo <= 1e-12 * hi:
        # F(mu, mu) is degenerate; drop the strong convexity
        return FunctionClassParams(0.0, hi)
    return FunctionClassParams(lo, hi)


def _check_sym_psd(Q: np.ndarray, name: str) -> np.ndarray:
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InstanceError(f"{name} must be square, got shape {Q.shape}")
    scale = max(1.0, float(np.abs(Q).max(initial=0.0)))
    if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12 * scale):
        raise InstanceError(f"{name} is not symmetric")
    lam = np.linalg.eigvalsh(Q)
    if lam.min() < -1e-12 * scale:
        raise InstanceError(f"{name} is not positive semidefinite (min eigenvalue {lam.min():.3g})")
    return lam


def make_quadratic_instance(
    Q1,
    b1,
    Q2,
    b2,
    f_star: float | None = None,
    params1: FunctionClassParams | None = None,
    params2: FunctionClassParams | None = None,
) -> DCInstance:
    """f1 = x'Q1x/2 + b1'x and f2 = x'Q2x/2 + b2'x.

    Class moduli default to eigenvalue extremes. A degenerate class mu = L
    keeps L and drops mu to 0, and when lambda_max(Q2) <= mu1 the class of f2
    is widened to L2 = inf so the standing assumption L2 > mu1 holds.
    ``f_star`` defaults to the exact minimum when Q1 - Q2 is positive
    definite; otherwise it must be supplied.
    """
    Q1 = np.atleast_2d(np.asarray(Q1, dtype=float))
    Q2 = np.atleast_2d(np.asarray(Q2, dtype=float))
    b1 = _as_point(b1)
    b2 = _as_point(b2)
    n = Q1.shape[0]
    if Q2.shape != Q1.shape or b1.shape != (n,) or b2.shape != (n,):
        raise InstanceError("dimension mismatch between Q1, b1, Q2, b2")
    lam1 = _check_sym_psd(Q1, "Q1")
    lam2 = _check_sym_psd(Q2, "Q2")

    H = Q1 - Q2
    lamH = np.linalg.eigvalsh(H)
    scale = max(1.0, float(np.abs(lam1).max()))
    bounded = lamH.min() > 1e-12 * scale
    c = b1 - b2
    if bounded:
        exact = -0.5 * float(c @ np.linalg.solve(H, c))
        if f_star is None:
            f_star = exact
        elif f_star > exact + 1e-9 * (1 + abs(exact)):
            raise InstanceError(f"f_star={f_star} exceeds the true minimum {exact}")
    elif f_star is None:
        raise InstanceError(
            "f may be unbounded below: lambda_max(Q2) >= lambda_min(Q1) and Q1 - Q2 "
            "is not positive definite; supply f_star"
        )

    if params1 is None:
        params1 = _spectrum_params(lam1)
    if params2 is None:
        params2 = _spectrum_params(lam2)
        if not params2.L > params1.mu:
            params2 = FunctionClassParams(params2.mu, INF)
    if lam1.min() < params1.mu - 1e-12 * scale or lam1.max() > params1.L * (1 + 1e-12):
        raise InstanceError(f"spectrum of Q1 lies outside {params1}")
    if lam2.min() < params2.mu - 1e-12 * scale or lam2.max() > params2.L * (1 + 1e-12):
        raise InstanceError(f"spectrum of Q2 lies outside {params2}")

    try:
        chol = linalg.cho_factor(Q1)
    except linalg.LinAlgError as exc:
        raise InstanceError("Q1 must be positive definite for an exact argmin oracle") from exc

    Q1c, Q2c, b1c, b2c = Q1.copy(), Q2.copy(), b1.copy(), b2.copy()

    def f1(x):
        x = _as_point(x)
        g = Q1c @ x + b1c
        return 0.5 * float(x @ Q1c @ x) + float(b1c @ x), g

    def f2(x):
        x = _as_point(x)
        g = Q2c @ x + b2c
        return 0.5 * float(x @ Q2c @ x) + float(b2c @ x), g

    def argmin(x, g2):
        g2 = _as_point(g2)
        rhs = g2 - b1c
        x = linalg.cho_solve(chol, rhs)
        # one step of iterative refinement
        x = x + linalg.cho_solve(chol, rhs - Q1c @ x)
        return x, g2.copy()

    return DCInstance(
        f1, f2, argmin, params1, params2, float(f_star), n, name="quadratic",
        meta={"Q1": Q1c, "b1": b1c, "Q2": Q2c, "b2": b2c},
    )


def make_pl_quadratic_instance(L1: float, L2: float = INF, dimension: int = 1) -> DCInstance:
    """f1 = (L1/2)|x|^2 and f2 = (L2/2)|x|^2 (f2 = 0 when ``L2`` is inf).

    f satisfies the PL inequality with eta = L1 - L2 (eta = L1 when f2 = 0)
    and f_star = 0. The modulus is stored in ``meta["eta"]``.
    """
    L1 = float(L1)
    L2 = float(L2)
    if not L1 > 0:
        raise InstanceError("L1 must be positive")
    b = 0.0 if math.isinf(L2) else L2
    if not 0.0 <= b < L1:
        raise InstanceError(f"need 0 <= L2 < L1 for a PL instance, got L1={L1}, L2={L2}")
    eye = np.eye(dimension)
    inst = make_quadratic_instance(L1 * eye, np.zeros(dimension), b * eye, np.zeros(dimension), f_star=0.0)
    meta = dict(inst.meta, eta=L1 - b)
    return DCInstance(
        inst.f1_oracle, inst.f2_oracle, inst.argmin_oracle, inst.params1, inst.params2,
        0.0, dimension, name="pl-quadratic", start_point=np.ones(dimension), meta=meta,
    )


# ---------------------------------------------------------------------------
# tightness family


@dataclass(frozen=True)
class TightnessExampleParams:
    L1: float
    N: int

    def __post_init__(self) -> None:
        if not (self.L1 > 0 and math.isfinite(self.L1)):
            raise InstanceError("L1 must be positive and finite")
        if self.N < 0 or int(self.N) != self.N:
            raise InstanceError("N must be a nonnegative integer")
        if not self.U < 1:
            raise InstanceError(
                f"precondition U = sqrt(2/(L1 (N+1))) < 1 violated: U = {self.U:.6g}"
            )

    @property
    def U(self) -> float:
        return math.sqrt(2.0 / (self.L1 * (self.N + 1)))

    @property
    def alpha(self) -> np.ndarray:
        """alpha_i = i - U for i = 1..N+1 (index 0 holds alpha_1)."""
        return np.arange(1, self.N + 2) - self.U

    @property
    def beta(self) -> np.ndarray:
        """beta_i = i - 1 for i = 1..N+2, with beta_{N+2} = inf."""
        b = np.arange(0, self.N + 2, dtype=float)
        b[-1] = INF
        return b


def _tight_f1(x: float, L1: float, U: float, N: int) -> tuple[float, float]:
    if x < 0:
        return 0.5 * L1 * x * x, L1 * x
    i = min(int(math.floor(x)) + 1, N + 1)
    beta_i = i - 1.0
    alpha_i = i - U
    if x < alpha_i:
        val = L1 * U * beta_i * (x - beta_i) + beta_i * L1 * U * U / 2 + beta_i * (beta_i - 1) * L1 * U / 2
        return val, L1 * U * beta_i
    c = i * (1.0 - U)
    return 0.5 * L1 * (x - c) ** 2 + L1 * U * i * (i - 1) * (1 - U) / 2, L1 * (x - c)


def make_tightness_instance(L1: float, N: int) -> DCInstance:
    """One-dimensional instance on which the DCA gradient gap stays at sqrt(2 L1/(N+1)).

    f1 is L1-smooth and piecewise (quadratic left of 0, alternating linear and
    quadratic pieces with breakpoints beta_i = i-1, alpha_i = i-U), f2 is a
    max of N+1 affine pieces, f_star = 0 and the run starts at x1 = N+1.
    The f2 oracle returns the smallest active slope, so at x^k = N+2-k it
    returns L1*U*(N+1-k); the argmin oracle returns the left end of the
    solution interval, giving x^{k+1} = N+1-k.
    """
    tp = TightnessExampleParams(float(L1), int(N))
    L1, N, U = tp.L1, tp.N, tp.U
    slopes = L1 * U * np.arange(0, N + 1)  # term i has slope L1 U (i-1)
    idx = np.arange(1, N + 2)
    offsets = -slopes * idx + idx * (idx - 1) * L1 * U / 2

    def f1(x):
        v, g = _tight_f1(float(_as_point(x)[0]), L1, U, N)
        return v, np.array([g])

    def f2(x):
        t = float(_as_point(x)[0])
        vals = slopes * t + offsets
        top = vals.max()
        active = vals >= top - 1e-12 * (1.0 + abs(top))
        return float(top), np.array([slopes[active].min()])

    def argmin(x, g2):
        s = float(_as_point(g2)[0])
        h = L1 * U
        if s <= 0.0:
            # f1' = L1 x on x < 0 and f1' = 0 on [0, alpha_1]
            return np.array([min(s / L1, 0.0)]), np.array([s])
        m = s / h
        m0 = round(m)
        if abs(m - m0) <= 1e-9 * max(1.0, m) and 1 <= m0 <= N:
            # slope L1 U m0 is attained on the whole linear piece [beta, alpha] of index m0+1
            return np.array([float(m0)]), np.array([s])
        i = min(int(math.floor(m)) + 1, N + 1)
        return np.array([s / L1 + i * (1.0 - U)]), np.array([s])

    return DCInstance(
        f1, f2, argmin, FunctionClassParams(0.0, L1), FunctionClassParams(0.0, INF),
        0.0, 1, name="tightness", start_point=np.array([float(N + 1)]),
        meta={"example": tp, "U": U},
    )


# ---------------------------------------------------------------------------
# nonsmooth counterexample


def make_nonsmooth_counterexample(max_terms: int = 60) -> DCInstance:
    """f1 = max_n (-n x + 2 - 2^{1-n}), f2 = max_n (-(n+1) x + 2 - 2^{1-n}), x >= 0.

    Both maxima run over n = 0..max_terms (exact for iterates x > 2^{-max_terms}).
    f1 is +inf for x < 0. Both oracles return the largest active slope and
    the argmin oracle the left end of the solution interval. From x1 = 1 the
    run visits x^k = 2^{1-k} with |g1^k - g2^k| = 1 throughout.
    """
    if max_terms < 2:
        raise InstanceError("max_terms must be at least 2")
    n = np.arange(0, max_terms + 1, dtype=float)
    off = 2.0 - 2.0 ** (1.0 - n)
    tie = 8 * np.finfo(float).eps

    def _max_affine(slopes, t):
        vals = slopes * t + off
        top = vals.max()
        active = vals >= top - tie * (1.0 + abs(top))
        return float(top), np.array([slopes[active].max()])

    def f1(x):
        t = float(_as_point(x)[0])
        if t < 0:
            return INF, None
        return _max_affine(-n, t)

    def f2(x):
        return _max_affine(-(n + 1.0), float(_as_point(x)[0]))

    def argmin(x, g2):
        s = float(_as_point(g2)[0])
        if s > 0:
            raise InstanceError(f"subproblem unbounded below for g2 = {s} > 0")
        k = -s
        if k == 0:
            return np.array([1.0]), np.array([s])
        j = math.floor(k)
        if j >= max_terms:
            return np.array([0.0]), np.array([s])
        # k integer: minimisers form [2^-k, 2^(1-k)]; otherwise the kink 2^-floor(k)
        return np.array([2.0 ** (-j)]), np.array([s])

    return DCInstance(
        f1, f2, argmin, FunctionClassParams(0.0, INF), FunctionClassParams(0.0, INF),
        0.0, 1, name="nonsmooth-counterexample", start_point=np.array([1.0]),
        meta={"max_terms": max_terms},
    )


# ---------------------------------------------------------------------------
# configuration files


def instance_from_config(config: dict[str, Any]) -> DCInstance:
    """Build an instance from a configuration mapping.

    Schema (JSON)::

        {"family": "quadratic" | "tightness" | "nonsmooth-counterexample" | "pl-quadratic",
         "dimension": int,           # optional, checked against the family
         "params": {...},            # family arguments, see below
         "f_star": float,            # optional (quadratic only)
         "start_point": [float, ...] # optional, overrides the family default}

    ``params`` per family: quadratic ``{Q1, b1, Q2, b2}``; tightness
    ``{L1, N}``; nonsmooth-counterexample ``{max_terms}``; pl-quadratic
    ``{L1, L2}`` (``L2`` may be ``"inf"``).
    """
    family = config.get("family")
    params = dict(config.get("params", {}))
    if family == "quadratic":
        inst = make_quadratic_instance(
            params["Q1"], params["b1"], params["Q2"], params["b2"], f_star=config.get("f_star")
        )
    elif family == "tightness":
        inst = make_tightness_instance(float(params["L1"]), int(params["N"]))
    elif family == "nonsmooth-counterexample":
        inst = make_nonsmooth_counterexample(int(params.get("max_terms", 60)))
    elif family == "pl-quadratic":
        inst = make_pl_quadratic_instance(
            float(params["L1"]), float(params.get("L2", INF)), int(config.get("dimension", 1))
        )
    else:
        raise InstanceError(f"unknown family {family!r}; expected one of {FAMILIES}")
    dim = config.get("dimension")
    if dim is not None and int(dim) != inst.dimension:
        raise InstanceError(f"dimension {dim} does not match family dimension {inst.dimension}")
    start = config.get("start_point")
    if start is not None:
        start = _as_point(start)
        if start.shape != (inst.dimension,):
            raise InstanceError("start_point has the wrong dimension")
        inst = DCInstance(
            inst.f1_oracle, inst.f2_oracle, inst.argmin_oracle, inst.params1, inst.params2,
            inst.f_star, inst.dimension, inst.name, start, inst.meta,
        )
    return inst


def load_instance(path: str | Path) -> DCInstance:
    return instance_from_config(json.loads(Path(path).read_text()))
