"""Dual certificates behind the closed-form bounds, checked as identities.

A certificate is a list of weighted constraint slacks plus a list of
squares. Every slack is written so that it is ``>= 0`` on feasible points,
and the certificate claims

    (objective - U) + sum_c w_c * slack_c  ==  -sum_s c_s * |v_s|^2

identically in all iterates, subgradients and function values. With
nonnegative weights and square coefficients this gives ``objective <= U``.
The identity is tested by evaluating both sides at random points in
dimension 3; it is a quadratic polynomial identity, so generic agreement
with a wide margin certifies it.

The slack expressions here are written out independently of
:mod:`dcapep.pep` so that the two implementations check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import bounds, extended
from .classes import FunctionClassParams, ParameterError, check_standing_assumptions, is_inf

CASES = (
    "thm31_case_L1geL2",
    "thm31_case_L1ltL2",
    "thm31_case_ii",
    "thm41_bound_B1",
    "thm41_bound_B2",
    "thm51",
)
VARIANTS = ("printed", "repaired")
IDENTITY_TOL = 1e-9
DIM = 3


class CertificateError(ValueError):
    """Parameters outside the certificate's case, or an unknown case."""


@dataclass(frozen=True)
class CertParams:
    mu1: float = 0.0
    L1: float = math.inf
    mu2: float = 0.0
    L2: float = math.inf
    N: int = 1
    Delta: float = 1.0
    eta: float | None = None

    @classmethod
    def from_classes(cls, p1: FunctionClassParams, p2: FunctionClassParams, N=1, Delta=1.0, eta=None):
        return cls(p1.mu, p1.L, p2.mu, p2.L, int(N), float(Delta), eta)

    @property
    def p1(self) -> FunctionClassParams:
        return FunctionClassParams(self.mu1, self.L1)

    @property
    def p2(self) -> FunctionClassParams:
        return FunctionClassParams(self.mu2, self.L2)

    def values(self) -> dict:
        return dict(mu1=self.mu1, L1=self.L1, mu2=self.mu2, L2=self.L2, N=float(self.N), Delta=float(self.Delta))


# ---------------------------------------------------------------------------
# sample points and slack expressions


@dataclass
class Sample:
    """One assignment of every variable of a DCA run of length N."""

    N: int
    x: dict
    g1: dict
    g2_last: np.ndarray
    f1: dict
    f2: dict
    f_star: float
    Delta: float
    ell: float

    def g2(self, k: int) -> np.ndarray:
        return self.g1[k + 1] if k <= self.N else self.g2_last

    def grad(self, fn: int, k: int) -> np.ndarray:
        return self.g1[k] if fn == 1 else self.g2(k)

    def fval(self, fn: int, k: int) -> float:
        return self.f1[k] if fn == 1 else self.f2[k]

    @classmethod
    def random(cls, N: int, rng: np.random.Generator, dim: int = DIM, batch: int | None = None) -> "Sample":
        """Standard normal entries; with ``batch`` every field gets a leading axis of that length."""
        vs = (dim,) if batch is None else (batch, dim)
        ss = None if batch is None else (batch,)
        ks = range(1, N + 2)
        return cls(
            N,
            {k: rng.standard_normal(vs) for k in ks},
            {k: rng.standard_normal(vs) for k in ks},
            rng.standard_normal(vs),
            {k: rng.standard_normal(ss) for k in ks},
            {k: rng.standard_normal(ss) for k in ks},
            rng.standard_normal(ss),
            rng.standard_normal(ss),
            rng.standard_normal(ss),
        )

    @classmethod
    def zero(cls, N: int, dim: int = DIM) -> "Sample":
        ks = range(1, N + 2)
        z = np.zeros(dim)
        return cls(N, {k: z for k in ks}, {k: z for k in ks}, z,
                   {k: 0.0 for k in ks}, {k: 0.0 for k in ks}, 0.0, 0.0, 0.0)


Slack = Callable[[Sample], float]


def _dot(a, b):
    return (a * b).sum(axis=-1)


def interp(fn: int, params: FunctionClassParams, i: int, j: int) -> Slack:
    """RHS minus LHS of the (i, j) interpolation inequality for f_fn."""

    def slack(s: Sample) -> float:
        dx = s.x[i] - s.x[j]
        gi, gj = s.grad(fn, i), s.grad(fn, j)
        dg = gi - gj
        mu, iL = params.mu, params.inv_L
        quad = iL * _dot(dg, dg) + mu * _dot(dx, dx) - 2 * mu * iL * _dot(dg, dx)
        return s.fval(fn, i) - s.fval(fn, j) - _dot(gj, dx) - params.interp_scale * quad

    return slack


def gap_row(k: int) -> Slack:
    """|g1^k - g2^k|^2 - l."""
    return lambda s: _dot(s.g1[k] - s.g2(k), s.g1[k] - s.g2(k)) - s.ell


def T_row(k: int) -> Slack:
    """f1^k - f1^{k+1} - <g2^k, x^k - x^{k+1}> - l."""
    return lambda s: s.f1[k] - s.f1[k + 1] - _dot(s.g2(k), s.x[k] - s.x[k + 1]) - s.ell


def lower_row(k: int, S: float = math.inf) -> Slack:
    """f1^k - f2^k - f_star - |g1^k - g2^k|^2 / (2 S)."""
    c = 0.0 if is_inf(S) else 1.0 / (2.0 * S)

    def slack(s: Sample) -> float:
        d = s.g1[k] - s.g2(k)
        return s.f1[k] - s.f2[k] - s.f_star - c * _dot(d, d)

    return slack


def delta_row(s: Sample) -> float:
    """f_star - f1^1 + f2^1 + Delta."""
    return s.f_star - s.f1[1] + s.f2[1] + s.Delta


def pl_row(k: int, eta: float) -> Slack:
    """|g1^k - g2^k|^2 / (2 eta) - (f^k - f_star)."""

    def slack(s: Sample) -> float:
        d = s.g1[k] - s.g2(k)
        return _dot(d, d) / (2 * eta) - (s.f1[k] - s.f2[k] - s.f_star)

    return slack


# ---------------------------------------------------------------------------
# certificate objects


@dataclass
class Term:
    weight: float
    slack: Slack
    label: str
    row: str | None = None  # matching PEP row name, when there is one


@dataclass
class Square:
    """``coef * |sum_i a_i v_i|^2`` with the v_i read off a sample."""

    coef: float
    parts: list  # (scalar, getter)
    label: str

    def value(self, s: Sample) -> float:
        if self.coef == 0.0:
            return 0.0
        v = sum(a * get(s) for a, get in self.parts)
        return self.coef * _dot(v, v)


@dataclass
class Certificate:
    theorem_case: str
    params: CertParams
    multipliers: dict
    terms: list
    squares: list
    objective: Callable[[Sample], float]
    factor: float  # U = factor * Delta is the certified bound on the objective
    sign_conditions: dict  # name -> value that must be >= 0
    variant: str = "printed"
    notes: list = field(default_factory=list)

    @property
    def bound(self) -> float:
        return self.factor * self.params.Delta

    @property
    def sign_violations(self) -> list:
        return [(name, v) for name, v in self.sign_conditions.items() if not v >= -1e-12]

    def lhs(self, s: Sample) -> float:
        return self.objective(s) - self.factor * s.Delta + sum(t.weight * t.slack(s) for t in self.terms)

    def rhs(self, s: Sample) -> float:
        return -sum(q.value(s) for q in self.squares)


@dataclass
class IdentityReport:
    max_residual: float
    samples: int
    sign_grid_violations: list = field(default_factory=list)
    worst_sample: int | None = None
    relative: bool = True

    @property
    def ok(self) -> bool:
        return self.max_residual <= IDENTITY_TOL and not self.sign_grid_violations


def _vec(kind: str, k: int) -> Callable[[Sample], np.ndarray]:
    if kind == "x":
        return lambda s: s.x[k]
    if kind == "g1":
        return lambda s: s.g1[k]
    return lambda s: s.g2(k)


def _ratio_square(beta: float, alpha: float, a: list, b: list, label: str) -> Square:
    """beta^{-1} |beta a - alpha b|^2, taken as 0 when beta = alpha = 0."""
    if beta == 0.0:
        if abs(alpha) > 1e-300:
            raise ArithmeticError(f"{label}: zero beta with nonzero alpha")
        return Square(0.0, [], label)
    parts = [(beta * c, g) for c, g in a] + [(-alpha * c, g) for c, g in b]
    return Square(1.0 / beta, parts, label)


def _diff(kind: str, i: int, j: int) -> list:
    return [(1.0, _vec(kind, i)), (-1.0, _vec(kind, j))]


# ---------------------------------------------------------------------------
# multiplier formulas, evaluated on the extended reals


def _ev(formula, cp: CertParams) -> float:
    return extended.evaluate(formula, **cp.values())


def _B_case_i(v, I):
    A = 2 * (v.L1 * v.L2 - v.mu1 * v.L2 * I(v.L1 - v.L2) - v.mu2 * v.L1 * I(v.L2 - v.L1))
    Bc = v.L1 + v.L2 + v.mu1 * (v.L1 / v.L2 - 3) * I(v.L1 - v.L2) + v.mu2 * (v.L2 / v.L1 - 3) * I(v.L2 - v.L1)
    C = A / 2 / (v.L1 - v.mu2)
    return A / (Bc * v.N + C)


def _B_case_ii(v, I):
    return 2 * (v.L1 * v.L2 - v.mu1 * v.L2) / ((v.L1 + v.L2 + v.mu1 * (v.L1 / v.L2 - 3)) * v.N + v.L1 - v.mu1)


def _bar(cp: CertParams) -> dict:
    def D(v):
        return v.N * (v.L1 + v.L2 + v.mu1 * (v.L1 / v.L2 - 3)) + v.L2 * (v.L1 - v.mu1) / (v.L1 - v.mu2)

    # U/Delta for L1 >= L2; at L1 = L2 it agrees with the general formula
    B = _ev(lambda v, I: 2 * (v.L1 * v.L2 - v.mu1 * v.L2) / D(v), cp)
    m = {"B": B}
    m["lambda"] = _ev(lambda v, I: 2 * (v.L1 * v.L2 - v.mu1 * (2 * v.L2 - v.L1)) / D(v), cp)
    m["eta_1"] = _ev(lambda v, I: (v.L2 - v.mu1) / D(v), cp)
    m["eta_k"] = _ev(lambda v, I: (v.L1 * v.mu1 / v.L2 + v.L1 + v.L2 - 3 * v.mu1) / D(v), cp)
    m["eta_N+1"] = _ev(
        lambda v, I: (v.L1 * v.mu1 / v.L2 + v.L1 - 2 * v.mu1 + v.L2 * (v.L1 - v.mu1) / (v.L1 - v.mu2)) / D(v), cp)
    mu1, L1, mu2, L2 = cp.mu1, cp.L1, cp.mu2, cp.L2
    m["alpha_1"] = mu1 * B / (2 * (L1 - mu1))
    m["beta_1"] = mu1 * B / (2 * L2 * (L1 - mu1))
    m["alpha_2"] = ((-mu1 * L2**2 - 2 * mu1 * mu2 * L2 + mu1 * L1 * L2 + mu1 * mu2 * L1 + mu2 * L1 * L2) * B
                    / (2 * (L1 - mu1) * (L2 - mu2)))
    m["beta_2"] = ((L1 * L2 * mu2 - 2 * mu1 * mu2 * L2 + mu1 * mu2 * L1 - mu1 * L2**2 + mu1 * L1 * L2) * B
                   / (2 * L2 * (L1 - mu1) * (L2 - mu2)))
    return m


def _hat(cp: CertParams) -> dict:
    def D(v):
        return (v.L1 + v.L2 + v.mu2 * (v.L2 / v.L1 - 3)) * v.N + v.L1 * (v.L2 - v.mu2) / (v.L1 - v.mu2)

    m = {"B": _ev(_B_case_i, cp)}
    m["lambda"] = _ev(lambda v, I: 2 * (v.L1 * v.L2 - v.mu2 * (2 * v.L1 - v.L2)) / D(v), cp)
    m["eta_1"] = _ev(lambda v, I: (v.L2 * (v.L1 + v.mu2) / v.L1 - 2 * v.mu2) / D(v), cp)
    m["eta_k"] = _ev(lambda v, I: (v.L2 * (v.L1 + v.mu2) / v.L1 + v.L1 - 3 * v.mu2) / D(v), cp)
    m["eta_N+1"] = _ev(lambda v, I: (v.L1 * (v.L2 - v.mu2) / (v.L1 - v.mu2) + v.L1 - v.mu2) / D(v), cp)
    B = m["B"]
    m["alpha_1"] = _ev(lambda v, I: v.mu2 * B * (1 - v.L1 / v.L2) / (2 * v.L1 * (1 - v.mu2 / v.L2)), cp)
    m["alpha_2"] = _ev(lambda v, I: v.mu2 * v.L1 * B / (2 * (v.L2 - v.mu2)), cp)
    m["beta_1"] = _ev(lambda v, I: v.mu2 * B * (1 - v.L1 / v.L2) / (2 * v.L1**2 * (1 - v.mu2 / v.L2)), cp)
    m["beta_2"] = _ev(lambda v, I: v.mu2 * B / (2 * (v.L2 - v.mu2)), cp)
    return m


def _tilde(cp: CertParams) -> dict:
    Bt = _ev(_B_case_ii, cp)
    m = {"B": Bt}
    m["lambda"] = _ev(lambda v, I: (v.L1 * v.L2 + v.mu1 * v.L1 - 2 * v.mu1 * v.L2) * Bt / (v.L2 * (v.L1 - v.mu1)), cp)
    m["eta_1"] = _ev(lambda v, I: (v.L2 - v.mu1) * Bt / (2 * v.L2 * (v.L1 - v.mu1)), cp)
    m["eta_N+1"] = _ev(
        lambda v, I: (2 * v.L1 * v.L2 + v.mu1 * v.L1 - 3 * v.mu1 * v.L2) * Bt / (2 * v.L2**2 * (v.L1 - v.mu1)), cp)
    N = cp.N
    m["eta_k"] = (1 - m["eta_1"] - m["eta_N+1"]) / (N - 1) if N > 1 else 0.0
    m["alpha_1"] = _ev(lambda v, I: v.mu1 * Bt / (2 * (v.L1 - v.mu1)), cp)
    m["alpha_2"] = _ev(lambda v, I: v.mu1 * Bt * (1 - v.L2 / v.L1) / (2 * (1 - v.mu1 / v.L1)), cp)
    m["beta_1"] = _ev(lambda v, I: v.mu1 * Bt / (2 * v.L2 * (v.L1 - v.mu1)), cp)
    m["beta_2"] = _ev(lambda v, I: v.mu1 * Bt * (1 - v.L2 / v.L1) / (2 * v.L2 * (1 - v.mu1 / v.L1)), cp)
    return m


# ---------------------------------------------------------------------------
# assembly per case


def _gap_objective(s: Sample) -> float:
    return s.ell


def _eta_terms(m: dict, N: int) -> list:
    out = [Term(m["eta_1"], gap_row(1), "eta_1 * gap[1]", "gap[1]")]
    out += [Term(m["eta_k"], gap_row(k), f"eta_k * gap[{k}]", f"gap[{k}]") for k in range(2, N + 1)]
    out.append(Term(m["eta_N+1"], gap_row(N + 1), "eta_N+1 * gap[N+1]", f"gap[{N + 1}]"))
    return out


def _thm31_squares(m: dict, N: int) -> list:
    sq = []
    for k in range(1, N + 1):
        sq.append(_ratio_square(m["beta_1"], m["alpha_1"], _diff("g1", k, k + 1), _diff("x", k, k + 1),
                                f"beta_1 square, k={k}"))
        nxt = [(1.0, _vec("g1", k + 1)), (-1.0, _vec("g2", k + 1))]
        sq.append(_ratio_square(m["alpha_2"], m["beta_2"], _diff("x", k, k + 1), nxt, f"alpha_2 square, k={k}"))
    return sq


def _f_interp(fn, params, i, j, w, tag):
    return Term(w, interp(fn, params, i, j), f"{tag} * interp_f{fn}[{i},{j}]", f"interp_f{fn}[{i},{j}]")


def _cert_bar(cp: CertParams, variant: str) -> Certificate:
    if not (cp.L1 >= cp.L2 and cp.L1 - cp.mu2 <= cp.L2):
        raise CertificateError("thm31_case_L1geL2 needs L2 <= L1 <= L2 + mu2")
    m = _bar(cp)
    N, B, lam = cp.N, m["B"], m["lambda"]
    p1, p2 = cp.p1, cp.p2
    terms = _eta_terms(m, N)
    terms.append(Term(B, delta_row, "B * delta", "delta"))
    terms.append(Term(B, lower_row(N + 1, cp.L1 - cp.mu2), "B * lower[N+1]", f"lower[{N + 1}]"))
    terms += [_f_interp(1, p1, k, k + 1, B, "B") for k in range(1, N + 1)]
    terms += [_f_interp(2, p2, k + 1, k, lam, "lambda") for k in range(1, N)]
    terms += [_f_interp(2, p2, k, k + 1, lam - B, "lambda-B") for k in range(1, N)]
    terms.append(_f_interp(2, p2, N, N + 1, lam - B, "lambda-B"))
    terms.append(_f_interp(2, p2, N + 1, N, lam, "lambda"))
    signs = {"B": B, "lambda": lam, "lambda-B": lam - B, "beta_1": m["beta_1"], "alpha_2": m["alpha_2"]}
    signs.update(_eta_signs(m, N))
    notes = ["eta_N+1 evaluated from its closed form; the eta weights are checked to sum to 1"]
    return Certificate("thm31_case_L1geL2", cp, m, terms, _thm31_squares(m, N), _gap_objective,
                       B, signs, variant, notes)


def _eta_signs(m: dict, N: int) -> dict:
    total = m["eta_1"] + (N - 1) * m["eta_k"] + m["eta_N+1"]
    out = {"eta_1": m["eta_1"], "eta_N+1": m["eta_N+1"], "eta sum = 1": -abs(total - 1.0) + 1e-12}
    if N > 1:
        out["eta_k"] = m["eta_k"]
    return out


def _cert_hat(cp: CertParams, variant: str) -> Certificate:
    if not (cp.L1 < cp.L2 and cp.L1 - cp.mu2 <= cp.L2):
        raise CertificateError("thm31_case_L1ltL2 needs L1 < L2")
    m = _hat(cp)
    N, B, lam = cp.N, m["B"], m["lambda"]
    p1 = FunctionClassParams(0.0, cp.L1)  # the bound is free of mu1
    p2 = cp.p2
    terms = _eta_terms(m, N)
    terms.append(Term(B, delta_row, "B * delta", "delta"))
    terms.append(Term(B, lower_row(N + 1, cp.L1 - cp.mu2), "B * lower[N+1]", f"lower[{N + 1}]"))
    terms += [_f_interp(1, p1, k + 1, k, lam - B, "lambda-B") for k in range(1, N + 1)]
    terms += [_f_interp(1, p1, k, k + 1, lam, "lambda") for k in range(1, N + 1)]
    terms += [_f_interp(2, p2, k + 1, k, B, "B") for k in range(1, N)]
    terms.append(_f_interp(2, p2, N + 1, N, B, "B"))
    signs = {"B": B, "lambda": lam, "lambda-B": lam - B, "beta_1": m["beta_1"], "alpha_2": m["alpha_2"]}
    signs.update(_eta_signs(m, N))
    notes = ["mu1 set to 0 in the f1 rows (the bound does not depend on mu1 in this case)"]
    return Certificate("thm31_case_L1ltL2", cp, m, terms, _thm31_squares(m, N), _gap_objective,
                       B, signs, variant, notes)


def _cert_tilde(cp: CertParams, variant: str) -> Certificate:
    if not cp.L1 - cp.mu2 > cp.L2:
        raise CertificateError("thm31_case_ii needs L1 - mu2 > L2")
    if is_inf(cp.L2):
        raise CertificateError("thm31_case_ii needs L2 finite")
    m = _tilde(cp)
    N, Bt, lam = cp.N, m["B"], m["lambda"]
    p1 = cp.p1
    p2 = FunctionClassParams(0.0, cp.L2)  # the bound is free of mu2
    terms = _eta_terms(m, N)
    terms.append(Term(Bt, delta_row, "B~ * delta", "delta"))
    if variant == "printed":
        terms.append(Term(Bt, lower_row(N + 1), "B~ * (f^{N+1} - f_star)", f"lower[{N + 1}]"))
    else:
        terms.append(Term(Bt, lower_row(N + 1, cp.L2), "B~ * lower[N+1]", f"lower[{N + 1}]"))
    terms += [_f_interp(1, p1, k, k + 1, Bt, "B~") for k in range(1, N + 1)]
    terms += [_f_interp(2, p2, k + 1, k, lam, "lambda") for k in range(1, N)]
    terms += [_f_interp(2, p2, k, k + 1, lam - Bt, "lambda-B~") for k in range(1, N)]
    terms.append(_f_interp(2, p2, N, N + 1, lam - Bt, "lambda-B~"))
    terms.append(_f_interp(2, p2, N + 1, N, lam, "lambda"))
    signs = {"B~": Bt, "lambda": lam, "lambda-B~": lam - Bt, "beta_1": m["beta_1"], "alpha_2": m["alpha_2"]}
    signs.update(_eta_signs(m, N))
    notes = [
        "the weight printed as (lambda - B) is read as (lambda - B~); no other B exists in this case",
        "the squares are built from the tilde alpha/beta values",
        "mu2 set to 0 in the f2 rows (the bound does not depend on mu2 in this case)",
    ]
    if variant == "repaired":
        notes.append("the f^{N+1} row keeps its descent term |g1^{N+1} - g2^{N+1}|^2 / (2 L2); "
                     "without it the identity is off by exactly that square times B~")
    return Certificate("thm31_case_ii", cp, m, terms, _thm31_squares(m, N), _gap_objective,
                       Bt, signs, variant, notes)


def _T_objective(s: Sample) -> float:
    return s.ell


def _cert_B1(cp: CertParams, variant: str) -> Certificate:
    if is_inf(cp.L1):
        raise CertificateError("thm41_bound_B1 needs L1 finite (for L1 = inf the factor is 1/N, use B2)")
    N = cp.N
    B1 = cp.L1 / (N * (cp.L1 + cp.mu2))
    p1 = FunctionClassParams(0.0, cp.L1)
    p2 = FunctionClassParams(cp.mu2, math.inf)
    terms = [Term(1.0 / N, T_row(k), "1/N * T", f"T[{k}]") for k in range(1, N + 1)]
    terms.append(Term(B1, lower_row(N + 1), "B1 * lower[N+1]", f"lower[{N + 1}]"))
    terms.append(Term(B1, delta_row, "B1 * delta", "delta"))
    terms += [_f_interp(1, p1, k + 1, k, 1.0 / N - B1, "1/N-B1") for k in range(1, N + 1)]
    terms += [_f_interp(2, p2, k + 1, k, B1, "B1") for k in range(1, N + 1)]
    squares = [
        Square(B1 * cp.mu2 / 2, _diff("x", k, k + 1) + [(-1.0 / cp.L1, _vec("g1", k)), (1.0 / cp.L1, _vec("g1", k + 1))],
               f"B1 mu2/2 square, k={k}")
        for k in range(1, N + 1)
    ]
    signs = {"B1": B1, "1/N-B1": 1.0 / N - B1, "B1*mu2": B1 * cp.mu2}
    return Certificate("thm41_bound_B1", cp, {"B1": B1}, terms, squares, _T_objective, B1, signs,
                       variant, ["L2 = inf and mu1 = 0 in the rows (the factor depends on L1 and mu2 only)"])


def _cert_B2(cp: CertParams, variant: str) -> Certificate:
    if is_inf(cp.L2):
        raise CertificateError("thm41_bound_B2 needs L2 finite (for L2 = inf the factor is 1/N, use B1)")
    if not cp.L2 > cp.mu1:
        raise CertificateError("thm41_bound_B2 needs L2 > mu1")
    N = cp.N
    B2 = cp.L2 / (N * (cp.L2 + cp.mu1) - cp.mu1)
    mid = (1 - B2) / (N - 1) if N > 1 else 0.0
    alpha = mid - B2 if N > 1 else 0.0
    p1 = FunctionClassParams(cp.mu1, math.inf)
    p2 = FunctionClassParams(0.0, cp.L2)
    terms = [Term(B2, T_row(1), "B2 * T[1]", "T[1]")]
    terms.append(Term(B2, lower_row(N + 1), "B2 * lower[N+1]", f"lower[{N + 1}]"))
    terms.append(Term(B2, delta_row, "B2 * delta", "delta"))
    terms += [Term(mid, T_row(k), "(1-B2)/(N-1) * T", f"T[{k}]") for k in range(2, N + 1)]
    terms += [_f_interp(1, p1, k + 1, k, alpha, "alpha") for k in range(2, N + 1)]
    last = N if variant == "printed" else N - 1
    terms += [_f_interp(2, p2, k + 1, k, B2, "B2") for k in range(1, last + 1)]
    terms.append(_f_interp(2, p2, N + 1, N, B2, "B2"))
    c = B2 / (2 * cp.L2)
    squares = [Square(c, [(1.0, _vec("g2", N + 1)), (-1.0, _vec("g1", N + 1))], "B2/(2 L2) |g2^{N+1} - g1^{N+1}|^2")]
    if N > 1:
        r = alpha * cp.L2 / B2
        squares += [
            Square(c, _diff("g1", k, k + 1) + [(-r, _vec("x", k)), (r, _vec("x", k + 1))], f"B2/(2 L2) square, k={k}")
            for k in range(2, N + 1)
        ]
    signs = {"B2": B2, "alpha": alpha}
    if N > 1:
        signs["(1-B2)/(N-1)"] = mid
    notes = ["L1 = inf and mu2 = 0 in the rows (the factor depends on L2 and mu1 only)"]
    if variant == "repaired":
        notes.append("f2 sum runs over k = 1..N-1; the printed range 1..N counts the (N+1, N) row twice")
    if N == 1:
        notes.append("N = 1: B2 = 1 and the middle weights are void")
    return Certificate("thm41_bound_B2", cp, {"B2": B2, "alpha": alpha, "(1-B2)/(N-1)": mid}, terms, squares,
                       _T_objective, B2, signs, variant, notes)


def _cert_thm51(cp: CertParams, variant: str) -> Certificate:
    eta = cp.eta
    if eta is None or not eta > 0:
        raise CertificateError("thm51 needs eta > 0")
    if is_inf(cp.L1) and is_inf(cp.L2):
        raise CertificateError("thm51 needs L1 or L2 finite")
    if eta > cp.L1:
        raise CertificateError("thm51 needs eta <= L1")
    a1 = 0.0 if is_inf(cp.L1) else eta / cp.L1
    a2 = 0.0 if is_inf(cp.L2) else eta / cp.L2
    w_int = 1.0 / (1.0 + a2)
    w_pl1 = a1 / (1.0 + a2)
    w_pl2 = a2 / (1.0 + a2)
    rho = (1.0 - a1) / (1.0 + a2)
    p1 = FunctionClassParams(0.0, cp.L1)
    p2 = FunctionClassParams(0.0, cp.L2)
    Delta = cp.Delta

    def objective(s: Sample) -> float:
        # f(x^2) - f_star, with f(x^1) - f_star = Delta substituted back in
        return (s.f1[2] - s.f2[2] - s.f_star) - rho * (s.f1[1] - s.f2[1] - s.f_star - s.Delta)

    terms = [
        _f_interp(1, p1, 1, 2, w_int, "1/(1+eta/L2)"),
        _f_interp(2, p2, 2, 1, w_int, "1/(1+eta/L2)"),
        Term(w_pl1, pl_row(1, eta), "(eta/L1)/(1+eta/L2) * pl[1]", "pl[1]"),
        Term(w_pl2, pl_row(2, eta), "(eta/L2)/(1+eta/L2) * pl[2]", "pl[2]"),
    ]
    m = {"interp": w_int, "pl_1": w_pl1, "pl_2": w_pl2, "rho": rho}
    signs = {"interp": w_int, "pl_1": w_pl1, "pl_2": w_pl2, "rho": rho}
    return Certificate("thm51", CertParams(cp.mu1, cp.L1, cp.mu2, cp.L2, 1, Delta, eta), m, terms, [], objective,
                       rho, signs, variant, ["mu1 = mu2 = 0 in the rows (the factor is free of mu)"])


_BUILDERS = {
    "thm31_case_L1geL2": _cert_bar,
    "thm31_case_L1ltL2": _cert_hat,
    "thm31_case_ii": _cert_tilde,
    "thm41_bound_B1": _cert_B1,
    "thm41_bound_B2": _cert_B2,
    "thm51": _cert_thm51,
}

# cases whose printed multipliers fail the identity test and ship a repair
REPAIRED = ("thm31_case_ii", "thm41_bound_B2")


def multipliers_for(theorem_case: str, params: CertParams, variant: str = "printed") -> Certificate:
    """Evaluate the certificate of ``theorem_case`` at ``params``."""
    if theorem_case not in _BUILDERS:
        raise CertificateError(f"unknown case {theorem_case!r}; expected one of {CASES}")
    if variant not in VARIANTS:
        raise CertificateError(f"unknown variant {variant!r}")
    if variant == "repaired" and theorem_case not in REPAIRED:
        raise CertificateError(f"{theorem_case} has no repaired variant (the printed one passes)")
    if int(params.N) != params.N or params.N < 1:
        raise CertificateError("N must be a positive integer")
    try:
        params.p1, params.p2
        if theorem_case.startswith("thm31"):
            check_standing_assumptions(params.p1, params.p2)
    except ParameterError as exc:
        raise CertificateError(str(exc)) from exc
    return _BUILDERS[theorem_case](params, variant)


def verify_identity(cert: Certificate, samples: int = 200, seed: int = 42) -> IdentityReport:
    """Largest relative residual |LHS - RHS| / (1 + |LHS|) over random samples."""
    rng = np.random.default_rng(seed)
    s = Sample.random(cert.params.N, rng, batch=samples)
    lhs = cert.lhs(s)
    r = np.abs(lhs - cert.rhs(s)) / (1.0 + np.abs(lhs))
    if np.isnan(r).any():
        return IdentityReport(math.inf, samples, list(cert.sign_violations), int(np.argmax(np.isnan(r))))
    i = int(np.argmax(r))
    return IdentityReport(float(r[i]), samples, list(cert.sign_violations), i)


def verify_signs(theorem_case: str, param_grid: Iterable[CertParams], variant: str = "printed") -> list:
    """(params, multiplier name, value) for every negative sign condition."""
    out = []
    for cp in param_grid:
        cert = multipliers_for(theorem_case, cp, variant)
        out += [(cp, name, v) for name, v in cert.sign_violations]
    return out


PEP_KIND = {
    "thm31_case_L1geL2": "gradient_gap",
    "thm31_case_L1ltL2": "gradient_gap",
    "thm31_case_ii": "gradient_gap",
    "thm41_bound_B1": "model_decrease",
    "thm41_bound_B2": "model_decrease",
    "thm51": "pl_onestep",
}


def closed_form_bound(cert: Certificate) -> float:
    """The matching value from :mod:`dcapep.bounds` (squared for norm bounds)."""
    cp = cert.params
    p1, p2 = cp.p1, cp.p2
    case = cert.theorem_case
    if case.startswith("thm31"):
        return bounds.gradient_gap_bound_auto(p1, p2, cp.N, cp.Delta).value ** 2
    if case == "thm41_bound_B1":
        return bounds.model_decrease_factors(p1, p2, cp.N)[0] * cp.Delta
    if case == "thm41_bound_B2":
        return bounds.model_decrease_factors(p1, p2, cp.N)[1] * cp.Delta
    return bounds.pl_contraction_factor(p1, p2, cp.eta) * cp.Delta


@dataclass
class BoundCheck:
    ok: bool
    pep_value: float
    bound: float
    identity: IdentityReport
    dual_comparison: list  # (row, certificate weight, solver multiplier)


def certified_bound_check(cert: Certificate, solution, samples: int = 200, seed: int = 42,
                          tol: float = 1e-6) -> bool:
    """True iff the certificate is valid and the PEP optimum is at most its bound."""
    return check_against_solution(cert, solution, samples, seed, tol).ok


def check_against_solution(cert: Certificate, solution, samples: int = 200, seed: int = 42,
                           tol: float = 1e-6) -> BoundCheck:
    dim = solution.gram.shape[0]
    if dim != 2 * cert.params.N + 3:
        raise CertificateError(f"solution has Gram size {dim}, the certificate needs {2 * cert.params.N + 3}")
    report = verify_identity(cert, samples, seed)
    value = float(solution.objective_value)
    ok = report.ok and value <= cert.bound + tol * (1.0 + abs(cert.bound))
    duals = solution.dual_multipliers or {}
    comparison = []
    for t in cert.terms:
        if t.row is not None and t.row in duals:
            comparison.append((t.row, t.weight, abs(duals[t.row])))
    return BoundCheck(bool(ok), value, cert.bound, report, comparison)


def default_grid(theorem_case: str, N_values: Iterable[int] = (1, 2, 3, 5)) -> list:
    """A documented parameter grid inside the case (at least 50 points per case)."""
    out = []
    Ls = (0.5, 1.0, 2.0, 8.0)
    for N in N_values:
        if theorem_case == "thm31_case_L1geL2":
            # L2 <= L1 <= L2 + mu2 with mu2 < L2
            for L2 in Ls:
                for r in (1.0, 1.25, 1.6):
                    L1 = r * L2
                    for t in (0.0, 0.5, 0.9):
                        mu2 = (L1 - L2) + t * (2 * L2 - L1)
                        for m1f in (0.0, 0.5):
                            out.append(CertParams(m1f * L2, L1, mu2, L2, N))
        elif theorem_case == "thm31_case_L1ltL2":
            for L1 in Ls:
                for r in (1.5, 4.0, math.inf):
                    for m2f in (0.0, 0.3, 0.9):
                        out.append(CertParams(0.0, L1, m2f * L1, r * L1, N))
        elif theorem_case == "thm31_case_ii":
            for L2 in Ls:
                for r in (1.5, 4.0):
                    for m1f in (0.0, 0.4, 0.9):
                        out.append(CertParams(m1f * L2, r * L2, 0.0, L2, N))
                out.append(CertParams(0.3 * L2, math.inf, 0.0, L2, N))
        elif theorem_case == "thm41_bound_B1":
            for L1 in Ls:
                for m2f in (0.0, 0.25, 0.5, 0.9):
                    out.append(CertParams(0.0, L1, m2f * L1, math.inf, N))
        elif theorem_case == "thm41_bound_B2":
            for L2 in Ls:
                for m1f in (0.0, 0.1, 0.5, 0.9):
                    out.append(CertParams(m1f * L2, math.inf, 0.0, L2, N))
        elif theorem_case == "thm51":
            for L1 in Ls:
                for L2 in (0.5 * L1, 2.0 * L1, math.inf):
                    for ef in (0.1, 0.25, 0.5, 0.75, 1.0):
                        out.append(CertParams(0.0, L1, 0.0, L2, 1, 1.0, ef * L1))
            out.append(CertParams(0.0, math.inf, 0.0, 1.0, 1, 1.0, 3.0))
        else:
            raise CertificateError(f"unknown case {theorem_case!r}")
    if theorem_case == "thm51":
        out = list(dict.fromkeys(out))
    return out


def select_case(kind: str, cp: CertParams) -> tuple[str, str] | None:
    """(case, variant) whose certificate proves the closed-form bound of ``kind`` at ``cp``.

    The repaired variant is chosen where one exists. ``None`` when no
    implemented certificate covers the point.
    """
    p1, p2 = cp.p1, cp.p2
    if kind == "gradient_gap":
        if not (p1.smooth or p2.smooth):
            return None
        if bounds.gradient_case(p1, p2) == "thm31_i":
            case = "thm31_case_L1geL2" if cp.L1 >= cp.L2 else "thm31_case_L1ltL2"
        elif p2.smooth:
            case = "thm31_case_ii"
        else:
            return None
    elif kind == "model_decrease":
        a, b = bounds.model_decrease_factors(p1, p2, cp.N)
        if p1.smooth and a <= b:
            case = "thm41_bound_B1"
        elif p2.smooth:
            case = "thm41_bound_B2"
        else:
            return None
    elif kind == "pl_onestep":
        case = "thm51"
    else:
        raise CertificateError(f"unknown PEP kind {kind!r}")
    return case, ("repaired" if case in REPAIRED else "printed")
