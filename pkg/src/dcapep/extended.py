"""Evaluate closed-form rate expressions on the extended reals.

A formula is written once as a plain Python function of its parameters and an
indicator callable. With all parameters finite it is evaluated in floating
point. When one parameter is infinite, that parameter is replaced by a symbol
``t`` and the value is the limit ``t -> oo`` of the resulting rational
expression. This reproduces the conventions ``b/inf = 0``, ``0*inf = 0`` and
``(a*inf + b)/(c*inf - d*inf) = a/(c - d)``.
"""

from __future__ import annotations

import math
from types import SimpleNamespace
from typing import Callable

import sympy as sp

from .classes import is_inf

_T = sp.Symbol("t", positive=True)


def _float_indicator(value: float) -> int:
    return 1 if value >= 0 else 0


def _limit(expr):
    expr = sp.sympify(expr)
    if not expr.has(_T):
        return expr
    expr = sp.together(expr)
    num, den = sp.fraction(expr)
    if num.is_polynomial(_T) and den.is_polynomial(_T):
        # rational in t: compare degrees and leading coefficients (exact)
        pn, pd = sp.Poly(num, _T), sp.Poly(den, _T)
        if pn.is_zero:
            return sp.S.Zero
        dn, dd = pn.degree(), pd.degree()
        ratio = pn.LC() / pd.LC()
        if dn < dd:
            return sp.S.Zero
        if dn == dd:
            return ratio
        return sp.oo if ratio > 0 else sp.S.NegativeInfinity
    return sp.limit(expr, _T, sp.oo)


def _symbolic_indicator(expr) -> int:
    value = _limit(expr)
    if value is sp.oo:
        return 1
    if value is sp.S.NegativeInfinity:
        return 0
    return 1 if value >= 0 else 0


def evaluate(formula: Callable, **values: float) -> float:
    """Evaluate ``formula(v, indicator)`` where ``v.<name>`` holds each value."""
    infinite = [name for name, v in values.items() if is_inf(v)]
    if not infinite:
        ns = SimpleNamespace(**{k: float(v) for k, v in values.items()})
        return float(formula(ns, _float_indicator))
    if len(infinite) > 1:
        raise ValueError(f"at most one infinite parameter supported, got {infinite}")
    subs = {
        k: (_T if is_inf(v) else sp.Rational(float(v)))
        for k, v in values.items()
    }
    result = _limit(formula(SimpleNamespace(**subs), _symbolic_indicator))
    if result is sp.oo:
        return math.inf
    if result is sp.S.NegativeInfinity:
        return -math.inf
    return float(result)
