import math

import pytest
from hypothesis import given, strategies as st

from dcapep import extended
from dcapep.classes import INF, FunctionClassParams, ParameterError, check_standing_assumptions, inv, is_inf


def test_inv_conventions():
    assert inv(INF) == 0.0
    assert inv(0.0) == INF
    assert inv(4.0) == 0.25
    assert is_inf(INF) and not is_inf(1e308)


@pytest.mark.parametrize("mu,L", [(-1, 1), (1, 1), (2, 1), (0, 0), (math.nan, 1), (INF, INF)])
def test_class_rejects_bad_moduli(mu, L):
    with pytest.raises(ParameterError):
        FunctionClassParams(mu, L)


def test_class_properties():
    p = FunctionClassParams(1.0, 4.0)
    assert p.smooth and p.inv_L == 0.25
    assert p.interp_scale == pytest.approx(0.5 / 0.75)
    q = FunctionClassParams(1.0)
    assert not q.smooth and q.interp_scale == 0.5
    assert FunctionClassParams(0.0, 8.0).contains(p)
    assert not p.contains(FunctionClassParams(0.0, 8.0))
    assert "inf" in str(q)


def test_standing_assumptions():
    check_standing_assumptions(FunctionClassParams(0, 1), FunctionClassParams(0.5, INF))
    with pytest.raises(ParameterError, match="L1 > mu2"):
        check_standing_assumptions(FunctionClassParams(0, 1), FunctionClassParams(1.0, INF))
    with pytest.raises(ParameterError, match="L2 > mu1"):
        check_standing_assumptions(FunctionClassParams(2.0, INF), FunctionClassParams(0, 2.0))


def test_extended_limits():
    f = lambda v, I: (3 * v.a + 1) / (v.a - 2)  # noqa: E731
    assert extended.evaluate(f, a=INF) == 3.0
    assert extended.evaluate(f, a=4.0) == 6.5
    g = lambda v, I: v.b / v.a  # noqa: E731
    assert extended.evaluate(g, a=INF, b=5.0) == 0.0
    h = lambda v, I: v.a * I(v.a - 1)  # noqa: E731
    assert extended.evaluate(h, a=INF) == INF
    with pytest.raises(ValueError):
        extended.evaluate(g, a=INF, b=INF)


@given(st.floats(0.1, 100), st.floats(0.1, 100), st.floats(0.1, 100))
def test_extended_rational_limit_matches_leading_ratio(p, q, r):
    f = lambda v, I: (p * v.t ** 2 + q * v.t) / (r * v.t ** 2 + 1)  # noqa: E731
    assert extended.evaluate(f, t=INF) == pytest.approx(p / r, rel=1e-12)
