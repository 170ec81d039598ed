import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from dcapep import bounds
from dcapep.bounds import BoundError, BoundRequest
from dcapep.classes import INF, FunctionClassParams as F


def req(th, mu1=0.0, L1=INF, mu2=0.0, L2=INF, N=1, Delta=1.0, eta=None):
    return BoundRequest(th, F(mu1, L1), F(mu2, L2), N, Delta, eta)


def test_indicator():
    assert bounds.indicator_nonneg(0) == 1
    assert bounds.indicator_nonneg(-3) == 0
    assert bounds.indicator_nonneg(INF) == 1
    with pytest.raises(ValueError):
        bounds.indicator_nonneg(math.nan)


def test_corollary_examples():
    assert bounds.gradient_gap_bound(req("cor31_i", L2=1.0)).value == pytest.approx(1.0)
    assert bounds.gradient_gap_bound(req("cor31_ii", L1=8.0, N=3)).value == pytest.approx(2.0)
    assert bounds.gradient_gap_bound(req("cor31_iii", L1=1.0, L2=1.0)).value == pytest.approx(math.sqrt(2 / 3))


def test_case_mismatch_and_inapplicable():
    with pytest.raises(BoundError, match="L1 - mu2 <= L2"):
        bounds.gradient_gap_bound(req("thm31_i", L1=4.0, L2=1.0))
    with pytest.raises(BoundError, match="inapplicable"):
        bounds.gradient_gap_bound(req("thm31_i"))
    with pytest.raises(BoundError):
        req("nope")
    with pytest.raises(BoundError):
        req("thm31_i", N=0)


def test_iterate_examples():
    r = bounds.iterate_gap_bound_auto(F(1, INF), F(1, INF), 1)
    assert r.value == pytest.approx(math.sqrt(2 / 3))
    assert r.value == pytest.approx(bounds.iterate_gap_simplified(1, 1, 1))
    r = bounds.iterate_gap_bound(req("prop31_i", mu1=0.0, L1=2.0, mu2=1.0))
    assert r.value == pytest.approx(r.constants["direct"], abs=1e-12)
    with pytest.raises(BoundError, match="inapplicable"):
        bounds.iterate_gap_bound(req("prop31_i", L1=1.0))


def test_model_decrease_examples():
    assert bounds.model_decrease_bound(F(), F(), 4) == 0.25
    assert bounds.model_decrease_bound(F(0, 1), F(1, INF), 1) == pytest.approx(0.5)
    assert bounds.model_decrease_bound(F(), F(), 8) == bounds.model_decrease_bound(F(), F(), 4) / 2


def test_pl_examples():
    assert bounds.pl_contraction_factor(F(0, 2), F(), 1.0) == 0.5
    assert bounds.pl_contraction_factor(F(0, 2), F(), 2.0) == 0.0
    assert bounds.pl_contraction_factor(F(), F(0, 1), 1.0) == 0.5
    with pytest.raises(BoundError):
        bounds.pl_contraction_factor(F(0, 2), F(), 3.0)


def test_equal_L_removable_singularity():
    # mu1 + mu2 = L1 = L2 makes the general formula 0/0
    r = bounds.gradient_gap_bound_auto(F(0.3, 1.0), F(0.5, 1.0), 2)
    assert r.value ** 2 == pytest.approx(1 / 3)
    near = bounds.gradient_gap_bound_auto(F(0.3, 1.0), F(0.5, 1.0 + 1e-7), 2)
    assert near.value == pytest.approx(r.value, rel=1e-5)


params = st.tuples(
    st.floats(0, 2), st.floats(0.5, 10) | st.just(INF), st.floats(0, 2), st.floats(0.5, 10) | st.just(INF)
)


def _valid(mu1, L1, mu2, L2):
    return mu1 < L1 and mu2 < L2 and L1 > mu2 and L2 > mu1 and (L1 < INF or L2 < INF)


@settings(max_examples=200, deadline=None)
@given(params, st.integers(1, 30))
def test_gradient_bound_monotone_in_N_and_matches_limit(p, N):
    mu1, L1, mu2, L2 = p
    assume(_valid(*p))
    p1, p2 = F(mu1, L1), F(mu2, L2)
    assume(not (L1 == L2 and abs(mu1 + mu2 - L1) < 1e-6))
    a = bounds.gradient_gap_bound_auto(p1, p2, N).value
    b = bounds.gradient_gap_bound_auto(p1, p2, N + 1).value
    assert b <= a * (1 + 1e-12)
    assert bounds.gradient_gap_bound_limit(p1, p2, N) == pytest.approx(a, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 2), st.floats(0.5, 10), st.floats(0.01, 2), st.floats(0.5, 10), st.integers(1, 20))
def test_dominates_prior_bound(mu1, L1, mu2, L2, N):
    assume(_valid(mu1, L1, mu2, L2))
    p1, p2 = F(mu1, L1), F(mu2, L2)
    ours = bounds.gradient_gap_bound_auto(p1, p2, N).value
    assert ours <= bounds.prior_gradient_bound(p1, p2, N) * (1 + 1e-12)


@pytest.mark.parametrize("L1,mu1,N", [(3.0, 0.0, 1), (5.0, 0.5, 4), (2.5, 0.2, 7)])
def test_case_boundary_continuity(L1, mu1, N):
    # mu2 = 0 and L2 = L1: both case formulas apply
    p1, p2 = F(mu1, L1), F(0.0, L1)
    v = bounds._ns(p1, p2, N, 1.0)
    i = bounds.thm31_i_squared(v, bounds.indicator_nonneg)
    ii = bounds.thm31_ii_squared(v, bounds.indicator_nonneg)
    assert i == pytest.approx(ii, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 3), st.floats(0.05, 3), st.floats(1, 10) | st.just(INF), st.floats(1, 10) | st.just(INF),
       st.integers(1, 20))
def test_iterate_routes_agree_and_monotone(mu1, mu2, L1, L2, N):
    assume(_valid(mu1, L1, mu2, L2))
    r = bounds.iterate_gap_bound_auto(F(mu1, L1), F(mu2, L2), N)
    assert r.value == pytest.approx(r.constants["direct"], rel=1e-12)
    assert bounds.iterate_gap_bound_auto(F(mu1, L1), F(mu2, L2), N + 1).value <= r.value * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2), st.floats(0.5, 10) | st.just(INF), st.floats(0, 2), st.floats(0.5, 10) | st.just(INF),
       st.integers(1, 30))
def test_model_decrease_monotone(mu1, L1, mu2, L2, N):
    assume(mu1 < L1 and mu2 < L2 and L2 > mu1)
    a = bounds.model_decrease_bound(F(mu1, L1), F(mu2, L2), N)
    assert bounds.model_decrease_bound(F(mu1, L1), F(mu2, L2), N + 1) <= a


def test_evaluate_dispatch():
    assert bounds.evaluate_bound(req("cor41", N=4)).value == 0.25
    assert bounds.evaluate_bound(req("thm51", L1=2.0, eta=1.0)).value == 0.5
    with pytest.raises(BoundError):
        bounds.evaluate_bound(req("thm51", L1=2.0))
    with pytest.raises(BoundError):
        bounds.evaluate_bound(req("cor41", L1=2.0))
    r = bounds.evaluate_bound(req("thm31_i", L1=1.0, L2=2.0, mu1=0.1, N=3))
    assert set(r.constants) == {"A", "B", "C"}
    assert np.isfinite(r.value)


def test_printed_iterate_bound_fails_on_one_step_quadratic():
    # f1 = 1.5 x^2, f2 = 0.5 x^2, x1 = 1: x2 = 1/3, Delta = 1
    from dcapep import dca
    from dcapep.instances import make_quadratic_instance

    inst = make_quadratic_instance([[3.0]], [0.0], [[1.0]], [0.0])
    tr = dca.run(inst, [1.0], dca.StopRule(max_iter=1))
    p1, p2 = F(3.0, INF), F(1.0, INF)
    assert tr.min_step(1) == pytest.approx(2 / 3)
    assert tr[1].f - inst.f_star == pytest.approx(1.0)
    assert bounds.iterate_gap_bound_auto(p1, p2, 1).value == pytest.approx(math.sqrt(2 / 7))
    assert tr.min_step(1) > bounds.iterate_gap_bound_auto(p1, p2, 1).value
    assert tr.min_step(1) <= bounds.iterate_gap_bound_corrected(p1, p2, 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_shifted_iterate_bound_holds_on_quadratics(seed, N):
    from dcapep import dca
    from dcapep.instances import make_quadratic_instance

    rng = np.random.default_rng(seed)
    n = 3
    U = np.linalg.qr(rng.standard_normal((n, n)))[0]
    Q2 = U @ np.diag(rng.uniform(0.05, 3, n)) @ U.T
    V = np.linalg.qr(rng.standard_normal((n, n)))[0]
    Q1 = Q2 + V @ np.diag(rng.uniform(0.05, 3, n)) @ V.T
    inst = make_quadratic_instance((Q1 + Q1.T) / 2, rng.standard_normal(n), (Q2 + Q2.T) / 2, rng.standard_normal(n))
    tr = dca.run(inst, 3 * rng.standard_normal(n), dca.StopRule(max_iter=N))
    assume(tr.N_performed == N)
    D = tr[1].f - inst.f_star
    assert tr.min_step(N) <= bounds.iterate_gap_bound_corrected(inst.params1, inst.params2, N, D) + 1e-9


def test_shifted_iterate_bound_matches_simplified():
    for N in (1, 2, 5):
        assert bounds.iterate_gap_bound_corrected(F(2.0, INF), F(0.5, INF), N) == pytest.approx(
            bounds.iterate_gap_simplified(2.0, 0.5, N - 1), rel=1e-12)
