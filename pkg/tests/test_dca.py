import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcapep import dca
from dcapep.instances import make_nonsmooth_counterexample, make_quadratic_instance, make_tightness_instance


def _xsq_minus_x():
    return make_quadratic_instance([[2.0]], [0.0], [[0.0]], [1.0])


def test_gap_rule_stops_after_one_step():
    tr = dca.run(_xsq_minus_x(), [0.0], dca.StopRule("gradient_gap", 1e-12))
    assert tr.stop_reason == dca.StopReason.GAP_TOL
    assert tr.N_performed == 1 and tr[2].x[0] == 0.5 and tr[2].gap == 0.0


def test_termination_measure_hand_value():
    tr = dca.run(_xsq_minus_x(), [0.0], dca.StopRule(max_iter=1))
    assert dca.termination_measure(tr, 1) == pytest.approx(0.25)
    assert tr[2].T == pytest.approx(0.25)
    with pytest.raises(IndexError):
        dca.termination_measure(tr, 2)


def test_fixed_point_has_zero_T():
    inst = make_quadratic_instance([[1.0]], [0.0], [[0.0]], [0.0])
    tr = dca.run(inst, [0.0], dca.StopRule("model_decrease", 1e-12, max_iter=3))
    assert tr.T_values[0] == 0.0 and tr.stop_reason == dca.StopReason.T_TOL


def test_tightness_gap_rule_never_triggers():
    inst = make_tightness_instance(8.0, 3)
    tr = dca.run(inst, [4.0], dca.StopRule(epsilon=1.9, max_iter=3))
    assert tr.stop_reason == dca.StopReason.MAX_ITER
    assert tr.min_gap() == pytest.approx(2.0, abs=1e-12)


def test_tightness_T_matches_reevaluation():
    inst = make_tightness_instance(8.0, 3)
    tr = dca.run(inst, rule=dca.StopRule(max_iter=3))
    for k in range(1, 4):
        a, b = tr[k].x, tr[k + 1].x
        f1a, _ = inst.f1_oracle(a)
        f1b, _ = inst.f1_oracle(b)
        _, g2a = inst.f2_oracle(a)
        assert tr[k + 1].T == pytest.approx(f1a - f1b - float(g2a @ (a - b)), abs=1e-12)


def test_counterexample_stop_rules():
    inst = make_nonsmooth_counterexample()
    tr = dca.run(inst, [1.0], dca.StopRule("gradient_gap", 0.5, max_iter=40))
    assert tr.stop_reason == dca.StopReason.MAX_ITER and np.allclose(tr.gaps, 1.0)
    tr = dca.run(inst, [1.0], dca.StopRule("model_decrease", 1e-3, max_iter=40))
    assert tr.stop_reason == dca.StopReason.T_TOL and tr.N_performed < 40


def test_bad_rules_and_start():
    with pytest.raises(ValueError):
        dca.StopRule(epsilon=0.0)
    with pytest.raises(ValueError):
        dca.StopRule(max_iter=0)
    with pytest.raises(ValueError):
        dca.run(_xsq_minus_x(), [0.0, 1.0])


def test_trace_csv(tmp_path):
    tr = dca.run(_xsq_minus_x(), [0.0], dca.StopRule(max_iter=1))
    text = tr.to_csv(tmp_path / "t.csv")
    lines = text.splitlines()
    assert lines[0] == "k,x_1,gap,T,f1,f2,f"
    assert lines[2].startswith("2,0.5,0,0.25,")
    assert (tmp_path / "t.csv").read_text() == text


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_quadratic_runs_descend_and_replay(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    Q2 = A @ A.T
    B = rng.standard_normal((n, n))
    Q1 = Q2 + B @ B.T + 0.1 * np.eye(n)
    inst = make_quadratic_instance(Q1, rng.standard_normal(n), Q2, rng.standard_normal(n))
    x1 = rng.standard_normal(n)
    tr = dca.run(inst, x1, dca.StopRule(max_iter=8))
    again = dca.run(inst, x1, dca.StopRule(max_iter=8))
    assert tr.to_csv() == again.to_csv()
    scale = 1 + abs(tr[1].f)
    for k in range(1, tr.N_performed + 1):
        a, b = tr[k], tr[k + 1]
        assert np.array_equal(b.g1, a.g2)
        assert b.T >= -1e-10 * scale
        assert a.f - b.f >= b.T - 1e-10 * scale
