import math

import numpy as np
import pytest

from dcapep import dca
from dcapep.instances import (
    InstanceError,
    audit_oracles,
    instance_from_config,
    load_instance,
    make_nonsmooth_counterexample,
    make_pl_quadratic_instance,
    make_quadratic_instance,
    make_tightness_instance,
)


def test_quadratic_one_step():
    inst = make_quadratic_instance([[2.0]], [0.0], [[0.0]], [1.0])
    assert inst.f_star == pytest.approx(-0.25)
    tr = dca.run(inst, [0.0], dca.StopRule(epsilon=1e-12))
    assert tr[2].x[0] == 0.5
    assert tr[2].g1[0] == tr[2].g2[0] == 1.0
    assert tr[2].gap == 0.0


def test_degenerate_quadratic_rejected():
    with pytest.raises(InstanceError, match="unbounded"):
        make_quadratic_instance(np.eye(2), np.zeros(2), np.eye(2), np.zeros(2))


def test_identity_quadratic_fixed_point():
    inst = make_quadratic_instance(np.eye(2), np.zeros(2), np.zeros((2, 2)), np.zeros(2))
    assert inst.f_star == 0.0
    tr = dca.run(inst, np.zeros(2), dca.StopRule(max_iter=3))
    assert tr.N_performed == 0 and tr.min_gap() == 0.0


@pytest.mark.parametrize("Q", [[[1.0, 2.0], [0.0, 1.0]], [[-1.0, 0.0], [0.0, 1.0]]])
def test_bad_matrices_rejected(Q):
    with pytest.raises(InstanceError):
        make_quadratic_instance(Q, [0, 0], np.zeros((2, 2)), [0, 0])


def test_f_star_above_minimum_rejected():
    with pytest.raises(InstanceError, match="exceeds"):
        make_quadratic_instance([[2.0]], [0.0], [[0.0]], [1.0], f_star=0.0)


def test_quadratic_oracles_are_interpolable(rng):
    A = rng.standard_normal((3, 3))
    Q1 = A @ A.T + 3 * np.eye(3)
    B = rng.standard_normal((3, 3))
    Q2 = 0.2 * B @ B.T
    inst = make_quadratic_instance(Q1, rng.standard_normal(3), Q2, rng.standard_normal(3))
    assert audit_oracles(inst, rng.standard_normal((20, 3))).ok


def test_tightness_instance_examples():
    inst = make_tightness_instance(8.0, 3)
    assert inst.meta["U"] == 0.25
    assert inst.f(inst.start_point) == pytest.approx(1.0, abs=1e-14)
    tr = dca.run(inst, rule=dca.StopRule(max_iter=3))
    assert [it.x[0] for it in tr.iterates] == [4.0, 3.0, 2.0, 1.0]
    assert np.allclose(tr.gaps, 2.0, atol=1e-12)
    with pytest.raises(InstanceError, match="U"):
        make_tightness_instance(1.0, 0)


@pytest.mark.parametrize("L1,N", [(8.0, 3), (2.0, 5), (0.5, 7)])
def test_tightness_f1_convex_continuous_and_interpolable(L1, N):
    inst = make_tightness_instance(L1, N)
    U = inst.meta["U"]
    bps = sorted({0.0} | {float(i) for i in range(N + 2)} | {i - U for i in range(1, N + 2)})
    h = 1e-9
    for b in bps:
        lo, glo = inst.f1_oracle(np.array([b - h]))
        hi, ghi = inst.f1_oracle(np.array([b + h]))
        assert abs(lo - hi) < 1e-6
        assert glo[0] <= ghi[0] + 1e-9
    xs = np.linspace(-1, N + 2, 400)[:, None]
    assert audit_oracles(inst, xs).f1.ok
    assert audit_oracles(inst, xs).f2.ok


@pytest.mark.parametrize("L1,N", [(8.0, 3), (2.0, 2)])
def test_tightness_minimum_on_initial_segment(L1, N):
    inst = make_tightness_instance(L1, N)
    U = inst.meta["U"]
    xs = np.arange(0.0, N + 1 + 1e-12, 1e-4)
    f = np.array([inst.f(np.array([x])) for x in xs])
    assert f.min() == pytest.approx(0.0, abs=1e-8)
    arg = xs[f <= 1e-8]
    assert arg.max() <= 1 - U + 1e-4


def test_counterexample_run():
    inst = make_nonsmooth_counterexample()
    tr = dca.run(inst, [1.0], dca.StopRule(epsilon=0.5, max_iter=30))
    assert tr.stop_reason == dca.StopReason.MAX_ITER
    assert np.allclose(tr.gaps, 1.0, atol=1e-12, rtol=0)
    assert [it.x[0] for it in tr.iterates[:5]] == [1.0, 0.5, 0.25, 0.125, 0.0625]
    T = tr.T_values
    assert np.all(np.diff(T) <= 0) and T[-1] < 1e-8
    assert inst.f(np.array([-1.0])) == math.inf
    with pytest.raises(InstanceError):
        make_nonsmooth_counterexample(1)


def test_pl_instance():
    inst = make_pl_quadratic_instance(2.0, 0.5)
    assert inst.meta["eta"] == 1.5 and inst.f_star == 0.0
    with pytest.raises(InstanceError):
        make_pl_quadratic_instance(1.0, 2.0)


def test_config_round_trip(tmp_path):
    cfg = {"family": "quadratic", "dimension": 1,
           "params": {"Q1": [[2.0]], "b1": [0.0], "Q2": [[0.0]], "b2": [1.0]}, "start_point": [0.0]}
    p = tmp_path / "inst.json"
    import json

    p.write_text(json.dumps(cfg))
    inst = load_instance(p)
    assert inst.dimension == 1 and inst.start_point[0] == 0.0
    assert instance_from_config({"family": "tightness", "params": {"L1": 8, "N": 3}}).meta["U"] == 0.25
    assert instance_from_config({"family": "pl-quadratic", "params": {"L1": 2, "L2": "inf"}}).meta["eta"] == 2.0
    with pytest.raises(InstanceError):
        instance_from_config({"family": "nope"})
    with pytest.raises(InstanceError):
        instance_from_config({**cfg, "dimension": 2})
