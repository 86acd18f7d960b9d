import numpy as np
import pytest

from shadowbounds import simlab
from shadowbounds.causal import (ArmTables, arm_tables, ate_bounds, ate_bounds_equal_response, ate_bounds_lp,
                                 ate_set_expansion, ate_shadow_bounds, sign_test_single_crossing,
                                 sign_test_worst_case)
from shadowbounds.lp_core import ContractError
from shadowbounds.set_expansion import ExpansionConfig
from shadowbounds.tables import Records, StratumTable, joint_tables

from conftest import random_dgp


def marg(alpha):
    alpha = np.asarray(alpha, dtype=float)
    return StratumTable(alpha[None, :], [1.0 - alpha.sum()])


def test_fully_observed_difference():
    arms = ArmTables(marg([0, 0, 0.5, 0.5, 0]), marg([0, 0, 0, 1.0, 0]))
    assert ate_bounds(arms).as_tuple() == pytest.approx((0.5, 0.5))


def test_control_all_missing():
    arms = ArmTables(marg([0, 0, 0, 0, 0]), marg([0, 0, 0, 1.0, 0]))
    assert ate_bounds(arms).as_tuple() == pytest.approx((-1.0, 3.0))


def test_joint_lp_separable(rng):
    for _ in range(50):
        a0 = rng.dirichlet(np.ones(3)) * rng.uniform(0.1, 1)
        a1 = rng.dirichlet(np.ones(3)) * rng.uniform(0.1, 1)
        arms = ArmTables(marg(a0), marg(a1))
        np.testing.assert_allclose(ate_bounds_lp(arms).as_tuple(), ate_bounds(arms).as_tuple(), atol=1e-8)


def test_shadow_full_rank_point(rng):
    t0 = joint_tables(*random_dgp(rng, 3, 3))
    t1 = joint_tables(*random_dgp(rng, 3, 3))
    iv = ate_shadow_bounds(ArmTables(t0, t1))
    assert iv.width == pytest.approx(0.0, abs=1e-8)


def test_shadow_independent_prediction_matches_worst_case(rng):
    def indep():
        p = rng.dirichlet(np.ones(4))
        P = np.tile(rng.dirichlet(np.ones(3)), (4, 1))
        return joint_tables(p, P, rng.uniform(0.1, 0.9, 4))
    arms = ArmTables(indep(), indep())
    np.testing.assert_allclose(ate_shadow_bounds(arms).as_tuple(), ate_bounds(arms).as_tuple(), atol=1e-8)


def test_shadow_two_by_two_hand_solve():
    A0, b0 = np.array([[0.2, 0.1], [0.1, 0.2]]), np.array([0.15, 0.25])
    A1, b1 = np.array([[0.3, 0.1], [0.1, 0.2]]), np.array([0.2, 0.1])
    y = np.arange(1, 3)
    th0 = y @ (A0.sum(0) * (np.linalg.solve(A0, b0) + 1))
    th1 = y @ (A1.sum(0) * (np.linalg.solve(A1, b1) + 1))
    iv = ate_shadow_bounds(ArmTables(StratumTable(A0, b0), StratumTable(A1, b1)))
    assert iv.lo == pytest.approx(th1 - th0, abs=1e-10)
    assert iv.hi == pytest.approx(th1 - th0, abs=1e-10)


def test_shadow_refuses_empirical():
    t = StratumTable([[0.5, 0.5]], [0.0], n=4, empirical=True)
    with pytest.raises(ContractError):
        ate_shadow_bounds(ArmTables(t, t))


def test_set_expansion_zero_margin_matches_shadow(rng):
    for _ in range(10):
        arms = ArmTables(joint_tables(*random_dgp(rng, 3, 2, 0.2, 0.9)),
                         joint_tables(*random_dgp(rng, 3, 2, 0.2, 0.9)))
        np.testing.assert_allclose(ate_set_expansion(arms, ExpansionConfig(kappa_value=0.0)).as_tuple(),
                                   ate_shadow_bounds(arms).as_tuple(), atol=1e-7)


def _two_arm_records(n, seed):
    base = simlab.point_id_dgp().resolve()
    p1 = 0.5 * base.p_y + 0.5 * np.eye(5)[3]  # mean 3.5
    d1 = simlab.ResolvedDgp(5, p1, base.f_given_y, base.pi, n, seed)
    r0 = simlab.sample(base, n, simlab.rng_for(seed, 9, 0))
    r1 = simlab.sample(d1, n, simlab.rng_for(seed, 9, 1))
    rec = Records(np.r_[r0.r, r1.r], np.r_[r0.y, r1.y], np.r_[r0.f, r1.f],
                  d=np.r_[np.zeros(n, int), np.ones(n, int)])
    oracle = ate_shadow_bounds(ArmTables(joint_tables(base.p_y, base.f_given_y, base.pi),
                                         joint_tables(p1, base.f_given_y, base.pi)))
    return rec, oracle


def test_set_expansion_large_sample():
    rec, oracle = _two_arm_records(10**6, 4)
    assert oracle.lo == pytest.approx(0.5, abs=1e-8)
    iv = ate_set_expansion(arm_tables(rec, 5, 5))
    assert iv.contains(0.5)
    assert iv.width <= oracle.width + 0.1


def test_set_expansion_deterministic():
    rec, _ = _two_arm_records(2000, 8)
    rec2, _ = _two_arm_records(2000, 8)
    assert ate_set_expansion(arm_tables(rec, 5, 5)).as_tuple() == ate_set_expansion(arm_tables(rec2, 5, 5)).as_tuple()


def test_worst_case_sign_test_examples():
    arms = ArmTables(marg([0, 0.5, 0.5, 0, 0]), marg([0, 0, 0.5, 0.5, 0]))
    res = sign_test_worst_case(arms)
    assert res.holds and res.margin == pytest.approx(1.0)
    arms = ArmTables(marg([0, 0, 0.7, 0, 0]), marg([0, 0, 0.9, 0.1, 0]))
    res = sign_test_worst_case(arms)
    assert res.meta["right"] == pytest.approx(1.5)
    assert not res.holds and res.margin == pytest.approx(-0.5)
    assert ate_bounds(arms).lo < 0


def test_worst_case_boundary():
    # choose P(R(0)=0) so the margin is exactly zero
    a1 = np.array([0, 0, 0, 0.2, 0.8])  # sum y alpha1 = 4.8
    # with a0 = (1 - q) e1 the margin is 4.8 - (1 - q) - 5 q
    q = (4.8 - 1.0) / 4.0
    a0 = np.array([1 - q, 0, 0, 0, 0])
    arms = ArmTables(marg(a0), marg(a1))
    res = sign_test_worst_case(arms)
    assert res.margin == pytest.approx(0.0, abs=1e-12)
    assert ate_bounds(arms).lo >= -1e-8


def test_single_crossing_examples():
    a0 = np.full(5, 0.15)
    same = sign_test_single_crossing(ArmTables(marg(a0), marg(a0)), assume_equal_response=True)
    assert same.applicable and same.holds
    assert ate_bounds(ArmTables(marg(a0), marg(a0))).contains(0.0)
    diff = np.array([-0.05, -0.02, 0, 0.03, 0.04])
    arms = ArmTables(marg(a0), marg(a0 + diff))
    res = sign_test_single_crossing(arms, assume_equal_response=True)
    assert res.crossing_point == 3 and res.holds
    assert res.margin == pytest.approx(np.arange(-2, 3) @ diff)
    assert ate_bounds_equal_response(arms).lo >= res.margin - 1e-9
    unasserted = sign_test_single_crossing(arms)
    assert unasserted.applicable and not unasserted.holds
    bad = sign_test_single_crossing(ArmTables(marg(a0), marg(a0 + [0.05, -0.05, 0, 0, 0])))
    assert not bad.applicable


def test_arm_tables_needs_treatment():
    with pytest.raises(ContractError):
        arm_tables(Records(r=[1], y=[2], f=[1]), 5, 5)
