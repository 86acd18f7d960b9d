import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shadowbounds import simlab
from shadowbounds.bounds_shadow import aggregate_shadow_bounds, shadow_bounds_stratum
from shadowbounds.lp_core import ContractError, min_inf_norm_residual
from shadowbounds.set_expansion import (ExpansionConfig, convergence_study, estimate, estimate_stratum,
                                        loglog_slope, slack)
from shadowbounds.tables import StratumTable, estimate_tables, joint_tables

from conftest import random_exact_table


def test_slack_zero_on_exact_tables(rng):
    for _ in range(50):
        t = random_exact_table(rng, 4, 4)
        assert slack(t, 50.0) <= 1e-9


def test_slack_absorbs_inflation():
    value, w = min_inf_norm_residual([[0.5]], [0.1 + 0.1], 50.0)
    assert value == 0.0
    assert w[0] == pytest.approx(0.4)


def test_slack_inconsistent_pair():
    # two identical rows asking for 0.15 and 0.45: best compromise is 0.3, slack 0.15
    t = StratumTable([[0.2, 0.0], [0.2, 0.0]], [0.15, 0.45])
    assert slack(t, 50.0) == pytest.approx(0.15, abs=1e-12)


def test_zero_margin_matches_population(rng):
    cfg = ExpansionConfig(kappa_value=0.0)
    checked = 0
    for _ in range(30):
        t = random_exact_table(rng, 3, 3)
        pop_iv = shadow_bounds_stratum(t)
        se = estimate_stratum(t, cfg)
        if se.binds_C:
            continue
        np.testing.assert_allclose(se.interval.as_tuple(), pop_iv.as_tuple(), atol=1e-7)
        checked += 1
    assert checked > 10


def test_large_sample_partial_id():
    d = simlab.partial_id_dgp(n=10**6, seed=3)
    iv = estimate(estimate_tables(simlab.generate(d), 5, 5)).aggregate
    oracle = aggregate_shadow_bounds(simlab.exact_population(d)).aggregate
    assert iv.contains(3.0)
    assert abs(iv.lo - oracle.lo) <= 0.1 and abs(iv.hi - oracle.hi) <= 0.1


def test_large_sample_point_id():
    d = simlab.point_id_dgp(n=10**6, seed=3)
    iv = estimate(estimate_tables(simlab.generate(d), 5, 5)).aggregate
    assert iv.width <= 0.1
    assert iv.contains(3.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_interval_nested_in_kappa(seed):
    d = simlab.partial_id_dgp(n=2000, seed=seed)
    pop = estimate_tables(simlab.generate(d), 5, 5)
    small = estimate(pop, ExpansionConfig(kappa_value=0.5)).aggregate
    big = estimate(pop, ExpansionConfig(kappa_value=1.0)).aggregate
    assert big.lo <= small.lo + 1e-9 and small.hi <= big.hi + 1e-9


def test_kappa_rules():
    assert ExpansionConfig().kappa(100) == 0.5
    assert ExpansionConfig(kappa_rule="log").kappa(100) == pytest.approx(math.log(100))
    assert ExpansionConfig(kappa_rule="loglog").kappa(5) == 1.0
    assert ExpansionConfig(kappa_rule="loglog").kappa(1000) == pytest.approx(math.log(math.log(1000)))
    assert ExpansionConfig().margin(0) == 0.0
    assert ExpansionConfig().margin(400) == pytest.approx(0.025)


@pytest.mark.parametrize("kwargs", [{"C": 0}, {"C": -1.0}, {"C": float("inf")}, {"kappa_rule": "sqrt"},
                                    {"kappa_value": -0.1}])
def test_config_validation(kwargs):
    with pytest.raises(ContractError):
        ExpansionConfig(**kwargs)


def test_binds_c_flag():
    # pi(1) = 0.01 means w(1) = 99 > C = 50
    t = joint_tables([0.5, 0.5], np.eye(2), [0.01, 0.5])
    se = estimate_stratum(t, ExpansionConfig(kappa_value=0.0))
    assert se.binds_C


def test_convergence_study_deterministic():
    a = convergence_study(simlab.point_id_dgp(), ExpansionConfig(), [200, 400], 3, seed=5)
    b = convergence_study(simlab.point_id_dgp(), ExpansionConfig(), [200, 400], 3, seed=5)
    assert a == b
    with pytest.raises(ContractError):
        convergence_study(simlab.point_id_dgp(), ExpansionConfig(), [400, 200], 3, seed=5)


def test_loglog_slope():
    n = np.array([10.0, 100.0, 1000.0])
    assert loglog_slope(n, n ** -0.5) == pytest.approx(-0.5)


def test_point_id_rate_example():
    res = convergence_study(simlab.point_id_dgp(), ExpansionConfig(), [10**3, 10**4, 10**5], 20, seed=11)
    assert -0.65 <= res["slope"] <= -0.35


def test_partial_id_log_kappa_decay_factor():
    # the expected ratio is about 3.07, so enough reps to keep the noise well below the margin
    res = convergence_study(simlab.partial_id_dgp(), ExpansionConfig(kappa_rule="log"),
                            [10**3, 10**5], 100, seed=11)
    assert res["err"][0] >= 3 * res["err"][-1], f"errors {res['err']}"
