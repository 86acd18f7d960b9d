import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from shadowbounds import simlab
from shadowbounds.bounds_base import base_bounds
from shadowbounds.estimators import (AggregatedLPEstimator, PointEstimator, SetExpansionEstimator,
                                     ShadowBoundsEstimator)
from shadowbounds.lp_core import ContractError
from shadowbounds.set_expansion import ExpansionConfig, estimate
from shadowbounds.tables import estimate_tables


@pytest.fixture(scope="module")
def records():
    return simlab.generate(simlab.partial_id_dgp(n=3000, seed=8))


def test_params_round_trip():
    est = SetExpansionEstimator(C=20.0, kappa=0.7)
    assert est.get_params() == {"C": 20.0, "M": 5, "M_F": None, "kappa": 0.7, "kappa_rule": "constant"}
    assert clone(est).set_params(kappa=1.0).kappa == 1.0


def test_set_expansion_matches_function(records):
    est = SetExpansionEstimator().fit(records)
    want = estimate(estimate_tables(records, 5, 5), ExpansionConfig()).aggregate
    assert est.transform() == want.as_tuple()
    assert est.predict() == want.midpoint


def test_aggregated_lp(records):
    est = AggregatedLPEstimator().fit(records)
    assert est.interval_.as_tuple() == base_bounds(estimate_tables(records, 5, 5)).as_tuple()


def test_shadow_estimator_exact_counts():
    # records whose empirical table is an exact consistent table
    y = np.array([1, 2, 1, 2])
    rec = {"r": [1, 1, 0, 0], "y": [1, 2, np.nan, np.nan], "f": [1, 2, 1, 2]}
    est = ShadowBoundsEstimator(M=2, force=True).fit(rec)
    assert est.interval_.lo == pytest.approx(y.mean())
    with pytest.raises(ContractError):
        ShadowBoundsEstimator(M=2).fit(rec)


def test_point_estimator(records):
    assert PointEstimator("cca").fit(records).predict() == pytest.approx(records.y[records.r == 1].mean())
    with pytest.raises(ContractError):
        PointEstimator("oracle").fit(records)


def test_not_fitted():
    with pytest.raises(NotFittedError):
        SetExpansionEstimator().predict()


def test_requires_prediction():
    with pytest.raises(ContractError):
        SetExpansionEstimator().fit({"r": [1, 0], "y": [2, np.nan]})
