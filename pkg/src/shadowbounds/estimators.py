"""scikit-learn style wrappers around the bound and point estimators.

``fit`` takes records (anything :func:`check_records` accepts) and stores
the fitted interval or estimate in trailing-underscore attributes.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baselines import ESTIMATORS
from .bounds_base import stratified_bounds
from .bounds_shadow import aggregate_shadow_bounds
from .lp_core import ContractError
from .set_expansion import ExpansionConfig, estimate
from .tables import check_records, estimate_tables


class _IntervalEstimator(BaseEstimator):
    def predict(self, X=None):
        """Midpoint of the fitted interval."""
        check_is_fitted(self, "interval_")
        return self.interval_.midpoint

    def transform(self, X=None):
        """Fitted ``(lo, hi)`` pair."""
        check_is_fitted(self, "interval_")
        return self.interval_.as_tuple()

    def _tables(self, X):
        rec = check_records(X)
        self.n_records_ = len(rec)
        M_F = self.M if self.M_F is None else self.M_F
        self.tables_ = estimate_tables(rec, self.M, M_F)
        return self.tables_


class SetExpansionEstimator(_IntervalEstimator):
    """Finite-sample shadow-variable bounds on ``E[Y]``.

    Parameters
    ----------
    M : int
        Number of outcome levels.
    M_F : int, optional
        Number of prediction levels (defaults to ``M``).
    C : float
        Box bound on ``w = 1/pi - 1``.
    kappa_rule : {"constant", "log", "loglog"}
    kappa : float
        Value used by the constant rule.
    """

    def __init__(self, M=5, M_F=None, C=50.0, kappa_rule="constant", kappa=0.5):
        self.M = M
        self.M_F = M_F
        self.C = C
        self.kappa_rule = kappa_rule
        self.kappa = kappa

    def fit(self, X, y=None):
        cfg = ExpansionConfig(C=self.C, kappa_rule=self.kappa_rule, kappa_value=self.kappa)
        rec = check_records(X, require_f=True)
        self.report_ = estimate(self._tables(rec), cfg)
        self.interval_ = self.report_.aggregate
        return self


class AggregatedLPEstimator(_IntervalEstimator):
    """Worst-case bounds ignoring the prediction (pooled over strata)."""

    def __init__(self, M=5, M_F=None):
        self.M = M
        self.M_F = M_F

    def fit(self, X, y=None):
        self.interval_ = stratified_bounds(self._tables(X))
        return self


class ShadowBoundsEstimator(_IntervalEstimator):
    """Population shadow-variable bounds; for exact tables or simulation checks.

    Empirical tables are usually infeasible, so fitting records requires
    ``force=True`` and may raise :class:`DataInconsistencyError`.
    """

    def __init__(self, M=5, M_F=None, force=False):
        self.M = M
        self.M_F = M_F
        self.force = force

    def fit(self, X, y=None):
        self.report_ = aggregate_shadow_bounds(self._tables(X), force=self.force)
        self.interval_ = self.report_.aggregate
        return self


class PointEstimator(BaseEstimator):
    """Any of the comparison estimators, selected by name."""

    def __init__(self, method="ppi"):
        self.method = method

    def fit(self, X, y=None):
        if self.method not in ESTIMATORS:
            raise ContractError(f"unknown method {self.method!r}; choose from {sorted(ESTIMATORS)}")
        self.estimate_ = ESTIMATORS[self.method](X)
        return self

    def predict(self, X=None):
        check_is_fitted(self, "estimate_")
        return self.estimate_.value
