"""Partial-identification bounds for a mean outcome under missing-not-at-random
outcomes, using a model prediction as a shadow variable."""
from .bounds_base import DataInconsistencyError, Interval, base_bounds, base_bounds_lp, stratified_bounds
from .bounds_shadow import aggregate_shadow_bounds, aggregation_gap_lower_bounds, shadow_bounds_stratum
from .causal import ate_bounds, ate_set_expansion, sign_test_single_crossing, sign_test_worst_case
from .diagnostics import completeness_report
from .estimators import AggregatedLPEstimator, PointEstimator, SetExpansionEstimator, ShadowBoundsEstimator
from .lp_core import ContractError, SolverStalled
from .set_expansion import ExpansionConfig, estimate
from .tables import DataError, PopulationTables, Records, StratumTable, UnitRecord, estimate_tables

__version__ = "0.1.0"

__all__ = [
    "AggregatedLPEstimator", "ContractError", "DataError", "DataInconsistencyError", "ExpansionConfig",
    "Interval", "PointEstimator", "PopulationTables", "Records", "SetExpansionEstimator",
    "ShadowBoundsEstimator", "SolverStalled", "StratumTable", "UnitRecord", "aggregate_shadow_bounds",
    "aggregation_gap_lower_bounds", "ate_bounds", "ate_set_expansion", "base_bounds", "base_bounds_lp",
    "completeness_report", "estimate", "estimate_tables", "shadow_bounds_stratum", "sign_test_single_crossing",
    "sign_test_worst_case", "stratified_bounds",
]
