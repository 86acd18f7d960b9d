"""Bounds that use an always-observed prediction as a weak shadow variable.

Within a stratum the prediction ``F`` is assumed independent of the response
flag given the outcome. Every level ``f`` then yields one linear restriction
``sum_y alpha(f, y) w(y) = beta(f)`` on ``w(y) = 1/pi(y) - 1``, which
tightens the single aggregated restriction used by the base bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp_core
from .bounds_base import DataInconsistencyError, Interval, outcome_weights
from .lp_core import ContractError
from .tables import PopulationTables, StratumTable

POINT_ID_WIDTH = 1e-8


@dataclass
class ShadowBoundsReport:
    per_stratum: list
    aggregate: Interval
    gap_lb_upper: float
    gap_lb_lower: float
    point_identified: bool
    meta: dict = field(default_factory=dict)


def shadow_objective(table: StratumTable, g=None):
    """Linear objective ``(coef, const)`` with value ``coef @ w + const``."""
    gy = outcome_weights(table.M, g)
    colsum = table.alpha.sum(axis=0)
    return gy * colsum, float(gy @ colsum)


def shadow_bounds_stratum(table: StratumTable, g=None, force: bool = False) -> Interval:
    """Sharp bounds for one stratum from ``A w = beta, w >= 0``.

    Parameters
    ----------
    table : StratumTable
        Population (exact) table. Empirical tables are refused unless
        ``force=True``: sampling noise generically makes the equality system
        infeasible, and :func:`shadowbounds.set_expansion.estimate` is the
        supported route for estimated tables.
    g : array_like, optional
        Outcome weights, identity by default.
    force : bool

    Raises
    ------
    DataInconsistencyError
        If no nonnegative ``w`` solves the system.
    """
    if table.empirical and not force:
        raise ContractError("empirical table given; use set_expansion.estimate or pass force=True")
    coef, const = shadow_objective(table, g)
    M = table.M
    ends = []
    statuses = []
    for sense in ("min", "max"):
        prob = lp_core.LpProblem(c=coef, A=table.alpha, l=table.beta, u=table.beta,
                                 lo=np.zeros(M), hi=np.full(M, np.inf), sense=sense)
        sol = lp_core.solve(prob)
        statuses.append(sol.status)
        if sol.status == lp_core.INFEASIBLE:
            raise DataInconsistencyError(
                f"shadow constraints infeasible (phase-1 residual {sol.phase1_residual:.3g})")
        ends.append(sol.value + const)
    return Interval(ends[0], ends[1], "shadow", {"lp_status": tuple(statuses)})


def aggregation_gap_lower_bounds(pop: PopulationTables):
    """Guaranteed improvement of the shadow bounds over the base bounds.

    Returns ``(gap_lb_upper, gap_lb_lower, flags)``. The first is a lower
    bound on ``theta_max - theta_max_shadow``, the second on
    ``theta_min_shadow - theta_min``; each sums, over strata,
    ``P(X=x) * (1'beta/2) * || beta/1'beta - a_col/1'a_col ||_1`` with the
    last (resp. first) column of ``alpha``. Strata without missing mass
    contribute 0; a zero extreme column contributes 0 and is flagged.
    Valid for the identity objective only.
    """
    upper = 0.0
    lower = 0.0
    flags = []
    for sid, t, wt in pop.strata:
        b = t.p_r0
        if b <= 0.0:
            continue
        bn = t.beta / b
        for col, name in ((t.M - 1, "upper"), (0, "lower")):
            a = t.alpha[:, col]
            s = a.sum()
            if s <= 0.0:
                flags.append((sid, name, "zero extreme column"))
                continue
            term = wt * 0.5 * b * float(np.abs(bn - a / s).sum())
            if name == "upper":
                upper += term
            else:
                lower += term
    return upper, lower, flags


def aggregate_shadow_bounds(pop: PopulationTables, g=None, force: bool = False) -> ShadowBoundsReport:
    """Per-stratum shadow bounds combined with the stratum weights."""
    per = []
    lo = hi = 0.0
    for sid, t, wt in pop.strata:
        iv = shadow_bounds_stratum(t, g, force=force)
        per.append((sid, iv, iv.meta.get("lp_status")))
        lo += wt * iv.lo
        hi += wt * iv.hi
    if g is None:
        gu, gl, flags = aggregation_gap_lower_bounds(pop)
    else:
        gu, gl, flags = 0.0, 0.0, [("*", "both", "gap bounds need the identity objective")]
    point = all(iv.width <= POINT_ID_WIDTH for _, iv, _ in per)
    agg = Interval(lo, hi, "shadow", {"weights": pop.weights.tolist()})
    return ShadowBoundsReport(per, agg, gu, gl, point, {"gap_flags": flags})
