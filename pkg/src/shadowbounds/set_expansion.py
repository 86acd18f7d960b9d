"""Finite-sample set-expansion estimator of the shadow-variable bounds.

With estimated tables the system ``A w = beta`` is usually infeasible. Each
stratum therefore gets an infeasibility slack

    m_hat = min_{0 <= w <= C} || A_hat w - beta_hat ||_inf

and the bounds are the optimal values of the shadow objective over the tube
``|| A_hat w - beta_hat ||_inf <= m_hat + kappa_n / sqrt(n)``, ``0 <= w <= C``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lp_core
from .bounds_base import Interval
from .bounds_shadow import aggregate_shadow_bounds, shadow_objective
from .lp_core import ContractError
from .tables import PopulationTables, StratumTable, estimate_tables

KAPPA_RULES = ("constant", "log", "loglog")
BIND_TOL = 1e-9


@dataclass
class ExpansionConfig:
    """Tuning of the set-expansion estimator.

    ``C`` bounds every ``w(y)``, i.e. assumes ``pi(y) >= 1/(C+1)``.
    ``kappa_rule`` picks ``kappa_n``: a constant, ``log n`` or
    ``log log n`` (the latter falls back to 1 for ``n <= e**2``).
    """

    C: float = 50.0
    kappa_rule: str = "constant"
    kappa_value: float = 0.5
    g: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (isinstance(self.C, (int, float)) and math.isfinite(self.C) and self.C > 0):
            raise ContractError(f"C must be a positive number, got {self.C!r}")
        if self.kappa_rule not in KAPPA_RULES:
            raise ContractError(f"kappa_rule must be one of {KAPPA_RULES}, got {self.kappa_rule!r}")
        if self.kappa_rule == "constant" and not self.kappa_value >= 0:
            raise ContractError("constant kappa must be nonnegative")

    def kappa(self, n: int) -> float:
        if self.kappa_rule == "constant":
            return float(self.kappa_value)
        if self.kappa_rule == "log":
            return math.log(n) if n > 1 else 0.0
        if n <= math.e ** 2:
            return 1.0
        return math.log(math.log(n))

    def margin(self, n: int) -> float:
        """Expansion margin ``kappa_n / sqrt(n)``; 0 for population tables (``n = 0``)."""
        if n <= 0:
            return 0.0
        return self.kappa(n) / math.sqrt(n)


@dataclass
class StratumExpansion:
    stratum: object
    slack: float
    margin: float
    interval: Interval
    lp_status: tuple
    binds_C: bool = False


@dataclass
class ExpansionReport:
    per_stratum: list
    aggregate: Interval
    meta: dict = field(default_factory=dict)


def slack(table: StratumTable, C: float) -> float:
    """Infeasibility slack ``m_hat`` of the stratum's shadow system."""
    value, _ = lp_core.min_inf_norm_residual(table.alpha, table.beta, C)
    return value


def relaxed_problem(table: StratumTable, radius: float, C: float, g=None, sense: str = "max"):
    """Band-form LP over the expanded feasible set of one stratum."""
    coef, const = shadow_objective(table, g)
    prob = lp_core.LpProblem(
        c=coef, A=table.alpha, l=table.beta - radius, u=table.beta + radius,
        lo=np.zeros(table.M), hi=np.full(table.M, float(C)), sense=sense,
    )
    return prob, const


def estimate_stratum(table: StratumTable, cfg: ExpansionConfig, stratum=None) -> StratumExpansion:
    if table.p_r0 == 0.0:
        # nothing missing: the stratum mean is observed, no band to widen
        coef, const = shadow_objective(table, cfg.g)
        iv = Interval(const, const, "set_expansion", {"slack": 0.0, "margin": 0.0})
        return StratumExpansion(stratum, 0.0, 0.0, iv, ("observed", "observed"), False)
    m_hat = slack(table, cfg.C)
    margin = cfg.margin(table.n)
    radius = m_hat + margin
    ends = []
    statuses = []
    binds = False
    for sense in ("min", "max"):
        prob, const = relaxed_problem(table, radius, cfg.C, cfg.g, sense)
        sol = lp_core.solve(prob)
        statuses.append(sol.status)
        if sol.status != lp_core.OPTIMAL:
            # m_hat is the residual of an in-box point, so this is a solver fault
            raise lp_core.SolverStalled(f"relaxed LP returned {sol.status}", sol.point, sol.iterations)
        binds = binds or bool(np.any(sol.point >= cfg.C - BIND_TOL))
        ends.append(sol.value + const)
    lo, hi = ends
    if hi < lo:
        lo = hi = 0.5 * (lo + hi)
    iv = Interval(lo, hi, "set_expansion", {"slack": m_hat, "margin": margin})
    return StratumExpansion(stratum, m_hat, margin, iv, tuple(statuses), binds)


def estimate(pop: PopulationTables, cfg: Optional[ExpansionConfig] = None) -> ExpansionReport:
    """Set-expansion bounds aggregated over strata with the empirical weights."""
    cfg = cfg or ExpansionConfig()
    per = []
    lo = hi = 0.0
    for sid, t, wt in pop.strata:
        if t.empirical and t.n < 1:
            raise ContractError(f"stratum {sid!r} has no records")
        se = estimate_stratum(t, cfg, sid)
        per.append(se)
        lo += wt * se.interval.lo
        hi += wt * se.interval.hi
    agg = Interval(lo, hi, "set_expansion", {
        "C": cfg.C, "kappa_rule": cfg.kappa_rule, "kappa_value": cfg.kappa_value,
        "binds_C": any(s.binds_C for s in per),
    })
    return ExpansionReport(per, agg)


def convergence_study(dgp, cfg: ExpansionConfig, n_grid, reps: int, seed: int):
    """Monte Carlo endpoint errors of the estimator against the population bounds.

    For each ``n`` in ``n_grid`` draws ``reps`` samples from ``dgp`` (with
    replication streams keyed on ``(seed, n index, rep)``), estimates the
    bounds and records ``|lo_hat - lo|`` and ``|hi_hat - hi|``.

    Returns
    -------
    dict
        ``n``, ``err_lo``, ``err_hi``, ``err`` (mean of both endpoints) as
        lists over the grid, plus ``slope``, the least-squares slope of
        ``log err`` on ``log n``, and the oracle interval.
    """
    from . import simlab

    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ContractError("n_grid must be strictly increasing")
    if reps < 1:
        raise ContractError("reps must be >= 1")
    resolved = dgp.resolve() if hasattr(dgp, "resolve") else dgp
    oracle = aggregate_shadow_bounds(simlab.exact_population(resolved)).aggregate
    M_F = resolved.f_given_y.shape[1]
    err_lo, err_hi = [], []
    for k, n in enumerate(n_grid):
        lo_e = np.empty(reps)
        hi_e = np.empty(reps)
        for rep in range(reps):
            rec = simlab.sample(resolved, n, simlab.rng_for(seed, simlab.STREAM_CONVERGENCE, k, rep))
            iv = estimate(estimate_tables(rec, resolved.M, M_F), cfg).aggregate
            lo_e[rep] = abs(iv.lo - oracle.lo)
            hi_e[rep] = abs(iv.hi - oracle.hi)
        err_lo.append(float(lo_e.mean()))
        err_hi.append(float(hi_e.mean()))
    err = [(a + b) / 2 for a, b in zip(err_lo, err_hi)]
    slope = loglog_slope(n_grid, err)
    return {"n": n_grid, "err_lo": err_lo, "err_hi": err_hi, "err": err, "slope": slope,
            "oracle": oracle.as_tuple()}


def loglog_slope(x, y) -> float:
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.maximum(np.asarray(y, dtype=float), 1e-300))
    if lx.size < 2:
        return float("nan")
    return float(np.polyfit(lx, ly, 1)[0])
