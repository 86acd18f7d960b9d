"""Average-treatment-effect bounds for randomized experiments with MNAR outcomes.

Each arm carries its own unknown response mechanism. Without further
assumptions the two arms' feasible sets are independent, so the joint LP is
separable and the ATE bounds are differences of per-arm mean bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lp_core
from .bounds_base import DataInconsistencyError, Interval, base_bounds, outcome_weights
from .lp_core import ContractError
from .set_expansion import ExpansionConfig, slack
from .tables import StratumTable, check_records, estimate_tables

CROSSING_TOL = 1e-12


@dataclass
class ArmTables:
    """Per-arm tables (covariates pooled). ``arm0`` is control, ``arm1`` treated."""

    arm0: StratumTable
    arm1: StratumTable
    n0: int = 0
    n1: int = 0

    def __post_init__(self):
        if self.arm0.alpha.shape != self.arm1.alpha.shape:
            raise ContractError("arms must share M and M_F")

    @property
    def M(self):
        return self.arm0.M

    @property
    def empirical(self):
        return self.arm0.empirical or self.arm1.empirical

    def arm(self, d):
        return self.arm1 if d else self.arm0


@dataclass
class SignTestResult:
    applicable: bool
    holds: bool
    margin: float
    crossing_point: Optional[int] = None
    meta: dict = field(default_factory=dict)


def arm_tables(records, M: int, M_F: Optional[int] = None, smoothing: float = 0.0) -> ArmTables:
    """Estimate pooled tables separately in each arm of a randomized experiment."""
    rec = check_records(records)
    if rec.d is None:
        raise ContractError("records need a treatment column d")
    out = []
    for arm in (0, 1):
        sub = rec.subset(rec.d == arm)
        if len(sub) == 0:
            raise ContractError(f"arm {arm} has no records")
        sub.stratum = None
        sub.d = None
        out.append(estimate_tables(sub, M, M_F, smoothing).pooled())
    return ArmTables(out[0], out[1], out[0].n, out[1].n)


def _joint_lp(arms, blocks, g, sense):
    """Solve the two-arm LP with arm-1 minus arm-0 objective.

    ``blocks[d] = (A_d, l_d, u_d, hi_d)`` describe arm ``d``'s constraint rows
    and box; the objective is ``sum_y g(y) colsum_d(y) (w_d(y) + 1)`` signed by arm.
    """
    M = arms.M
    gy = outcome_weights(M, g)
    c_parts = []
    const = 0.0
    for d, sgn in ((0, -1.0), (1, 1.0)):
        colsum = blocks[d][0].sum(axis=0)
        c_parts.append(sgn * gy * colsum)
        const += sgn * float(gy @ colsum)
    A0, l0, u0, hi0 = blocks[0]
    A1, l1, u1, hi1 = blocks[1]
    A = np.block([[A0, np.zeros((A0.shape[0], M))], [np.zeros((A1.shape[0], M)), A1]])
    prob = lp_core.LpProblem(c=np.concatenate(c_parts), A=A, l=np.r_[l0, l1], u=np.r_[u0, u1],
                             lo=np.zeros(2 * M), hi=np.r_[hi0, hi1], sense=sense)
    return lp_core.solve(prob), const


def ate_bounds(arms: ArmTables, g=None) -> Interval:
    """ATE bounds with no shadow variable (closed form, separable)."""
    b0 = base_bounds(arms.arm0, g)
    b1 = base_bounds(arms.arm1, g)
    return Interval(b1.lo - b0.hi, b1.hi - b0.lo, "ate",
                    {"arm0": b0.as_tuple(), "arm1": b1.as_tuple()})


def ate_bounds_lp(arms: ArmTables, g=None) -> Interval:
    """Same bounds from the joint two-arm LP (cross-check of separability)."""
    if arms.arm0.p_r1 <= 0 or arms.arm1.p_r1 <= 0:
        return ate_bounds(arms, g)
    blocks = {}
    for d in (0, 1):
        a = arms.arm(d).alpha_marginal[None, :]
        rhs = [arms.arm(d).p_r0]
        blocks[d] = (a, rhs, rhs, np.full(arms.M, np.inf))
    ends = []
    for sense in ("min", "max"):
        sol, const = _joint_lp(arms, blocks, g, sense)
        if sol.status == lp_core.INFEASIBLE:
            raise DataInconsistencyError("arm tables admit no response mechanism")
        ends.append(sol.value + const)
    return Interval(ends[0], ends[1], "ate", {"solver": "lp"})


def ate_shadow_bounds(arms: ArmTables, g=None) -> Interval:
    """ATE bounds with per-arm shadow constraints ``A_d w_d = beta_d`` (population tables)."""
    if arms.empirical:
        raise ContractError("empirical arm tables given; use ate_set_expansion")
    blocks = {}
    for d in (0, 1):
        t = arms.arm(d)
        blocks[d] = (t.alpha, t.beta, t.beta, np.full(arms.M, np.inf))
    ends = []
    for sense in ("min", "max"):
        sol, const = _joint_lp(arms, blocks, g, sense)
        if sol.status == lp_core.INFEASIBLE:
            raise DataInconsistencyError("shadow constraints infeasible in at least one arm")
        ends.append(sol.value + const)
    return Interval(ends[0], ends[1], "ate_shadow")


def ate_set_expansion(arms: ArmTables, cfg: Optional[ExpansionConfig] = None) -> Interval:
    """Set-expansion ATE bounds: each arm gets its own slack and margin."""
    cfg = cfg or ExpansionConfig()
    blocks = {}
    meta = {}
    for d, n in ((0, arms.n0), (1, arms.n1)):
        t = arms.arm(d)
        m_hat = slack(t, cfg.C)
        radius = m_hat + cfg.margin(n if t.empirical else 0)
        blocks[d] = (t.alpha, t.beta - radius, t.beta + radius, np.full(arms.M, float(cfg.C)))
        meta[f"arm{d}"] = {"slack": m_hat, "radius": radius}
    ends = []
    for sense in ("min", "max"):
        sol, const = _joint_lp(arms, blocks, cfg.g, sense)
        if sol.status != lp_core.OPTIMAL:
            raise lp_core.SolverStalled(f"relaxed ATE LP returned {sol.status}", sol.point, sol.iterations)
        ends.append(sol.value + const)
    lo, hi = ends
    if hi < lo:
        lo = hi = 0.5 * (lo + hi)
    return Interval(lo, hi, "ate_set_expansion", meta)


def ate_bounds_equal_response(arms: ArmTables, g=None) -> Interval:
    """ATE bounds when both arms share one response mechanism ``pi(y)``.

    One ``w`` serves both arms, so the feasible set is
    ``{w >= 0 : sum_y alpha_d(y) (w(y) + 1) = 1, d = 0, 1}``.
    """
    M = arms.M
    gy = outcome_weights(M, g)
    a0 = arms.arm0.alpha_marginal
    a1 = arms.arm1.alpha_marginal
    c = gy * (a1 - a0)
    const = float(c.sum())
    ends = []
    for sense in ("min", "max"):
        prob = lp_core.LpProblem(c=c, A=np.vstack([a0, a1]), l=[arms.arm0.p_r0, arms.arm1.p_r0],
                                 u=[arms.arm0.p_r0, arms.arm1.p_r0], lo=np.zeros(M),
                                 hi=np.full(M, np.inf), sense=sense)
        sol = lp_core.solve(prob)
        if sol.status == lp_core.INFEASIBLE:
            raise DataInconsistencyError("no common response mechanism fits both arms")
        ends.append(sol.value + const)
    return Interval(ends[0], ends[1], "ate", {"assumption": "equal response mechanism"})


def sign_test_worst_case(arms: ArmTables) -> SignTestResult:
    """Nonnegative ATE whenever the observed advantage beats ``M * P(R(0)=0)``."""
    y = np.arange(1, arms.M + 1)
    left = float(y @ (arms.arm1.alpha_marginal - arms.arm0.alpha_marginal))
    right = arms.M * arms.arm0.p_r0
    margin = left - right
    return SignTestResult(True, margin >= 0.0, margin, None, {"left": left, "right": right})


def sign_test_single_crossing(arms: ArmTables, assume_equal_response: bool = False,
                              tol: float = CROSSING_TOL) -> SignTestResult:
    """Single-crossing test for a nonnegative ATE.

    Looks for the smallest ``y0`` with ``alpha_1(y) <= alpha_0(y)`` below
    ``y0`` and ``alpha_1(y) >= alpha_0(y)`` from ``y0`` on. The conclusion
    also needs equal response mechanisms across arms, which data cannot
    verify; ``holds`` is therefore only set when the caller asserts it via
    ``assume_equal_response``. ``margin`` is ``sum_y (y - y0) (alpha_1 -
    alpha_0)(y)``, a lower bound on the ATE under that assumption.
    """
    diff = arms.arm1.alpha_marginal - arms.arm0.alpha_marginal
    M = arms.M
    y0 = None
    for cand in range(1, M + 1):
        below = diff[: cand - 1]
        above = diff[cand - 1:]
        if np.all(below <= tol) and np.all(above >= -tol):
            y0 = cand
            break
    a0 = arms.arm0.alpha_marginal
    a1 = arms.arm1.alpha_marginal
    shift = float(np.abs(a1 / max(a1.sum(), 1e-300) - a0 / max(a0.sum(), 1e-300)).sum())
    meta = {"assumed_equal_response": bool(assume_equal_response), "observed_profile_l1": shift}
    if y0 is None:
        return SignTestResult(False, False, float("nan"), None, meta)
    margin = float((np.arange(1, M + 1) - y0) @ diff)
    return SignTestResult(True, bool(assume_equal_response), margin, y0, meta)
