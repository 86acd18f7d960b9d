"""Sharp bounds without a shadow variable."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp_core
from .lp_core import ContractError
from .tables import PopulationTables, StratumTable


class DataInconsistencyError(ValueError):
    """Observed-data tables admit no response mechanism."""


@dataclass
class Interval:
    """Identification interval ``[lo, hi]`` with provenance."""

    lo: float
    hi: float
    method: str = "base"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lo = float(self.lo)
        self.hi = float(self.hi)
        if self.lo > self.hi + 1e-12:
            raise ValueError(f"interval lower end {self.lo} exceeds upper end {self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, value, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def as_tuple(self):
        return (self.lo, self.hi)


def outcome_weights(M: int, g=None) -> np.ndarray:
    """Objective weights ``g(y)`` for ``y = 1..M`` (identity by default)."""
    if g is None:
        return np.arange(1, M + 1, dtype=float)
    g = np.asarray(g, dtype=float).ravel()
    if g.size != M:
        raise ContractError(f"g has length {g.size}, expected {M}")
    return g


def _as_table(table):
    if isinstance(table, PopulationTables):
        return table.pooled()
    if isinstance(table, StratumTable):
        return table
    raise ContractError(f"expected StratumTable or PopulationTables, got {type(table).__name__}")


def base_bounds(table, g=None) -> Interval:
    """Closed-form sharp bounds on ``E[g(Y)]`` with no extra information.

    The observed part ``sum_y g(y) P(Y=y, R=1)`` is completed by putting
    all missing mass on the smallest or largest ``g`` value. When nothing is
    observed the observed part is 0 and the interval is the full range.
    """
    t = _as_table(table)
    gy = outcome_weights(t.M, g)
    observed = float(gy @ t.alpha_marginal)
    p0 = t.p_r0
    return Interval(observed + gy.min() * p0, observed + gy.max() * p0, "base",
                    {"p_r0": p0, "observed_part": observed})


def base_bounds_lp(table, g=None) -> Interval:
    """Same bounds by solving the pair of LPs over ``w(y) = 1/pi(y) - 1``.

    Maximizes/minimizes ``sum_y g(y) alpha(y) (w(y) + 1)`` subject to
    ``sum_y alpha(y) (w(y) + 1) = 1`` and ``w >= 0``.
    """
    t = _as_table(table)
    gy = outcome_weights(t.M, g)
    a = t.alpha_marginal
    if t.p_r1 <= 0.0:
        return Interval(gy.min(), gy.max(), "base", {"degenerate": "nothing observed"})
    const = float(gy @ a)
    ends = []
    for sense in ("min", "max"):
        prob = lp_core.LpProblem(
            c=gy * a, A=a[None, :], l=[1.0 - a.sum()], u=[1.0 - a.sum()],
            lo=np.zeros(t.M), hi=np.full(t.M, np.inf), sense=sense,
        )
        sol = lp_core.solve(prob)
        if sol.status == lp_core.INFEASIBLE:
            raise DataInconsistencyError("observed mass exceeds one; no response mechanism fits")
        ends.append(sol.value + const)
    return Interval(ends[0], ends[1], "base", {"solver": "lp"})


def stratified_bounds(pop: PopulationTables, g=None) -> Interval:
    """Per-stratum closed-form bounds combined with the stratum weights."""
    w = pop.weights
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
        raise ContractError("stratum weights must be nonnegative and sum to 1")
    per = [(sid, base_bounds(t, g)) for sid, t, _ in pop.strata]
    lo = float(sum(wi * iv.lo for (_, iv), wi in zip(per, w)))
    hi = float(sum(wi * iv.hi for (_, iv), wi in zip(per, w)))
    return Interval(lo, hi, "stratified", {"per_stratum": [(sid, iv.as_tuple()) for sid, iv in per],
                                           "weights": w.tolist()})
