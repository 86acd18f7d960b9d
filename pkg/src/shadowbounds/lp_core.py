"""
Dense linear-programming kernel used by every bound computation.

Problems are stated in "band" form::

    maximize / minimize   c @ w
    subject to            l <= A @ w <= u
                          lo <= w <= hi

and solved with a two-phase bounded-variable primal simplex. Each band row
gets one bounded logical variable ``s_i = a_i @ w`` so two-sided rows never
need to be split. Pricing is Dantzig's rule; after ``d * m`` consecutive
degenerate pivots the solver switches to Bland's rule for the rest of the
solve, which guarantees termination.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-10
OPT_TOL = 1e-10
MAX_ITER = 10_000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class ContractError(ValueError):
    """Input violates a documented precondition."""


class SolverStalled(RuntimeError):
    """Simplex exceeded its iteration budget.

    Attributes
    ----------
    point : ndarray or None
        Best primal-feasible point reached, if phase 1 had finished.
    iterations : int
    """

    def __init__(self, message, point=None, iterations=0):
        super().__init__(message)
        self.point = point
        self.iterations = iterations


@dataclass(frozen=True)
class LpProblem:
    """Dense LP ``opt c @ w  s.t.  l <= A w <= u,  lo <= w <= hi``.

    Equality rows use ``l == u``. Bounds may be infinite; ``c`` and ``A``
    must be finite.
    """

    c: np.ndarray
    A: np.ndarray
    l: np.ndarray
    u: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    sense: str = "max"

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        d = c.size
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, d)
        if A.ndim != 2 or A.shape[1] != d:
            raise ContractError(f"A has shape {A.shape}, expected (m, {d})")
        m = A.shape[0]
        l = _vec(self.l, m, "l")
        u = _vec(self.u, m, "u")
        lo = _vec(self.lo, d, "lo")
        hi = _vec(self.hi, d, "hi")
        if d < 1:
            raise ContractError("problem needs at least one variable")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A))):
            raise ContractError("objective and constraint matrix must be finite")
        if np.any(np.isnan(l)) or np.any(np.isnan(u)) or np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ContractError("bounds must not be NaN")
        if np.any(l > u):
            raise ContractError("band lower side exceeds upper side")
        if np.any(lo > hi):
            raise ContractError("box lower bound exceeds upper bound")
        if self.sense not in ("max", "min"):
            raise ContractError(f"sense must be 'max' or 'min', got {self.sense!r}")
        for name, val in (("c", c), ("A", A), ("l", l), ("u", u), ("lo", lo), ("hi", hi)):
            object.__setattr__(self, name, val)

    @property
    def shape(self):
        return self.A.shape


def _vec(v, n, name):
    out = np.asarray(v, dtype=float)
    if out.ndim == 0:
        out = np.full(n, float(out))
    out = out.ravel()
    if out.size != n:
        raise ContractError(f"{name} has length {out.size}, expected {n}")
    return out


@dataclass
class LpSolution:
    status: str
    value: float
    point: np.ndarray
    iterations: int = 0
    phase1_residual: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == OPTIMAL


def solve(problem: LpProblem, max_iter: int = MAX_ITER) -> LpSolution:
    """Solve a band-form LP.

    Parameters
    ----------
    problem : LpProblem
    max_iter : int
        Combined phase-1 and phase-2 pivot budget.

    Returns
    -------
    LpSolution
        ``status`` is one of ``"optimal"``, ``"infeasible"``, ``"unbounded"``.
        Only the optimal value is contractual; among tied optimal vertices
        the returned point depends on the pivot sequence.

    Raises
    ------
    SolverStalled
        When the iteration budget runs out.
    """
    p = problem
    m, d = p.A.shape
    n = d + m
    # structural w, then logical s with A w - s = 0
    A = np.hstack([p.A, -np.eye(m)])
    b = np.zeros(m)
    lo = np.concatenate([p.lo, p.l])
    hi = np.concatenate([p.hi, p.u])
    sign = -1.0 if p.sense == "max" else 1.0
    cost = np.concatenate([sign * p.c, np.zeros(m)])

    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))

    if m == 0:
        return _box_only(p, x)

    # phase 1: one artificial per row, signed so it starts nonnegative
    resid = b - A @ x
    art_sign = np.where(resid >= 0, 1.0, -1.0)
    A1 = np.hstack([A, np.diag(art_sign)])
    lo1 = np.concatenate([lo, np.zeros(m)])
    hi1 = np.concatenate([hi, np.full(m, np.inf)])
    x1 = np.concatenate([x, np.abs(resid)])
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))

    status, iters = _simplex(A1, b, cost1, lo1, hi1, x1, basis, max_iter, d * m)
    if status == "stalled":
        raise SolverStalled("phase 1 exceeded the iteration budget", None, iters)
    infeas = float(np.sum(x1[n:]))
    if infeas > FEAS_TOL:
        return LpSolution(INFEASIBLE, np.nan, x1[:d].copy(), iters, infeas)

    # phase 2: artificials pinned at zero
    hi1[n:] = 0.0
    x1[n:] = np.clip(x1[n:], 0.0, 0.0)
    cost2 = np.concatenate([cost, np.zeros(m)])
    status, it2 = _simplex(A1, b, cost2, lo1, hi1, x1, basis, max_iter - iters, d * m)
    iters += it2
    w = x1[:d].copy()
    if status == "stalled":
        raise SolverStalled("phase 2 exceeded the iteration budget", w, iters)
    if status == UNBOUNDED:
        value = np.inf if p.sense == "max" else -np.inf
        return LpSolution(UNBOUNDED, value, w, iters, infeas)
    return LpSolution(OPTIMAL, float(p.c @ w), w, iters, infeas)


def _box_only(p, x):
    w = x[: p.c.size].copy()
    for j, cj in enumerate(p.c):
        want_hi = (cj > 0) == (p.sense == "max")
        if cj == 0:
            continue
        target = p.hi[j] if want_hi else p.lo[j]
        if not np.isfinite(target):
            value = np.inf if p.sense == "max" else -np.inf
            return LpSolution(UNBOUNDED, value, w, 0)
        w[j] = target
    return LpSolution(OPTIMAL, float(p.c @ w), w, 0)


def _simplex(A, b, cost, lo, hi, x, basis, max_iter, degenerate_limit):
    """Bounded-variable primal simplex minimizing ``cost @ x``.

    ``x`` and ``basis`` are updated in place. ``x`` must satisfy ``A x = b``
    with every basic variable inside its bounds and every nonbasic variable
    at a finite bound (or at zero when free).
    """
    m, n = A.shape
    is_basic = np.zeros(n, dtype=bool)
    is_basic[basis] = True
    fixed = lo == hi
    bland = False
    degenerate_run = 0

    for it in range(max_iter):
        B = A[:, basis]
        nonbasic = ~is_basic
        x[basis] = np.linalg.solve(B, b - A[:, nonbasic] @ x[nonbasic])
        y = np.linalg.solve(B.T, cost[basis])
        red = cost - A.T @ y

        at_lo = np.isfinite(lo) & (x <= lo)
        at_hi = np.isfinite(hi) & (x >= hi)
        can_up = nonbasic & ~fixed & ~at_hi & (red < -OPT_TOL)
        can_down = nonbasic & ~fixed & ~at_lo & (red > OPT_TOL)
        candidates = np.flatnonzero(can_up | can_down)
        if candidates.size == 0:
            return OPTIMAL, it

        if bland:
            j = int(candidates[0])
        else:
            j = int(candidates[np.argmax(np.abs(red[candidates]))])
        delta = 1.0 if can_up[j] else -1.0

        col = np.linalg.solve(B, A[:, j])
        rate = delta * col  # basic values move by -theta * rate
        theta = hi[j] - lo[j]
        leave = -1
        leave_to_hi = False
        best_piv = 0.0
        for i in range(m):
            a = rate[i]
            k = basis[i]
            if a > PIVOT_TOL and np.isfinite(lo[k]):
                lim = max((x[k] - lo[k]) / a, 0.0)
                to_hi = False
            elif a < -PIVOT_TOL and np.isfinite(hi[k]):
                lim = max((hi[k] - x[k]) / -a, 0.0)
                to_hi = True
            else:
                continue
            if lim < theta - 1e-15:
                take = True
            elif lim <= theta + 1e-15 and leave >= 0:
                # tie: Bland keeps the smallest index, Dantzig the steadier pivot
                take = k < basis[leave] if bland else abs(a) > best_piv
            else:
                take = False
            if take:
                theta, leave, leave_to_hi, best_piv = lim, i, to_hi, abs(a)

        if not np.isfinite(theta):
            return UNBOUNDED, it

        if theta <= 1e-14:
            degenerate_run += 1
            if degenerate_run > degenerate_limit:
                bland = True
        else:
            degenerate_run = 0

        x[j] += delta * theta
        x[basis] -= theta * rate
        if leave < 0:
            # bound flip, basis unchanged
            x[j] = hi[j] if delta > 0 else lo[j]
            continue
        k = basis[leave]
        x[k] = hi[k] if leave_to_hi else lo[k]
        is_basic[k] = False
        is_basic[j] = True
        basis[leave] = j

    return "stalled", max_iter


def check_feasible(problem: LpProblem, w, tol: float = FEAS_TOL) -> bool:
    """Independent feasibility re-check of a candidate point."""
    w = np.asarray(w, dtype=float)
    aw = problem.A @ w
    return bool(
        np.all(aw >= problem.l - tol)
        and np.all(aw <= problem.u + tol)
        and np.all(w >= problem.lo - tol)
        and np.all(w <= problem.hi + tol)
    )


def min_inf_norm_residual(A, b, box_hi: float):
    """Smallest sup-norm residual ``min_{0 <= w <= C} ||A w - b||_inf``.

    Solved as an LP in ``(w, t)``: minimize ``t`` subject to
    ``A w - t <= b``, ``A w + t >= b``, ``0 <= w <= C``, ``t >= 0``.

    Returns
    -------
    slack : float
        Always ``>= 0``.
    point : ndarray
        A minimizing ``w``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    m, d = A.shape
    if b.size != m:
        raise ContractError(f"b has length {b.size}, expected {m}")
    if not box_hi > 0:
        raise ContractError("box bound C must be positive")
    ones = np.ones((m, 1))
    band = np.vstack([np.hstack([A, -ones]), np.hstack([A, ones])])
    prob = LpProblem(
        c=np.r_[np.zeros(d), 1.0],
        A=band,
        l=np.r_[np.full(m, -np.inf), b],
        u=np.r_[b, np.full(m, np.inf)],
        lo=np.zeros(d + 1),
        hi=np.r_[np.full(d, float(box_hi)), np.inf],
        sense="min",
    )
    sol = solve(prob)
    w = np.clip(sol.point[:d], 0.0, box_hi)
    # residual of the returned point itself, so ``w`` certifies the slack
    slack = float(np.max(np.abs(A @ w - b))) if m else 0.0
    return slack, w
