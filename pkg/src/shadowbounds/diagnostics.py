"""Completeness diagnostics for the prediction as a shadow variable.

``H[f, y] = P(F=f, Y=y)`` does not depend on the missingness mechanism and
``B[f, y] = P(Y=y | F=f, R=1)`` is what the observed data reveal. The
prediction is complete exactly when ``B`` has full column rank, and under
positivity that is equivalent to ``H`` having full column rank with

    kappa(B) <= (max_f p_F / min_f p_F) * (max pi / min pi) * kappa(H)

where ``p_F(f) = P(F=f, R=1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp_core import ContractError
from .tables import PopulationTables, StratumTable, estimate_tables

MAX_DIM = 64
JACOBI_TOL = 1e-15
MAX_SWEEPS = 100


def svd_values(A) -> np.ndarray:
    """Singular values by one-sided (Hestenes) Jacobi rotations, descending."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or max(A.shape) > MAX_DIM:
        raise ContractError(f"svd_values handles matrices up to {MAX_DIM}x{MAX_DIM}, got {A.shape}")
    if A.shape[0] < A.shape[1]:
        A = A.T
    U = A.copy()
    n = U.shape[1]
    for _ in range(MAX_SWEEPS):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                ui = U[:, i]
                uj = U[:, j]
                a = ui @ ui
                b = uj @ uj
                c = ui @ uj
                if abs(c) < 1e-300 or abs(c) <= JACOBI_TOL * np.sqrt(a * b):
                    continue
                rotated = True
                zeta = (b - a) / (2.0 * c)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                new_i = cs * ui - sn * uj
                new_j = sn * ui + cs * uj
                U[:, i] = new_i
                U[:, j] = new_j
        if not rotated:
            break
    return np.sort(np.sqrt(np.einsum("ij,ij->j", U, U)))[::-1]


def rank_tolerance(shape, sigma_max: float) -> float:
    return max(shape) * sigma_max * 1e-12


def numerical_rank(A, sv=None) -> int:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    sv = svd_values(A) if sv is None else sv
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rank_tolerance(A.shape, sv[0])))


def condition_number(A, sv=None) -> float:
    """``sigma_max / sigma_min``; ``inf`` when the matrix is numerically rank deficient."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    sv = svd_values(A) if sv is None else sv
    if sv.size == 0 or sv[-1] <= rank_tolerance(A.shape, sv[0] if sv.size else 0.0):
        return float("inf")
    return float(sv[0] / sv[-1])


def hoffman_constant(A) -> float:
    """``sqrt(m) / sigma_min^+(A)``: scales the sup-norm residual into a distance bound."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    sv = svd_values(A)
    r = numerical_rank(A, sv)
    if r == 0:
        return float("inf")
    return float(np.sqrt(A.shape[0]) / sv[r - 1])


@dataclass
class CompletenessReport:
    B: np.ndarray
    H: Optional[np.ndarray]
    sigma_min_B: float
    kappa_B: float
    rank_B: int
    sigma_min_H: Optional[float] = None
    kappa_H: Optional[float] = None
    rank_H: Optional[int] = None
    complete: bool = False
    bound_holds: Optional[bool] = None
    bound_rhs: Optional[float] = None
    flags: list = field(default_factory=list)

    def to_dict(self):
        fin = lambda v: None if v is None else (v if np.isfinite(v) else "inf")
        return {
            "rank_B": self.rank_B, "sigma_min_B": self.sigma_min_B, "kappa_B": fin(self.kappa_B),
            "rank_H": self.rank_H, "sigma_min_H": self.sigma_min_H, "kappa_H": fin(self.kappa_H),
            "complete": self.complete, "bound_holds": self.bound_holds,
            "bound_rhs": fin(self.bound_rhs), "flags": list(self.flags),
        }


def _sv_summary(X):
    sv = svd_values(X)
    rank = numerical_rank(X, sv)
    return float(sv[-1]), condition_number(X, sv), rank


def joint_matrix(y, f, M: int, M_F: int) -> np.ndarray:
    """Empirical ``P(F=f, Y=y)`` from fully labeled data."""
    y = np.asarray(y, dtype=np.int64)
    f = np.asarray(f, dtype=np.int64)
    H = np.zeros((M_F, M))
    np.add.at(H, (f - 1, y - 1), 1.0)
    return H / y.size


def completeness_report(source, H=None, pi_known=None, labeled=None,
                        M: Optional[int] = None, M_F: Optional[int] = None) -> CompletenessReport:
    """Rank and conditioning of ``B`` (and ``H`` when available).

    Parameters
    ----------
    source : StratumTable, PopulationTables or records
        Observed-data tables (records are pooled into one table; ``M`` and
        ``M_F`` are then required).
    H : array_like, optional
        Known joint ``P(F, Y)`` (simulation mode).
    pi_known : array_like, optional
        True response probabilities. With an exact table and no ``H`` this
        recovers ``H = alpha / pi``; it also enables the condition-number
        inequality check.
    labeled : tuple (y, f), optional
        Fully labeled calibration data from which ``H`` is estimated.
    """
    if isinstance(source, PopulationTables):
        table = source.pooled()
    elif isinstance(source, StratumTable):
        table = source
    else:
        if M is None or M_F is None:
            raise ContractError("M and M_F are required when passing records")
        table = estimate_tables(source, M, M_F).pooled()
    flags = []
    row_mass = table.alpha.sum(axis=1)
    keep = row_mass > 0
    if not keep.all():
        flags.append(f"dropped prediction levels with no observed outcome: {(np.flatnonzero(~keep) + 1).tolist()}")
    B = table.alpha[keep] / row_mass[keep, None]
    if B.size == 0:
        raise ContractError("no observed outcomes to build B")
    s_B, k_B, r_B = _sv_summary(B)

    pi = None if pi_known is None else np.asarray(pi_known, dtype=float)
    if H is None and labeled is not None:
        H = joint_matrix(labeled[0], labeled[1], table.M, table.M_F)
    if H is None and pi is not None and not table.empirical:
        H = table.alpha / pi[None, :]
    rep = CompletenessReport(B=B, H=None, sigma_min_B=s_B, kappa_B=k_B, rank_B=r_B,
                             complete=r_B == table.M, flags=flags)
    if H is not None:
        H = np.atleast_2d(np.asarray(H, dtype=float))
        rep.H = H
        rep.sigma_min_H, rep.kappa_H, rep.rank_H = _sv_summary(H)
    if pi is not None and rep.kappa_H is not None and keep.all():
        p_f = row_mass
        rhs = (p_f.max() / p_f.min()) * (pi.max() / pi.min()) * rep.kappa_H
        rep.bound_rhs = rhs
        if np.isinf(rhs):
            rep.bound_holds = True
        else:
            rep.bound_holds = bool(k_B <= rhs * (1 + 1e-8))
    return rep
