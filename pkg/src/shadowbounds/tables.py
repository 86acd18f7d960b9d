"""Unit records and the probability tables every bound consumes."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

import numpy as np

from .lp_core import ContractError

TABLE_TOL = 1e-12


class DataError(ValueError):
    """Record content falls outside the declared supports or schema."""


@dataclass(frozen=True)
class UnitRecord:
    """One unit: response flag, outcome (iff observed), prediction, stratum, arm."""

    r: int
    y: Optional[int] = None
    f: Optional[int] = None
    stratum: Hashable = None
    d: Optional[int] = None

    def __post_init__(self):
        if self.r not in (0, 1):
            raise DataError(f"r must be 0 or 1, got {self.r!r}")
        if self.r == 1 and self.y is None:
            raise DataError("observed record (r=1) needs an outcome y")
        if self.r == 0 and self.y is not None:
            raise DataError("missing record (r=0) must not carry an outcome")


@dataclass
class Records:
    """Columnar record store.

    ``y`` uses 0 for "missing"; observed outcomes are ``1..M``. ``f``,
    ``stratum`` and ``d`` are ``None`` when the column is absent.
    """

    r: np.ndarray
    y: np.ndarray
    f: Optional[np.ndarray] = None
    stratum: Optional[np.ndarray] = None
    d: Optional[np.ndarray] = None

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=np.int64).ravel()
        self.y = np.asarray(self.y, dtype=np.int64).ravel()
        n = self.r.size
        if self.y.size != n:
            raise DataError("r and y lengths differ")
        if not np.all((self.r == 0) | (self.r == 1)):
            raise DataError("r must contain only 0 and 1")
        bad = np.flatnonzero((self.r == 1) != (self.y > 0))
        if bad.size:
            raise DataError(f"record {int(bad[0])}: y must be present iff r = 1")
        if self.f is not None:
            self.f = np.asarray(self.f, dtype=np.int64).ravel()
            if self.f.size != n:
                raise DataError("f length differs from r")
        if self.stratum is not None:
            self.stratum = np.asarray(self.stratum).ravel()
            if self.stratum.size != n:
                raise DataError("stratum length differs from r")
        if self.d is not None:
            self.d = np.asarray(self.d, dtype=np.int64).ravel()
            if self.d.size != n or not np.all((self.d == 0) | (self.d == 1)):
                raise DataError("d must be a 0/1 column of matching length")

    def __len__(self):
        return self.r.size

    @property
    def has_f(self):
        return self.f is not None

    @classmethod
    def from_units(cls, units: Sequence[UnitRecord]) -> "Records":
        units = list(units)
        if not units:
            return cls(np.zeros(0), np.zeros(0))
        r = [u.r for u in units]
        y = [u.y if u.y is not None else 0 for u in units]
        f = _column(units, "f")
        s = _column(units, "stratum")
        d = _column(units, "d")
        return cls(r, y, f, None if s is None else np.array(s, dtype=object), d)

    def to_units(self) -> list:
        out = []
        for i in range(len(self)):
            out.append(
                UnitRecord(
                    r=int(self.r[i]),
                    y=int(self.y[i]) if self.r[i] else None,
                    f=None if self.f is None else int(self.f[i]),
                    stratum=None if self.stratum is None else self.stratum[i],
                    d=None if self.d is None else int(self.d[i]),
                )
            )
        return out

    def subset(self, mask) -> "Records":
        mask = np.asarray(mask)
        pick = lambda a: None if a is None else a[mask]
        return Records(self.r[mask], self.y[mask], pick(self.f), pick(self.stratum), pick(self.d))


def _column(units, name):
    vals = [getattr(u, name) for u in units]
    present = [v is not None for v in vals]
    if not any(present):
        return None
    if not all(present):
        raise DataError(f"column {name!r} is present on some records but not all")
    return vals


def check_records(X, require_f: bool = False) -> Records:
    """Coerce supported inputs into :class:`Records`.

    Accepts a ``Records`` instance, a sequence of :class:`UnitRecord`, a
    mapping or pandas DataFrame with columns ``r``, ``y`` and optionally
    ``f``, ``stratum``, ``d`` (missing ``y`` as 0, NaN or None), or a 2-D
    array whose columns are ``(f, r, y)``.
    """
    if isinstance(X, Records):
        rec = X
    elif isinstance(X, (list, tuple)) and (len(X) == 0 or isinstance(X[0], UnitRecord)):
        rec = Records.from_units(X)
    elif hasattr(X, "columns") or isinstance(X, dict):
        cols = {k: np.asarray(X[k]) for k in (X.columns if hasattr(X, "columns") else X.keys())}
        unknown = set(cols) - {"r", "y", "f", "stratum", "d"}
        if unknown:
            raise DataError(f"unknown columns: {sorted(unknown)}")
        if "r" not in cols or "y" not in cols:
            raise DataError("columns 'r' and 'y' are required")
        y = np.asarray(cols["y"], dtype=float)
        y = np.where(np.isnan(y), 0, y).astype(np.int64)
        rec = Records(cols["r"], y, cols.get("f"), cols.get("stratum"), cols.get("d"))
    else:
        arr = np.asarray(X)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise DataError("array input must have columns (f, r, y)")
        y = np.nan_to_num(arr[:, 2].astype(float), nan=0.0).astype(np.int64)
        rec = Records(arr[:, 1], y, arr[:, 0])
    if len(rec) == 0:
        raise DataError("no records")
    if require_f and rec.f is None:
        raise ContractError("prediction column f is required by this method")
    return rec


@dataclass(frozen=True)
class StratumTable:
    """Joint probabilities for one covariate stratum.

    ``alpha[f-1, y-1] = P(R=1, F=f, Y=y | x)`` and
    ``beta[f-1] = P(R=0, F=f | x)``. Tables built without a prediction
    column have a single ``f`` row.
    """

    alpha: np.ndarray
    beta: np.ndarray
    n: int = 0
    empirical: bool = False

    def __post_init__(self):
        alpha = np.atleast_2d(np.array(self.alpha, dtype=float))
        beta = np.array(self.beta, dtype=float).ravel()
        if beta.size != alpha.shape[0]:
            raise ContractError(f"beta has length {beta.size}, alpha has {alpha.shape[0]} rows")
        if np.any(alpha < -TABLE_TOL) or np.any(beta < -TABLE_TOL) or np.any(alpha > 1 + TABLE_TOL) or np.any(beta > 1 + TABLE_TOL):
            raise ContractError("table entries must lie in [0, 1]")
        total = alpha.sum() + beta.sum()
        if abs(total - 1.0) > 1e-12 * max(1, alpha.size):
            raise ContractError(f"table mass sums to {total!r}, expected 1")
        alpha.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def M(self) -> int:
        return self.alpha.shape[1]

    @property
    def M_F(self) -> int:
        return self.alpha.shape[0]

    @property
    def alpha_marginal(self) -> np.ndarray:
        return self.alpha.sum(axis=0)

    @property
    def p_r0(self) -> float:
        return float(self.beta.sum())

    @property
    def p_r1(self) -> float:
        return float(self.alpha.sum())

    def marginal(self) -> "StratumTable":
        """The same table with the prediction collapsed to one level."""
        return StratumTable(self.alpha_marginal[None, :], [self.p_r0], self.n, self.empirical)


@dataclass
class PopulationTables:
    """Per-stratum tables with their weights ``P(X = x)``."""

    strata: list
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if not self.strata:
            raise ContractError("population has no strata")
        weights = np.array([w for _, _, w in self.strata], dtype=float)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > TABLE_TOL * max(1, len(weights)) * 10:
            raise ContractError(f"stratum weights must be nonnegative and sum to 1 (sum={weights.sum()!r})")
        shapes = {t.alpha.shape for _, t, _ in self.strata}
        if len(shapes) != 1:
            raise ContractError("all strata must share M and M_F")

    @property
    def M(self) -> int:
        return self.strata[0][1].M

    @property
    def M_F(self) -> int:
        return self.strata[0][1].M_F

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, _, w in self.strata], dtype=float)

    @property
    def n(self) -> int:
        return int(sum(t.n for _, t, _ in self.strata))

    def pooled(self) -> StratumTable:
        """Mixture of the stratum tables, i.e. the table ignoring covariates."""
        w = self.weights
        alpha = sum(wi * t.alpha for (_, t, _), wi in zip(self.strata, w))
        beta = sum(wi * t.beta for (_, t, _), wi in zip(self.strata, w))
        empirical = any(t.empirical for _, t, _ in self.strata)
        return StratumTable(alpha, beta, self.n, empirical)

    @classmethod
    def single(cls, table: StratumTable, stratum_id=None) -> "PopulationTables":
        return cls([(stratum_id, table, 1.0)])


def estimate_tables(records, M: int, M_F: Optional[int] = None, smoothing: float = 0.0) -> PopulationTables:
    """Empirical frequency tables, one per stratum.

    Parameters
    ----------
    records : Records or accepted input of :func:`check_records`
    M : int
        Declared outcome support size; unobserved levels keep their columns.
    M_F : int, optional
        Declared prediction support size. Ignored (treated as 1) when the
        records have no ``f`` column; required otherwise.
    smoothing : float
        Add-``smoothing`` pseudo-count on every cell (0 = plain frequencies).
    """
    rec = check_records(records)
    if M < 1:
        raise ContractError("M must be positive")
    if rec.f is None:
        M_F = 1
        f = np.ones(len(rec), dtype=np.int64)
    else:
        if M_F is None:
            raise ContractError("M_F must be declared when records carry predictions")
        f = rec.f
    bad = np.flatnonzero((rec.r == 1) & ((rec.y < 1) | (rec.y > M)))
    if bad.size:
        raise DataError(f"record {int(bad[0])}: y={int(rec.y[bad[0]])} outside 1..{M}")
    bad = np.flatnonzero((f < 1) | (f > M_F))
    if bad.size:
        raise DataError(f"record {int(bad[0])}: f={int(f[bad[0]])} outside 1..{M_F}")
    if smoothing < 0:
        raise ContractError("smoothing must be nonnegative")

    if rec.stratum is None:
        ids = [None]
        groups = [np.arange(len(rec))]
    else:
        ids = sorted(set(rec.stratum.tolist()), key=lambda v: (str(type(v)), v))
        groups = [np.flatnonzero(rec.stratum == s) for s in ids]

    n_total = len(rec)
    strata = []
    notes = []
    for sid, idx in zip(ids, groups):
        if idx.size == 0:
            msg = f"stratum {sid!r} is empty and was dropped"
            warnings.warn(msg)
            notes.append(msg)
            continue
        r = rec.r[idx]
        fi = f[idx] - 1
        obs = r == 1
        a_counts = np.zeros((M_F, M))
        np.add.at(a_counts, (fi[obs], rec.y[idx][obs] - 1), 1.0)
        b_counts = np.bincount(fi[~obs], minlength=M_F).astype(float)
        denom = idx.size + smoothing * (M_F * M + M_F)
        alpha = (a_counts + smoothing) / denom
        beta = (b_counts + smoothing) / denom
        strata.append((sid, StratumTable(alpha, beta, int(idx.size), empirical=True), idx.size / n_total))
    return PopulationTables(strata, notes)


def joint_tables(p_y, f_given_y, pi) -> StratumTable:
    """Exact table implied by an outcome pmf, ``P(F | Y)`` rows and ``pi``."""
    p_y = np.asarray(p_y, dtype=float)
    P = np.atleast_2d(np.asarray(f_given_y, dtype=float))
    pi = np.asarray(pi, dtype=float)
    if P.shape[0] != p_y.size or pi.size != p_y.size:
        raise ContractError("p_y, f_given_y rows and pi must all have length M")
    alpha = (P * (p_y * pi)[:, None]).T
    beta = P.T @ (p_y * (1.0 - pi))
    return StratumTable(alpha, beta, 0, empirical=False)


def exact_tables(dgp) -> PopulationTables:
    """Population tables of a data-generating process.

    ``dgp`` needs ``p_y``, ``f_given_y`` and ``pi`` arrays; a
    ``simlab.DgpConfig`` is resolved first when it offers ``resolve()``.
    """
    if hasattr(dgp, "resolve"):
        dgp = dgp.resolve()
    return PopulationTables.single(joint_tables(dgp.p_y, dgp.f_given_y, dgp.pi))
