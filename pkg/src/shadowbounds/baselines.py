"""Point estimators used as comparisons.

Each returns a :class:`PointEstimate` with a plain normal-approximation 95%
interval. All of them assume some form of missing-at-random and are biased
under outcome-dependent missingness; they exist for benchmarking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tables import check_records

Z95 = 1.959963984540054

_AS_COEF = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)
_AS_P = 0.3275911
_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# below this index the tail ratio comes from a continued fraction
_TAIL_Z = -2.0
# stage-2 designs worse than this are reported as failures
HECKMAN_MAX_COND = 1e6


class DegenerateEstimatorError(ValueError):
    """Estimator undefined on this sample (e.g. no observed outcome)."""


class EstimatorFailed(RuntimeError):
    """Iterative fit did not converge; benchmark runs record and continue."""


@dataclass
class PointEstimate:
    value: float
    stderr: float
    ci_lo: float
    ci_hi: float
    method: str
    meta: dict = field(default_factory=dict)


def _estimate(value, stderr, method, **meta):
    stderr = float(stderr) if np.isfinite(stderr) else 0.0
    return PointEstimate(float(value), stderr, float(value - Z95 * stderr),
                         float(value + Z95 * stderr), method, meta)


def _sd(x):
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def normal_cdf(z):
    """Standard normal cdf from a rational erf approximation (abs. error < 1e-7)."""
    z = np.asarray(z, dtype=float)
    x = np.abs(z) / _SQRT2
    t = 1.0 / (1.0 + _AS_P * x)
    a1, a2, a3, a4, a5 = _AS_COEF
    poly = t * (a1 + t * (a2 + t * (a3 + t * (a4 + t * a5))))
    tail = 0.5 * poly * np.exp(-x * x)
    out = np.where(z >= 0, 1.0 - tail, tail)
    return out if out.ndim else float(out)


def normal_pdf(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z - _LOG_SQRT_2PI)


def _tail_ratio(x, terms=60):
    """``Phi(-x) / phi(x)`` for ``x > 0`` by Laplace's continued fraction."""
    v = np.array(x, dtype=float, copy=True)
    for k in range(terms, 0, -1):
        v = x + k / v
    return 1.0 / v


def mills_ratio(z):
    """Inverse Mills ratio ``phi(z) / Phi(z)``, stable for very negative ``z``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    low = z < _TAIL_Z
    out[low] = 1.0 / _tail_ratio(-z[low])
    hi = ~low
    out[hi] = normal_pdf(z[hi]) / normal_cdf(z[hi])
    return out


def log_normal_cdf(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    low = z < _TAIL_Z
    out[low] = -0.5 * z[low] ** 2 - _LOG_SQRT_2PI + np.log(_tail_ratio(-z[low]))
    out[~low] = np.log(normal_cdf(z[~low]))
    return out


def cca(records) -> PointEstimate:
    """Complete-case mean of the observed outcomes."""
    rec = check_records(records)
    obs = rec.y[rec.r == 1].astype(float)
    if obs.size == 0:
        raise DegenerateEstimatorError("no observed outcomes")
    return _estimate(obs.mean(), _sd(obs) / math.sqrt(obs.size), "cca", n_obs=int(obs.size))


def naive_impute(records) -> PointEstimate:
    """Observed outcome where present, prediction elsewhere, averaged."""
    rec = check_records(records, require_f=True)
    filled = np.where(rec.r == 1, rec.y, rec.f).astype(float)
    return _estimate(filled.mean(), _sd(filled) / math.sqrt(filled.size), "naive_impute")


def ppi(records) -> PointEstimate:
    """Prediction mean plus the mean residual on observed units."""
    rec = check_records(records, require_f=True)
    f = rec.f.astype(float)
    obs = rec.r == 1
    if not obs.any():
        raise DegenerateEstimatorError("no observed outcomes")
    resid = rec.y[obs] - f[obs]
    value = f.mean() + resid.mean()
    se = math.sqrt(_sd(f) ** 2 / f.size + _sd(resid) ** 2 / resid.size)
    return _estimate(value, se, "ppi", correction=float(resid.mean()))


def llm_raw(records) -> PointEstimate:
    """Mean of the predictions alone."""
    rec = check_records(records, require_f=True)
    f = rec.f.astype(float)
    return _estimate(f.mean(), _sd(f) / math.sqrt(f.size), "llm_raw")


def pattern_mixture(records) -> PointEstimate:
    """Impute missing outcomes by the observed mean within the same prediction level.

    Prediction levels with no observed outcome fall back to the overall
    observed mean and are listed in ``meta["fallback_levels"]``.
    """
    rec = check_records(records, require_f=True)
    obs = rec.r == 1
    if not obs.any():
        raise DegenerateEstimatorError("no observed outcomes")
    overall = rec.y[obs].mean()
    levels = np.unique(rec.f)
    cell_mean = {}
    fallback = []
    for lv in levels:
        sel = obs & (rec.f == lv)
        if sel.any():
            cell_mean[int(lv)] = rec.y[sel].mean()
        else:
            cell_mean[int(lv)] = overall
            fallback.append(int(lv))
    imputed = np.array([cell_mean[int(v)] for v in rec.f])
    filled = np.where(obs, rec.y, imputed).astype(float)
    return _estimate(filled.mean(), _sd(filled) / math.sqrt(filled.size), "pattern_mixture",
                     fallback_levels=fallback)


def probit_fit(X, d, max_iter: int = 100, tol: float = 1e-9):
    """Probit MLE by Newton-Raphson.

    Raises
    ------
    EstimatorFailed
        On non-convergence within ``max_iter`` steps, a singular Hessian, or
        diverging coefficients (separation).
    """
    X = np.asarray(X, dtype=float)
    q = 2.0 * np.asarray(d, dtype=float) - 1.0
    b = np.zeros(X.shape[1])
    for it in range(max_iter):
        z = q * (X @ b)
        lam = mills_ratio(z)
        grad = X.T @ (q * lam)
        weight = lam * (lam + z)
        H = (X * weight[:, None]).T @ X
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            raise EstimatorFailed("probit Hessian is singular") from None
        b = b + step
        if not np.all(np.isfinite(b)) or np.max(np.abs(b)) > 50:
            raise EstimatorFailed("probit coefficients diverge (perfect separation?)")
        if np.max(np.abs(step)) < tol:
            return b, it + 1
    raise EstimatorFailed(f"probit did not converge in {max_iter} iterations")


def heckman(records) -> PointEstimate:
    """Two-step selection correction with the prediction as the only regressor.

    Stage 1 fits a probit of ``R`` on ``(1, F)``; stage 2 regresses observed
    ``Y`` on ``(1, F, lambda)`` with ``lambda`` the inverse Mills ratio of the
    probit index. The estimate averages ``b0 + b1 * F`` over all units. There
    is no exclusion restriction, so the correction is identified only through
    the probit's nonlinearity.
    """
    rec = check_records(records, require_f=True)
    f = rec.f.astype(float)
    obs = rec.r == 1
    if not obs.any():
        raise DegenerateEstimatorError("no observed outcomes")
    if obs.all():
        # no selection to correct: plain OLS of Y on (1, F)
        X = np.column_stack([np.ones(f.size), f])
        coef, *_ = np.linalg.lstsq(X, rec.y.astype(float), rcond=None)
        pred = X @ coef
        resid = rec.y - pred
        se = _sd(resid) / math.sqrt(f.size) if f.size > 1 else 0.0
        return _estimate(pred.mean(), se, "heckman", probit_iterations=0, degenerate="no missingness")
    if np.unique(f[obs]).size < 2 or np.unique(f[~obs]).size < 2:
        raise EstimatorFailed("prediction does not vary among observed and missing units")
    Z = np.column_stack([np.ones(f.size), f])
    gamma, iters = probit_fit(Z, obs.astype(float))
    lam = mills_ratio(Z[obs] @ gamma)
    X2 = np.column_stack([np.ones(obs.sum()), f[obs], lam])
    y = rec.y[obs].astype(float)
    if np.linalg.cond(X2) > HECKMAN_MAX_COND:
        raise EstimatorFailed("selection term is collinear with the prediction")
    coef, *_ = np.linalg.lstsq(X2, y, rcond=None)
    if not np.all(np.isfinite(coef)):
        raise EstimatorFailed("second-stage regression failed")
    pred = coef[0] + coef[1] * f
    value = pred.mean()
    # stage-2 OLS covariance; ignores first-stage estimation error
    resid = y - X2 @ coef
    dof = max(y.size - 3, 1)
    s2 = float(resid @ resid) / dof
    try:
        cov = s2 * np.linalg.inv(X2.T @ X2)
        grad = np.array([1.0, f.mean(), 0.0])
        se = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    except np.linalg.LinAlgError:
        se = 0.0
    return _estimate(value, se, "heckman", probit=gamma.tolist(), probit_iterations=iters,
                     mills_coef=float(coef[2]))


ESTIMATORS = {
    "cca": cca,
    "naive_impute": naive_impute,
    "ppi": ppi,
    "heckman": heckman,
    "pattern_mixture": pattern_mixture,
    "llm_raw": llm_raw,
}
