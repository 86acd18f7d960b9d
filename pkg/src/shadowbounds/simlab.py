"""Simulation lab: data-generating processes, MNAR masking and benchmarks.

Randomness comes from numpy's Philox counter-based generator. A generator is
keyed by ``(seed, stream)`` where the stream encodes the purpose and the
replication index, so every replication is reproducible on its own and
results do not depend on execution order or thread count. Within a sample,
unit ``i`` consumes exactly one Philox block (four 64-bit words), so its
draws depend only on ``(seed, stream, i)``.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .baselines import ESTIMATORS as POINT_ESTIMATORS
from .baselines import DegenerateEstimatorError, EstimatorFailed
from .bounds_base import base_bounds
from .lp_core import ContractError
from .set_expansion import ExpansionConfig, estimate
from .tables import PopulationTables, Records, estimate_tables, joint_tables

STREAM_SAMPLE = 1
STREAM_MECHANISM = 2
STREAM_MASK = 3
STREAM_CONVERGENCE = 4
STREAM_DATASET = 5

REFERENCE_PI = (0.30, 0.10, 0.05, 0.70, 0.95)
REFERENCE_MU = 3.0
REFERENCE_RESPONSE_RATE = 0.366

# Rows P(F | Y=y): maximum-entropy pmfs on 1..5 whose means run linearly
# from 2.85 (y=1) to 4.38 (y=5).
POINT_ID_F_GIVEN_Y = np.array([
    (0.2311435135291581, 0.2144025341320128, 0.19887404989381255, 0.1844702436997046, 0.17110965874531198),
    (0.15614868971608997, 0.17551877357228868, 0.19729169634617774, 0.22176552772641872, 0.24927531263902478),
    (0.09515143626878252, 0.13116765081659593, 0.18081653094698563, 0.24925824058111085, 0.34360614138652507),
    (0.04798541184742238, 0.08436687129539112, 0.1483319346055677, 0.2607938695130014, 0.4585219127386173),
    (0.015833442989530582, 0.03934949686859026, 0.09779192717812667, 0.24303388307985355, 0.6039912498838989),
])
POINT_ID_F_MEANS = (2.85, 4.38)

# Artifact-defined masking patterns (response probabilities for y = 1..5).
MECHANISM_PRESETS = {
    "reference_sim": REFERENCE_PI,
    "higher_score_missing": (0.90, 0.80, 0.60, 0.40, 0.20),
    "u_shaped": (0.85, 0.50, 0.25, 0.50, 0.85),
    "lower_score_missing": (0.20, 0.40, 0.60, 0.80, 0.90),
}

INTERVAL_ESTIMATORS = ("set_expansion", "aggregated_lp")


# ---------------------------------------------------------------- randomness

def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator keyed by a 64-bit seed and up to three stream words."""
    if len(stream) > 3:
        raise ContractError("at most three stream components")
    word = 0
    for k, s in enumerate(stream):
        if not 0 <= int(s) < 1 << 20:
            raise ContractError(f"stream component out of range: {s}")
        word |= int(s) << (20 * k)
    key = (int(seed) & ((1 << 64) - 1)) | (word << 64)
    return np.random.Generator(np.random.Philox(key=key))


def _unit_uniforms(rng, n):
    return rng.random((n, 4))


# ---------------------------------------------------------------- building blocks

def discretized_normal(mu: float, sigma: float, M: int) -> np.ndarray:
    """pmf on ``1..M`` from unit-width bins around each level; outer bins take the tails."""
    if not sigma > 0:
        raise ContractError("sigma must be positive")
    edges = np.r_[-np.inf, np.arange(1.5, M, 1.0), np.inf]
    cdf = np.array([0.5 * (1.0 + math.erf((e - mu) / (sigma * math.sqrt(2.0)))) if np.isfinite(e)
                    else (0.0 if e < 0 else 1.0) for e in edges])
    p = np.diff(cdf)
    return p / p.sum()


def calibrate_sigma(mu: float, pi, target: float, M: int) -> float:
    """Spread of the discretized normal that gives response rate ``target``."""
    pi = np.asarray(pi, dtype=float)
    fn = lambda s: float(discretized_normal(mu, s, M) @ pi) - target
    lo, hi = 0.05, 50.0
    if fn(lo) * fn(hi) > 0:
        raise ContractError(f"response rate {target} unreachable for this mechanism")
    return float(brentq(fn, lo, hi, xtol=1e-14))


def maxent_rows(means, M_F: int) -> np.ndarray:
    """Maximum-entropy pmfs on ``1..M_F`` with the given means."""
    f = np.arange(1, M_F + 1, dtype=float)
    rows = []
    for m in means:
        def gap(lam):
            q = np.exp(lam * (f - f.mean()))
            return (q / q.sum()) @ f - m
        lam = brentq(gap, -50, 50, xtol=1e-15)
        q = np.exp(lam * (f - f.mean()))
        rows.append(q / q.sum())
    return np.array(rows)


def partial_id_from(P) -> np.ndarray:
    """Copy of ``P`` with rows 1 and 5 replaced by rows 2 and 4 (rank 3 for M=5)."""
    Q = np.array(P, dtype=float, copy=True)
    Q[0] = Q[1]
    Q[-1] = Q[-2]
    return Q


# ---------------------------------------------------------------- configs

_DGP_KEYS = {"M", "p_y", "f_given_y", "pi", "n", "seed"}


@dataclass
class ResolvedDgp:
    M: int
    p_y: np.ndarray
    f_given_y: np.ndarray
    pi: np.ndarray
    n: int = 1000
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p_y = np.asarray(self.p_y, dtype=float)
        self.f_given_y = np.atleast_2d(np.asarray(self.f_given_y, dtype=float))
        self.pi = np.asarray(self.pi, dtype=float)
        M = self.M
        if self.p_y.shape != (M,) or np.any(self.p_y < 0) or abs(self.p_y.sum() - 1) > 1e-12:
            raise ContractError("p_y must be a pmf of length M summing to 1 within 1e-12")
        if self.f_given_y.shape[0] != M or np.any(self.f_given_y < 0) or \
                np.any(np.abs(self.f_given_y.sum(axis=1) - 1) > 1e-12):
            raise ContractError("f_given_y must have M rows, each summing to 1 within 1e-12")
        if self.pi.shape != (M,) or np.any(self.pi <= 0) or np.any(self.pi > 1):
            raise ContractError("pi must have length M with entries in (0, 1]")
        if self.n < 0:
            raise ContractError("n must be nonnegative")

    @property
    def mean(self) -> float:
        return float(np.arange(1, self.M + 1) @ self.p_y)

    @property
    def M_F(self) -> int:
        return self.f_given_y.shape[1]

    def resolve(self):
        return self


@dataclass
class DgpConfig:
    """Declarative DGP, JSON-compatible field for field.

    ``p_y``: ``{"kind": "explicit", "values": [...]}`` or
    ``{"kind": "discretized_normal", "mu": 3.0, "sigma": 1.4}`` where
    ``sigma`` may be ``"calibrated"`` (matches ``target_response_rate``,
    default 0.366, under ``pi``).
    ``f_given_y``: ``{"kind": "explicit", "matrix": [[...]]}``,
    ``{"kind": "point_id_preset"}`` or ``{"kind": "partial_id_preset"}``.
    ``pi``: ``{"kind": "explicit", "values": [...]}``,
    ``{"kind": "preset", "name": ...}`` or
    ``{"kind": "uniform_random", "lo": 0.1, "hi": 0.9}``.
    """

    M: int
    p_y: dict
    f_given_y: dict
    pi: dict
    n: int = 1000
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "DgpConfig":
        unknown = set(d) - _DGP_KEYS
        if unknown:
            raise ContractError(f"unknown DGP keys: {sorted(unknown)}")
        missing = {"M", "p_y", "f_given_y", "pi"} - set(d)
        if missing:
            raise ContractError(f"missing DGP keys: {sorted(missing)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {"M": self.M, "p_y": self.p_y, "f_given_y": self.f_given_y, "pi": self.pi,
                "n": self.n, "seed": self.seed}

    def resolve_pi(self, rng=None) -> np.ndarray:
        return resolve_mechanism(self.pi, self.M, rng if rng is not None else rng_for(self.seed, STREAM_MECHANISM))

    def resolve(self, rng=None) -> ResolvedDgp:
        M = int(self.M)
        pi = self.resolve_pi(rng)
        spec = dict(self.p_y)
        kind = spec.pop("kind", None)
        meta = {}
        if kind == "explicit":
            _only(spec, {"values"}, "p_y")
            p_y = np.asarray(spec["values"], dtype=float)
        elif kind == "discretized_normal":
            _only(spec, {"mu", "sigma", "target_response_rate"}, "p_y")
            mu = float(spec.get("mu", REFERENCE_MU))
            sigma = spec.get("sigma", "calibrated")
            if sigma == "calibrated":
                sigma = calibrate_sigma(mu, pi, float(spec.get("target_response_rate", REFERENCE_RESPONSE_RATE)), M)
            meta["sigma"] = float(sigma)
            p_y = discretized_normal(mu, float(sigma), M)
        else:
            raise ContractError(f"unknown p_y kind {kind!r}")
        fspec = dict(self.f_given_y)
        fkind = fspec.pop("kind", None)
        if fkind == "explicit":
            _only(fspec, {"matrix"}, "f_given_y")
            P = np.asarray(fspec["matrix"], dtype=float)
        elif fkind in ("point_id_preset", "partial_id_preset"):
            _only(fspec, set(), "f_given_y")
            if M != 5:
                raise ContractError("presets are defined for M = 5")
            P = POINT_ID_F_GIVEN_Y if fkind == "point_id_preset" else partial_id_from(POINT_ID_F_GIVEN_Y)
        else:
            raise ContractError(f"unknown f_given_y kind {fkind!r}")
        return ResolvedDgp(M, p_y, P, pi, int(self.n), int(self.seed), meta)


def _only(spec, allowed, where):
    extra = set(spec) - allowed
    if extra:
        raise ContractError(f"unknown keys in {where}: {sorted(extra)}")


def resolve_mechanism(spec, M: int, rng=None) -> np.ndarray:
    """Response probabilities from a mechanism spec (vector, preset or random draw)."""
    if isinstance(spec, (list, tuple, np.ndarray)):
        pi = np.asarray(spec, dtype=float)
    else:
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind == "explicit":
            _only(spec, {"values"}, "pi")
            pi = np.asarray(spec["values"], dtype=float)
        elif kind == "preset":
            _only(spec, {"name"}, "pi")
            if spec.get("name") not in MECHANISM_PRESETS:
                raise ContractError(f"unknown mechanism preset {spec.get('name')!r}")
            pi = np.asarray(MECHANISM_PRESETS[spec["name"]], dtype=float)
        elif kind == "uniform_random":
            _only(spec, {"lo", "hi"}, "pi")
            lo, hi = float(spec.get("lo", 0.1)), float(spec.get("hi", 0.9))
            if not 0 < lo <= hi <= 1:
                raise ContractError("uniform_random needs 0 < lo <= hi <= 1")
            if rng is None:
                raise ContractError("uniform_random mechanism needs a generator")
            pi = lo + (hi - lo) * rng.random(M)
        else:
            raise ContractError(f"unknown mechanism kind {kind!r}")
    if pi.shape != (M,) or np.any(pi <= 0) or np.any(pi > 1):
        raise ContractError("mechanism must have M entries in (0, 1]")
    return pi


def point_id_dgp(n: int = 1000, seed: int = 0) -> DgpConfig:
    return DgpConfig(5, {"kind": "discretized_normal", "mu": REFERENCE_MU, "sigma": "calibrated"},
                     {"kind": "point_id_preset"}, {"kind": "preset", "name": "reference_sim"}, n, seed)


def partial_id_dgp(n: int = 1000, seed: int = 0) -> DgpConfig:
    return DgpConfig(5, {"kind": "discretized_normal", "mu": REFERENCE_MU, "sigma": "calibrated"},
                     {"kind": "partial_id_preset"}, {"kind": "preset", "name": "reference_sim"}, n, seed)


def exact_population(dgp) -> PopulationTables:
    d = dgp.resolve() if hasattr(dgp, "resolve") else dgp
    return PopulationTables.single(joint_tables(d.p_y, d.f_given_y, d.pi))


# ---------------------------------------------------------------- sampling

def _categorical(u, cum):
    """Inverse-cdf draw; ``cum`` rows are cumulative pmfs."""
    idx = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(idx, cum.shape[-1] - 1)


def _draw(d: ResolvedDgp, n: int, rng):
    u = _unit_uniforms(rng, n)
    y = _categorical(u[:, 0], np.cumsum(d.p_y)[None, :]) + 1
    cumF = np.cumsum(d.f_given_y, axis=1)
    f = np.minimum(((u[:, 1][:, None] >= cumF[y - 1]).sum(axis=1)), d.M_F - 1) + 1
    r = (u[:, 2] < d.pi[y - 1]).astype(np.int64)
    return y, f, r


def sample(d: ResolvedDgp, n: int, rng) -> Records:
    y, f, r = _draw(d, n, rng)
    return Records(r, np.where(r == 1, y, 0), f)


def generate(dgp, return_truth: bool = False):
    """Draw ``dgp.n`` i.i.d. records ``(Y, F, R)``; ``Y`` is blanked where ``R = 0``.

    With ``return_truth`` also returns the sealed :class:`Truth` holding the
    complete outcomes.
    """
    d = dgp.resolve() if hasattr(dgp, "resolve") else dgp
    y, f, r = _draw(d, d.n, rng_for(d.seed, STREAM_SAMPLE))
    rec = Records(r, np.where(r == 1, y, 0), f)
    if return_truth:
        return rec, Truth(y, d.mean)
    return rec


class Truth:
    """Complete outcomes, kept apart from anything an estimator sees."""

    __slots__ = ("_y", "_target")

    def __init__(self, y, target: Optional[float] = None):
        self._y = np.asarray(y, dtype=np.int64).copy()
        self._y.setflags(write=False)
        self._target = float(self._y.mean()) if target is None else float(target)

    @property
    def target(self) -> float:
        """Estimand used for metrics (population mean for DGPs, dataset mean for masks)."""
        return self._target

    @property
    def sample_mean(self) -> float:
        return float(self._y.mean())

    def outcomes(self) -> np.ndarray:
        return self._y

    def __repr__(self):
        return f"Truth(n={self._y.size}, target={self._target:.6g})"


@dataclass
class LabeledData:
    """Fully labeled dataset: every unit has its outcome and prediction."""

    y: np.ndarray
    f: np.ndarray
    stratum: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.int64)
        self.f = np.asarray(self.f, dtype=np.int64)
        if self.y.shape != self.f.shape:
            raise ContractError("y and f lengths differ")
        if np.any(self.y < 1):
            raise ContractError("every record needs an outcome y >= 1")

    def __len__(self):
        return self.y.size

    @property
    def mean(self) -> float:
        return float(self.y.mean())


def mask(dataset: LabeledData, mechanism, seed: int = 0, rng=None):
    """Blank outcomes with probability ``1 - pi(y)``.

    Returns ``(records, truth)``; ``truth`` is a :class:`Truth` for metric
    computation only.
    """
    if not isinstance(dataset, LabeledData):
        raise ContractError("mask needs a fully labeled dataset")
    if isinstance(mechanism, (list, tuple, np.ndarray)):
        M = len(mechanism)
    else:
        M = int(dataset.y.max())
    pi = resolve_mechanism(mechanism, M, rng_for(seed, STREAM_MECHANISM))
    if dataset.y.max() > pi.size:
        raise ContractError("mechanism shorter than the outcome support")
    rng = rng if rng is not None else rng_for(seed, STREAM_MASK)
    u = _unit_uniforms(rng, len(dataset))[:, 0]
    r = (u < pi[dataset.y - 1]).astype(np.int64)
    rec = Records(r, np.where(r == 1, dataset.y, 0), dataset.f.copy(), dataset.stratum)
    return rec, Truth(dataset.y)


def make_uss_like(seed: int = 20240601) -> LabeledData:
    """Synthetic fully labeled ratings with the USS/JDDC outcome counts.

    3,300 units with outcome counts 2/144/725/2287/142 and a downward-biased
    prediction drawn from :data:`USS_LIKE_F_GIVEN_Y` (counts allocated by
    largest remainder, then shuffled).
    """
    rng = rng_for(seed, STREAM_DATASET)
    ys, fs = [], []
    for y, count in enumerate(USS_LIKE_COUNTS, start=1):
        probs = np.asarray(USS_LIKE_F_GIVEN_Y[y - 1]) * count
        alloc = np.floor(probs).astype(int)
        rem = count - alloc.sum()
        order = np.argsort(-(probs - alloc), kind="stable")
        alloc[order[:rem]] += 1
        for f, k in enumerate(alloc, start=1):
            ys.extend([y] * k)
            fs.extend([f] * k)
    perm = rng.permutation(len(ys))
    return LabeledData(np.asarray(ys)[perm], np.asarray(fs)[perm])


def load_uss_like() -> LabeledData:
    """The committed copy of :func:`make_uss_like` (``data/uss_like.csv``)."""
    from importlib.resources import files

    from .io import read_labeled_csv

    with files("shadowbounds").joinpath("data/uss_like.csv").open("r", encoding="utf-8") as fh:
        return read_labeled_csv(fh)


USS_LIKE_COUNTS = (2, 144, 725, 2287, 142)
# P(F | Y) for the synthetic prediction: informative, biased toward lower scores.
USS_LIKE_F_GIVEN_Y = (
    (0.500, 0.300, 0.150, 0.050, 0.000),
    (0.215, 0.450, 0.235, 0.100, 0.000),
    (0.053, 0.206, 0.500, 0.194, 0.047),
    (0.020, 0.077, 0.297, 0.506, 0.100),
    (0.000, 0.020, 0.094, 0.371, 0.515),
)


# ---------------------------------------------------------------- benchmark

_SCENARIO_KEYS = {"dgp", "dataset", "estimators", "reps", "metrics", "seed"}
_DATASET_KEYS = {"path", "M", "M_F", "mechanism", "builtin"}
ALL_METRICS = ("mae", "coverage", "width", "bias")
ESTIMATOR_NAMES = INTERVAL_ESTIMATORS + tuple(POINT_ESTIMATORS)


@dataclass
class ScenarioConfig:
    """Benchmark description: a DGP or a masked dataset, estimators, reps, seed.

    ``dataset`` is ``{"path" | "builtin": ..., "M": 5, "M_F": 5,
    "mechanism": <mechanism spec>}``; with a ``uniform_random`` mechanism a
    fresh ``pi`` is drawn in every replication.
    """

    estimators: list
    reps: int = 1
    dgp: Optional[DgpConfig] = None
    dataset: Optional[dict] = None
    metrics: tuple = ALL_METRICS
    seed: int = 0
    data: Optional[LabeledData] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.reps < 1:
            raise ContractError("reps must be >= 1")
        if (self.dgp is None) == (self.dataset is None):
            raise ContractError("give exactly one of dgp or dataset")
        self.estimators = [e if isinstance(e, dict) else {"name": e} for e in self.estimators]
        for e in self.estimators:
            if e.get("name") not in ESTIMATOR_NAMES:
                raise ContractError(f"unknown estimator {e.get('name')!r}")
            extra = set(e) - ({"name", "C", "kappa", "kappa_rule"} if e["name"] == "set_expansion" else {"name"})
            if extra:
                raise ContractError(f"unknown settings for {e['name']}: {sorted(extra)}")
        bad = set(self.metrics) - set(ALL_METRICS)
        if bad:
            raise ContractError(f"unknown metrics: {sorted(bad)}")
        if self.dataset is not None:
            _only(self.dataset, _DATASET_KEYS, "dataset")

    @classmethod
    def from_dict(cls, d: dict, data: Optional[LabeledData] = None) -> "ScenarioConfig":
        unknown = set(d) - _SCENARIO_KEYS
        if unknown:
            raise ContractError(f"unknown scenario keys: {sorted(unknown)}")
        dgp = DgpConfig.from_dict(d["dgp"]) if d.get("dgp") is not None else None
        return cls(estimators=list(d.get("estimators", [])), reps=int(d.get("reps", 1)), dgp=dgp,
                   dataset=d.get("dataset"), metrics=tuple(d.get("metrics", ALL_METRICS)),
                   seed=int(d.get("seed", 0)), data=data)

    def to_dict(self) -> dict:
        return {"dgp": None if self.dgp is None else self.dgp.to_dict(), "dataset": self.dataset,
                "estimators": self.estimators, "reps": self.reps, "metrics": list(self.metrics),
                "seed": self.seed}


@dataclass
class MetricsReport:
    summary: dict
    rows: list
    mechanisms: dict
    config: dict

    def to_dict(self):
        return {"summary": self.summary, "mechanisms": self.mechanisms, "config": self.config,
                "rows": self.rows}


def _expansion_cfg(spec):
    rule = spec.get("kappa_rule", "constant")
    return ExpansionConfig(C=float(spec.get("C", 50.0)), kappa_rule=rule,
                           kappa_value=float(spec.get("kappa", 0.5)))


def _run_estimator(spec, rec, M, M_F):
    name = spec["name"]
    if name == "set_expansion":
        pop = estimate_tables(rec, M, M_F)
        iv = estimate(pop, _expansion_cfg(spec)).aggregate
        return iv.midpoint, iv.lo, iv.hi
    if name == "aggregated_lp":
        iv = base_bounds(estimate_tables(rec, M, M_F))
        return iv.midpoint, iv.lo, iv.hi
    est = POINT_ESTIMATORS[name](rec)
    return est.value, est.ci_lo, est.ci_hi


def _load_dataset(sc: ScenarioConfig):
    if sc.data is not None:
        return sc.data
    ds = sc.dataset
    if ds.get("builtin") == "uss_like":
        return load_uss_like()
    if "path" in ds:
        from .io import read_labeled_csv

        return read_labeled_csv(ds["path"])
    raise ContractError("dataset needs 'path' or 'builtin'")


def _replication(sc: ScenarioConfig, k: int, ctx):
    if sc.dgp is not None:
        d = ctx["dgp"]
        if sc.dgp.pi.get("kind") == "uniform_random":
            d = sc.dgp.resolve(rng_for(sc.seed, STREAM_MECHANISM, k))
        rec, truth = d_sample_with_truth(d, rng_for(sc.seed, STREAM_SAMPLE, k))
        pi = d.pi
        M, M_F = d.M, d.M_F
    else:
        data = ctx["data"]
        M, M_F = ctx["M"], ctx["M_F"]
        if "mechanism" not in sc.dataset:
            raise ContractError("dataset scenario needs a mechanism")
        pi = resolve_mechanism(sc.dataset["mechanism"], M, rng_for(sc.seed, STREAM_MECHANISM, k))
        rec, truth = mask(data, pi, rng=rng_for(sc.seed, STREAM_MASK, k))
    rows = []
    for spec in sc.estimators:
        name = spec["name"]
        row = {"rep": k, "estimator": name, "truth": truth.target}
        try:
            value, lo, hi = _run_estimator(spec, rec, M, M_F)
        except (EstimatorFailed, DegenerateEstimatorError) as exc:
            row.update(failed=True, error=str(exc), value=None, lo=None, hi=None)
        else:
            row.update(failed=False, value=value, lo=lo, hi=hi,
                       covered=bool(lo - 1e-12 <= truth.target <= hi + 1e-12),
                       abs_error=abs(value - truth.target), width=hi - lo)
        rows.append(row)
    return rows, pi.tolist()


def d_sample_with_truth(d: ResolvedDgp, rng):
    y, f, r = _draw(d, d.n, rng)
    return Records(r, np.where(r == 1, y, 0), f), Truth(y, d.mean)


def run_benchmark(scenario: ScenarioConfig, threads: int = 1) -> MetricsReport:
    """Run all replications and aggregate metrics.

    Replication ``k`` draws from generators keyed on ``(seed, purpose, k)``;
    results are folded in replication order, so the report is identical
    for any ``threads`` value (0 means one thread per CPU).
    """
    sc = scenario
    ctx = {}
    if sc.dgp is not None:
        ctx["dgp"] = sc.dgp.resolve(rng_for(sc.seed, STREAM_MECHANISM, 0))
    else:
        data = _load_dataset(sc)
        ctx["data"] = data
        ctx["M"] = int(sc.dataset.get("M", data.y.max()))
        ctx["M_F"] = int(sc.dataset.get("M_F", data.f.max()))
    if threads == 0:
        import os

        threads = os.cpu_count() or 1
    job = lambda k: _replication(sc, k, ctx)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(sc.reps)))
    else:
        results = [job(k) for k in range(sc.reps)]
    rows = [row for rr, _ in results for row in rr]
    mechanisms = {k: pi for k, (_, pi) in enumerate(results)}
    summary = summarize(rows, [e["name"] for e in sc.estimators], sc.metrics)
    cfg = sc.to_dict()
    cfg["mechanism_presets"] = {k: list(v) for k, v in MECHANISM_PRESETS.items()}
    return MetricsReport(summary, rows, mechanisms, cfg)


def summarize(rows, names, metrics=ALL_METRICS) -> dict:
    out = {}
    for name in names:
        mine = [r for r in rows if r["estimator"] == name]
        ok = [r for r in mine if not r["failed"]]
        entry = {"n_ok": len(ok), "failures": len(mine) - len(ok)}
        if ok:
            err = np.array([r["abs_error"] for r in ok])
            if "mae" in metrics:
                entry["mae"] = float(err.mean())
                entry["mae_std"] = float(err.std())
            if "bias" in metrics:
                entry["bias"] = float(np.mean([r["value"] - r["truth"] for r in ok]))
            if name in INTERVAL_ESTIMATORS:
                if "width" in metrics:
                    entry["mean_width"] = float(np.mean([r["width"] for r in ok]))
                if "coverage" in metrics:
                    entry["coverage"] = float(np.mean([r["covered"] for r in ok]))
        out[name] = entry
    return out


def dumps_report(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2)
