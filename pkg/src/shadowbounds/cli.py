"""Command-line interface.

Every subcommand writes its report to ``--out`` (printing the path) or to
stdout with ``--stdout``. Errors go to stderr with a nonzero exit status.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import os
import sys
import time

from . import causal, diagnostics, simlab
from . import io as sio
from .bounds_base import DataInconsistencyError, base_bounds, stratified_bounds
from .bounds_shadow import aggregate_shadow_bounds, aggregation_gap_lower_bounds
from .lp_core import SolverStalled
from .set_expansion import ExpansionConfig, estimate
from .tables import estimate_tables

EXIT_ERROR = 1


class CliError(ValueError):
    pass


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="seed (overrides config files)")
    p.add_argument("--out", default=None, help="output path")
    p.add_argument("--stdout", action="store_true", help="print the output body instead of a path")
    p.add_argument("--threads", type=_nonneg_int, default=1, help="worker threads, 0 = one per CPU")
    p.add_argument("--timing", action="store_true", help="add wall-clock timing to the report")


def _support(p):
    p.add_argument("--M", type=int, default=5, help="outcome levels (default 5)")
    p.add_argument("--M-F", dest="M_F", type=int, default=None, help="prediction levels (default M)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowbounds",
                                     description="Bounds on a mean outcome under outcome-dependent missingness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="worst-case and shadow-variable bounds with diagnostics")
    p.add_argument("data")
    _support(p)
    _common(p)

    p = sub.add_parser("estimate", help="set-expansion bounds")
    p.add_argument("data")
    _support(p)
    p.add_argument("--kappa", type=float, default=0.5, help="constant kappa (default 0.5)")
    p.add_argument("--kappa-rule", choices=("constant", "log", "loglog"), default="constant")
    p.add_argument("--C", type=_positive, default=50.0, help="box bound on 1/pi - 1 (default 50)")
    _common(p)

    p = sub.add_parser("simulate", help="draw records from a DGP config")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("mask", help="mask a fully labeled CSV with a response mechanism")
    p.add_argument("data")
    p.add_argument("--mechanism", required=True,
                   help="preset name or comma-separated response probabilities")
    p.add_argument("--keep-truth", action="store_true", help="add a y_true column")
    _common(p)

    p = sub.add_parser("benchmark", help="run a benchmark scenario")
    p.add_argument("config")
    p.add_argument("--plot-csv", default=None, help="per-replication plot data (default: <out>.plot.csv)")
    _common(p)

    p = sub.add_parser("diagnose", help="completeness diagnostics of the prediction")
    p.add_argument("data")
    _support(p)
    p.add_argument("--labeled", default=None, help="fully labeled CSV used to estimate P(F, Y)")
    _common(p)

    p = sub.add_parser("ate", help="treatment-effect bounds and sign tests")
    p.add_argument("data")
    _support(p)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--C", type=_positive, default=50.0)
    p.add_argument("--assume-equal-response", action="store_true",
                   help="assert equal response mechanisms across arms for the single-crossing test")
    _common(p)
    return parser


def _m_f(args):
    return args.M if args.M_F is None else args.M_F


def _interval(iv):
    return {"lo": iv.lo, "hi": iv.hi, "width": iv.width}


def cmd_bounds(args):
    rec, _ = sio.read_records_csv(args.data)
    pop = estimate_tables(rec, args.M, _m_f(args))
    res = {"n": len(rec), "strata": len(pop.strata),
           "base": _interval(stratified_bounds(pop)), "base_pooled": _interval(base_bounds(pop))}
    warnings = list(pop.warnings)
    if rec.f is not None:
        try:
            rep = aggregate_shadow_bounds(pop, force=True)
            res["shadow"] = _interval(rep.aggregate)
        except DataInconsistencyError as exc:
            res["shadow"] = None
            warnings.append(f"shadow constraints infeasible on the empirical tables ({exc}); "
                            "use the estimate command")
        up, low, flags = aggregation_gap_lower_bounds(pop)
        res["gap_lower_bounds"] = {"upper": up, "lower": low}
        warnings.extend(f"stratum {sid}: {which} gap bound uses 0 ({why})" for sid, which, why in flags)
        res["diagnostics"] = diagnostics.completeness_report(pop).to_dict()
    config = {"M": args.M, "M_F": _m_f(args)}
    return res, config, {"data": args.data}, warnings


def cmd_estimate(args):
    rec, _ = sio.read_records_csv(args.data)
    cfg = ExpansionConfig(C=args.C, kappa_rule=args.kappa_rule, kappa_value=args.kappa)
    pop = estimate_tables(rec, args.M, _m_f(args))
    rep = estimate(pop, cfg)
    res = {"interval": _interval(rep.aggregate), "midpoint": rep.aggregate.midpoint,
           "binds_C": rep.aggregate.meta["binds_C"],
           "strata": [{"stratum": s.stratum, "slack": s.slack, "margin": s.margin,
                       "lo": s.interval.lo, "hi": s.interval.hi} for s in rep.per_stratum]}
    config = {"M": args.M, "M_F": _m_f(args), "C": args.C, "kappa_rule": args.kappa_rule,
              "kappa": args.kappa}
    warnings = list(pop.warnings)
    if res["binds_C"]:
        warnings.append("the box bound C is active; results depend on C")
    return res, config, {"data": args.data}, warnings


def cmd_simulate(args):
    raw = sio.load_json(args.config)
    if args.seed is not None:
        raw = dict(raw, seed=args.seed)
    dgp = simlab.DgpConfig.from_dict(raw)
    return sio.records_to_csv(simlab.generate(dgp))


def _parse_mechanism(text):
    if text in simlab.MECHANISM_PRESETS:
        return {"kind": "preset", "name": text}
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"unknown mechanism {text!r}; presets: {sorted(simlab.MECHANISM_PRESETS)}") from None


def cmd_mask(args):
    data = sio.read_labeled_csv(args.data)
    rec, truth = simlab.mask(data, _parse_mechanism(args.mechanism), seed=args.seed or 0)
    return sio.records_to_csv(rec, truth.outcomes() if args.keep_truth else None)


def cmd_benchmark(args):
    raw = sio.load_json(args.config)
    if args.seed is not None:
        raw = dict(raw, seed=args.seed)
    files = {}
    ds = raw.get("dataset")
    if ds and "path" in ds:
        # paths in a config are relative to the config file
        path = ds["path"]
        if not os.path.isabs(path):
            path = os.path.join(os.path.dirname(os.path.abspath(args.config)), path)
        raw = dict(raw, dataset=dict(ds, path=path))
        files["dataset"] = path
    sc = simlab.ScenarioConfig.from_dict(raw)
    report = simlab.run_benchmark(sc, threads=args.threads)
    config = dict(raw)
    if ds and "path" in ds:
        config["dataset"] = ds
    res = {"summary": report.summary, "mechanisms": {str(k): v for k, v in report.mechanisms.items()},
           "mechanism_presets": report.config["mechanism_presets"], "rows": report.rows}
    return res, config, files, [], report


PLOT_FIELDS = ("rep", "estimator", "truth", "value", "lo", "hi", "covered", "failed")


def plot_csv(rows) -> str:
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(PLOT_FIELDS)
    for r in rows:
        w.writerow(["" if r.get(k) is None else (int(r[k]) if isinstance(r.get(k), bool) else r[k])
                    for k in PLOT_FIELDS])
    return out.getvalue()


def cmd_diagnose(args):
    rec, _ = sio.read_records_csv(args.data)
    files = {"data": args.data}
    labeled = None
    if args.labeled:
        lab = sio.read_labeled_csv(args.labeled)
        labeled = (lab.y, lab.f)
        files["labeled"] = args.labeled
    rep = diagnostics.completeness_report(rec, labeled=labeled, M=args.M, M_F=_m_f(args))
    res = rep.to_dict()
    res["B"] = rep.B
    if rep.H is not None:
        res["H"] = rep.H
    return res, {"M": args.M, "M_F": _m_f(args)}, files, list(rep.flags)


def cmd_ate(args):
    rec, _ = sio.read_records_csv(args.data)
    arms = causal.arm_tables(rec, args.M, _m_f(args))
    cfg = ExpansionConfig(C=args.C, kappa_value=args.kappa)
    st_wc = causal.sign_test_worst_case(arms)
    st_sc = causal.sign_test_single_crossing(arms, assume_equal_response=args.assume_equal_response)
    res = {"n0": arms.n0, "n1": arms.n1,
           "ate_bounds": _interval(causal.ate_bounds(arms)),
           "set_expansion": _interval(causal.ate_set_expansion(arms, cfg)),
           "sign_test_worst_case": {"holds": st_wc.holds, "margin": st_wc.margin},
           "sign_test_single_crossing": {"applicable": st_sc.applicable, "holds": st_sc.holds,
                                         "margin": st_sc.margin, "crossing_point": st_sc.crossing_point,
                                         **st_sc.meta}}
    warnings = []
    if st_sc.applicable and not args.assume_equal_response:
        warnings.append("single-crossing pattern found; its conclusion needs equal response "
                        "mechanisms across arms (pass --assume-equal-response to assert it)")
    config = {"M": args.M, "M_F": _m_f(args), "C": args.C, "kappa": args.kappa,
              "assume_equal_response": args.assume_equal_response}
    return res, config, {"data": args.data}, warnings


REPORT_COMMANDS = {"bounds": cmd_bounds, "estimate": cmd_estimate, "diagnose": cmd_diagnose,
                   "ate": cmd_ate, "benchmark": cmd_benchmark}
CSV_COMMANDS = {"simulate": cmd_simulate, "mask": cmd_mask}


def _emit(args, body: str):
    if args.stdout or args.out is None:
        sys.stdout.write(body)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(body)
        print(args.out)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        if args.command in CSV_COMMANDS:
            _emit(args, CSV_COMMANDS[args.command](args))
            return 0
        out = REPORT_COMMANDS[args.command](args)
        res, config, files, warnings = out[:4]
        if args.seed is not None:
            config = dict(config, seed=args.seed)
        timing = {"seconds": time.perf_counter() - start} if args.timing else None
        report = sio.build_report(args.command, config, files, res, warnings, timing)
        if args.command == "benchmark":
            plot_path = args.plot_csv or (args.out + ".plot.csv" if args.out else None)
            if plot_path:
                with open(plot_path, "w", encoding="utf-8", newline="") as fh:
                    fh.write(plot_csv(out[4].rows))
        _emit(args, sio.dumps(report))
        return 0
    except (ValueError, RuntimeError, OSError, SolverStalled) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
