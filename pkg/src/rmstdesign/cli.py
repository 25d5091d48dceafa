"""Command-line interface: ``rmst-design <command> ...``.

Exit codes: 0 success, 2 target power unreachable, 64 usage error,
65 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .augmentation import stepwise_select
from .datamodel import load_csv, write_csv
from .design import COMMON_CENSORING_NOTE, design_inputs_from_data, design_stage, midtrial_recalc, power_from_variance
from .errors import DataError, NegativeVariance, RmstError, TargetUnreachable
from .inference import analyze

EXIT_OK = 0
EXIT_UNREACHABLE = 2
EXIT_USAGE = 64
EXIT_DATA = 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- helpers

def _csv_list(text):
    return tuple(s.strip() for s in text.split(",") if s.strip()) if text else ()


def _grid(text):
    try:
        start, step, stop = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:step:max, got {text!r}") from None
    return start, step, stop


def _groups(text):
    """``a,b,f=f2+f3`` -> ["a", "b", ("f2", "f3")]; columns flattened separately."""
    cands, cols = [], []
    for item in _csv_list(text):
        if "=" in item:
            _, members = item.split("=", 1)
            group = tuple(m.strip() for m in members.split("+") if m.strip())
            cands.append(group)
            cols.extend(group)
        else:
            cands.append(item)
            cols.append(item)
    return cands, tuple(dict.fromkeys(cols))


def _header(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [h.strip() for h in next(csv.reader(fh), [])]


def _emit(fmt, meta, columns, rows, out, extra=None):
    """Write a header block plus a table in the requested format."""
    if fmt == "json":
        payload = dict(meta)
        if extra:
            payload.update(extra)
        payload["rows"] = [dict(zip(columns, r)) for r in rows]
        json.dump(payload, out, indent=2, default=str)
        out.write("\n")
        return
    if fmt == "csv":
        for k, v in list(meta.items()) + list((extra or {}).items()):
            out.write(f"# {k}: {v}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
        return
    for k, v in list(meta.items()) + list((extra or {}).items()):
        out.write(f"{k}: {v}\n")
    cells = [[str(c) for c in columns]] + [[_cell(x) for x in r] for r in rows]
    width = [max(len(r[j]) for r in cells) for j in range(len(columns))]
    for r in cells:
        out.write("  ".join(c.rjust(w) for c, w in zip(r, width)) + "\n")


def _cell(x):
    if isinstance(x, float):
        return f"{x:.4f}" if abs(x) < 1e4 else f"{x:.6g}"
    return "" if x is None else str(x)


def _meta(args):
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "format")}
    return {"command": args.command, "version": __version__,
            "flags": json.dumps(flags, default=str, sort_keys=True)}


# ---------------------------------------------------------------- commands

def _design_report(args, report, out):
    meta = _meta(args)
    extra = {
        "subjects": report.n_subjects,
        "events": report.n_events,
        "S0(tau)": f"{report.s0_tau:.4f}",
        "G(tau)": f"{report.g_tau:.4f}",
        "sigma2": f"{report.sigma2:.6g}",
        "e2": f"{report.e2:.6g}",
        "covariates": ",".join(report.covariates) or "(none)",
        "v_at_recommended": "" if report.v_at_recommended is None else f"{report.v_at_recommended:.6g}",
        "recommended_n": report.curve.recommended_n if report.curve.reached else "not reached",
        "note": COMMON_CENSORING_NOTE,
    }
    rows = [(n, p) for n, p in report.curve.rows]
    _emit(args.format, meta, ("n", "power"), rows, out, extra)
    return EXIT_OK if report.curve.reached else EXIT_UNREACHABLE


def cmd_design(args, out):
    covs = _csv_list(args.covariates)
    d = load_csv(args.reference, covariate_columns=covs, drop_missing=args.drop_missing)
    start, step, stop = args.n_grid
    report = design_stage(d, args.tau, args.delta, args.alpha, args.power, args.pi,
                          covs or None, start, step, stop)
    return _design_report(args, report, out)


def cmd_recalc(args, out):
    covs = _csv_list(args.covariates)
    if args.arm in _header(args.blinded) and not args.force_ignore_arm:
        raise DataError(f"{args.blinded}: contains arm column {args.arm!r}; "
                        "refusing to unblind (use --force-ignore-arm to proceed)")
    d = load_csv(args.blinded, covariate_columns=covs, drop_missing=args.drop_missing)
    start, step, stop = args.n_grid
    report = midtrial_recalc(d, args.tau, args.delta, args.alpha, args.power, args.pi,
                             covs or None, start if args.n_grid_set else None, step, stop)
    return _design_report(args, report, out)


def cmd_analyze(args, out):
    covs = _csv_list(args.covariates)
    d = load_csv(args.data, arm_column=args.arm, covariate_columns=covs, drop_missing=args.drop_missing)
    results = analyze(d, args.tau, args.alpha, args.pi, covs or None, args.variance)
    rows = [(r.method, r.estimate, r.std_error, r.ci[0], r.ci[1], r.z_value, r.p_value) for r in results]
    _emit(args.format, _meta(args), ("method", "estimate", "se", "ci_lower", "ci_upper", "z", "p"),
          rows, out, {"subjects": d.n, "dropped": d.dropped})
    return EXIT_OK


def cmd_select(args, out):
    cands, cols = _groups(args.candidates)
    if not cands:
        raise UsageError("--candidates is empty")
    d = load_csv(args.reference, covariate_columns=cols, drop_missing=args.drop_missing)
    power_at = None
    if args.at_n is not None:
        if args.delta is None:
            raise UsageError("--at-n needs --delta")
        base = design_inputs_from_data(d, args.tau, args.delta, args.alpha, pi=args.pi)

        def _power(e2):
            try:
                return power_from_variance(args.delta, base.sigma2, args.at_n, args.alpha, args.pi, e2)
            except NegativeVariance:
                return None
        power_at = _power
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        trace = stepwise_select(d, args.tau, cands, power_at, args.pi)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    rows = [(s.step, s.added or "(none)", s.e2, s.power) for s in trace]
    _emit(args.format, _meta(args), ("step", "variable", "e2", "power"), rows, out)
    return EXIT_OK


def cmd_simulate(args, out):
    from . import mcharness
    from .simulation import ReferenceKind, generate

    if args.dump:
        from .simulation import ScenarioSpec
        spec = ScenarioSpec(args.scenario, args.n, ReferenceKind(args.reference), seed=args.seed)
        dump = Path(args.dump)
        dump.mkdir(parents=True, exist_ok=True)
        for r in range(args.reps):
            target, ref = generate(spec, r)
            write_csv(target, dump / f"{args.scenario}_rep{r}.csv")
            if ref is not None:
                write_csv(ref, dump / f"{args.scenario}_rep{r}_reference.csv")
        print(f"wrote {args.reps} replication(s) to {dump}", file=sys.stderr)
        return EXIT_OK
    if args.table == 1:
        row = mcharness.table1_run(args.scenario, args.n, args.reps, args.reference_reps,
                                   args.seed, args.alpha, workers=args.workers).as_dict()
    else:
        row = mcharness.table2_run(args.scenario, args.n_mid, args.power, args.reps, args.method,
                                   args.seed, alpha=args.alpha, workers=args.workers).as_dict()
    _emit(args.format, _meta(args), tuple(row), [tuple(row.values())], out)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rmst-design", description="RMST trial design, re-estimation and analysis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=True):
        sp.add_argument("--format", choices=("table", "csv", "json"), default="table")
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--pi", type=float, default=0.5)
        if data:
            sp.add_argument("--tau", type=float, required=True)
            sp.add_argument("--drop-missing", action="store_true",
                            help="drop rows with missing values in the used columns")

    def sizing(sp):
        sp.add_argument("--delta", type=float, required=True, help="RMST difference to detect")
        sp.add_argument("--power", type=float, default=0.8)
        sp.add_argument("--covariates", default="")
        sp.add_argument("--n-grid", type=_grid, default=None, help="start:step:max")

    sp = sub.add_parser("design", help="size a study from reference data")
    sp.add_argument("--reference", required=True)
    common(sp)
    sizing(sp)
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("recalc", help="blinded mid-trial sample size recalculation")
    sp.add_argument("--blinded", required=True)
    sp.add_argument("--arm", default="arm", help="name of the arm column that must be absent")
    sp.add_argument("--force-ignore-arm", action="store_true")
    common(sp)
    sizing(sp)
    sp.set_defaults(func=cmd_recalc)

    sp = sub.add_parser("analyze", help="final analysis")
    sp.add_argument("--data", required=True)
    sp.add_argument("--arm", required=True)
    sp.add_argument("--covariates", default="")
    sp.add_argument("--variance", choices=("influence", "plugin"), default="influence")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("select", help="stepwise covariate selection")
    sp.add_argument("--reference", required=True)
    sp.add_argument("--candidates", required=True, help="a,b,factor=f2+f3")
    sp.add_argument("--at-n", type=int, default=None)
    sp.add_argument("--delta", type=float, default=None)
    common(sp)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("simulate", help="Monte Carlo operating characteristics")
    sp.add_argument("--table", type=int, choices=(1, 2), default=1)
    sp.add_argument("--scenario", required=True,
                    choices=[f"sData{m}{v}" for m in (1, 2, 3) for v in "ab"])
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--reference-reps", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--n", type=int, default=500, help="trial size (table 1, --dump)")
    sp.add_argument("--n-mid", type=int, default=200)
    sp.add_argument("--power", type=float, default=0.8)
    sp.add_argument("--method", choices=("unadjusted", "augmented"), default="unadjusted")
    sp.add_argument("--dump", default=None, help="write generated datasets to this directory")
    sp.add_argument("--reference", choices=("none", "correctly_matched", "mis_matched"), default="none")
    common(sp, data=False)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "n_grid"):
            args.n_grid_set = args.n_grid is not None
            if args.n_grid is None:
                args.n_grid = (10, 10, 2000)
        return args.func(args, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TargetUnreachable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except (DataError, RmstError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
