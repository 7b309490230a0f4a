"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Diagnostics go to stderr; results go to ``--out`` (``-`` for stdout).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import compare_fits
from .errors import DataError, NumericalError
from .io import emit_report, load_report, parse_dataset, rejection_to_dict, write_json
from .legacy import bt500_reject
from .solvers import Method, SolverConfig, fit
from .synthetic import (
    PanelLayout,
    coverage_experiment,
    generate_synthetic,
    random_model_params,
    robustness_experiment,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("opinionfit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="opinionfit", description="Recover quality scores from raw opinion scores.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver details to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="estimate quality scores")
    f.add_argument("dataset")
    f.add_argument("--method", choices=[m.value for m in Method], default="ap")
    f.add_argument("--ci", choices=["mle", "alt", "both"], default="both")
    f.add_argument("--alpha", type=float, default=0.1, help="NR refresh rate")
    f.add_argument("--threshold", type=float, default=None, help="psi stop threshold")
    f.add_argument("--max-iterations", type=int, default=10000)
    f.add_argument("--format", choices=["json", "csv"], default=None, help="default: from --out suffix")
    f.add_argument("--out", required=True)

    r = sub.add_parser("reject", help="BT.500 subject rejection report")
    r.add_argument("dataset")
    r.add_argument("--out", required=True)

    s = sub.add_parser("simulate", help="run a simulation study")
    s.add_argument("study", choices=["robustness", "coverage"])
    s.add_argument("--config", required=True, help="JSON study configuration")
    s.add_argument("--seed", type=_u64, default=0)
    s.add_argument("--out", required=True)

    c = sub.add_parser("compare", help="compare the quality scores of two reports")
    c.add_argument("report_a")
    c.add_argument("report_b")
    c.add_argument("--out", required=True)
    return p


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _cmd_fit(args) -> int:
    scores = parse_dataset(args.dataset)
    try:
        config = SolverConfig(alpha=args.alpha, psi_threshold=args.threshold, max_iterations=args.max_iterations)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = fit(scores, args.method, config)
    for w in report.warnings:
        log.warning(w)
    emit_report(report, args.out, format=args.format, ci=args.ci)
    log.info("%s: nbic=%.4f iterations=%d", report.method.value, report.nbic, report.iterations)
    return EXIT_OK


def _cmd_reject(args) -> int:
    scores = parse_dataset(args.dataset)
    write_json(rejection_to_dict(bt500_reject(scores), scores), args.out)
    return EXIT_OK


def _load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise DataError(f"{path}: config must be a JSON object")
    return cfg


def _panel(cfg, seed, base: Path):
    panel = cfg.get("panel", {"synthetic": {}})
    if "dataset" in panel:
        ds = Path(panel["dataset"])
        return parse_dataset(ds if ds.is_absolute() else base / ds)
    syn = dict(panel.get("synthetic", {}))
    I, J = int(syn.get("subjects", 26)), int(syn.get("stimuli", 79))
    pseed = int(syn.get("seed", seed))
    params = random_model_params(
        I, J, (pseed, 0),
        psi_range=tuple(syn.get("psi_range", (1.0, 5.0))),
        bias_sd=float(syn.get("bias_sd", 0.5)),
        upsilon_range=tuple(syn.get("upsilon_range", (0.3, 1.2))),
    )
    layout = PanelLayout(I, J, int(syn.get("repetitions", 1)), float(syn.get("missing_fraction", 0.0)), pseed)
    return generate_synthetic(params, layout)


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    scores = _panel(cfg, args.seed, Path(args.config).resolve().parent)
    out = Path(args.out)
    if args.study == "robustness":
        methods = cfg.get("methods", ["mos", "bt500", "p913", "ap"])
        counts = cfg.get("corrupt_counts", [0, 2, 4, 6, 8])
        probs = cfg.get("probs", [cfg.get("prob", 1.0)])
        runs = int(cfg.get("runs", 10))
        curves, rows = [], []
        for prob in probs:
            res = robustness_experiment(scores, methods, counts, prob, runs, args.seed)
            mean = res.mean_rmse
            curves.append({
                "prob": res.prob,
                "corrupt_counts": res.corrupt_counts,
                "mean_rmse": {m: [_num(x) for x in mean[m]] for m in res.methods},
                "rmse_runs": {m: [[_num(x) for x in row] for row in res.rmse[m]] for m in res.methods},
                "errors": res.errors,
            })
            for m in res.methods:
                for c, v in zip(res.corrupt_counts, mean[m]):
                    rows.append([res.prob, c, m, _num(v)])
        write_json({"schema": "opinionfit.robustness/1", "seed": args.seed, "runs": runs, "curves": curves}, out)
        _write_plot_csv(out, ["prob", "corrupt_count", "method", "mean_rmse"], rows)
    else:
        method = cfg.get("method", "ap")
        runs = int(cfg.get("runs", 100))
        res = coverage_experiment(scores, method, runs, args.seed)
        write_json({
            "schema": "opinionfit.coverage/1",
            "method": res.method,
            "seed": args.seed,
            "runs": res.runs,
            "coverage": res.coverage,
            "coverage_per_run": {k: v.tolist() for k, v in res.coverage_per_run.items()},
            "rmse_psi": res.rmse_psi.tolist(),
            "mean_iterations": float(res.iterations.mean()),
        }, out)
        _write_plot_csv(
            out, ["run", *res.coverage_per_run, "rmse_psi", "iterations"],
            [[k, *(res.coverage_per_run[c][k] for c in res.coverage_per_run), res.rmse_psi[k],
              int(res.iterations[k])] for k in range(res.runs)],
        )
        log.info("mean runtime per fit: %.3g s", float(res.runtime_seconds.mean()))
    return EXIT_OK


def _num(x):
    return None if np.isnan(x) else float(x)


def _write_plot_csv(out: Path, header, rows):
    if str(out) == "-":
        return
    with open(out.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (format(v, ".17g") if isinstance(v, float) else v) for v in row])


def _cmd_compare(args) -> int:
    a, b = load_report(args.report_a), load_report(args.report_b)
    if set(a.stimuli) != set(b.stimuli):
        raise DataError("reports cover different stimuli")
    order = [b.stimuli.index(s) for s in a.stimuli]
    cmp = compare_fits(a.psi, b.psi[order])
    write_json({"schema": "opinionfit.comparison/1", "a": args.report_a, "b": args.report_b, **cmp.__dict__},
               args.out)
    return EXIT_OK


_COMMANDS = {"fit": _cmd_fit, "reject": _cmd_reject, "simulate": _cmd_simulate, "compare": _cmd_compare}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s: %(message)s", level=logging.WARNING)
    try:
        args = _build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        if isinstance(exc, OSError) and exc.filename is not None:
            print(f"error: cannot access {exc.filename}: {exc.strerror}", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
