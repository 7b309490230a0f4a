"""Dataset ingestion and report serialization.

Dataset CSV header: ``subject,stimulus,repetition,score`` (``repetition``
optional, defaults to 0). Dataset JSON: a list of row objects with the same
keys, or ``{"scores": [...]}``.

Reports are JSON (schema ``opinionfit.report/1``, see README) or a trio of
CSV tables. Floats are written in round-trip-exact form.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError
from .legacy import RejectionReport
from .model import ModelParams, MosParams, ScoreTensor
from .solvers import FitReport, Method

REPORT_SCHEMA = "opinionfit.report/1"
CI_MODES = ("mle", "alt", "both")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- datasets ---------------------------------------------------------------

def _score(value, where):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise DataError(f"{where}: score {value!r} is not a number") from None
    if not math.isfinite(x):
        raise DataError(f"{where}: score {value!r} is not finite")
    return x


def _repetition(value, where):
    if value is None or value == "":
        return 0
    try:
        r = int(value)
    except (TypeError, ValueError):
        raise DataError(f"{where}: repetition {value!r} is not an integer") from None
    if r < 0:
        raise DataError(f"{where}: repetition {value!r} must be a non-negative integer")
    return r


def _build(rows, source):
    seen = {}
    for where, key in rows:
        if key[:3] in seen:
            raise DataError(f"{where}: duplicate vote for {key[:3]} (first at {seen[key[:3]]})")
        seen[key[:3]] = where
    if not seen:
        raise DataError(f"{source}: no votes")
    return ScoreTensor.from_records(key for _, key in rows)


def _csv_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for col in ("subject", "stimulus", "score"):
            if col not in header:
                raise DataError(f"{path}: header must contain subject,stimulus,[repetition,]score; got {header}")
        col = {name: header.index(name) for name in header}
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            where = f"{path}:{lineno}"
            if len(rec) != len(header):
                raise DataError(f"{where}: expected {len(header)} fields, got {len(rec)}")
            subject, stimulus = rec[col["subject"]].strip(), rec[col["stimulus"]].strip()
            if not subject or not stimulus:
                raise DataError(f"{where}: empty subject or stimulus")
            rep = _repetition(rec[col["repetition"]].strip(), where) if "repetition" in col else 0
            rows.append((where, (subject, stimulus, rep, _score(rec[col["score"]], where))))
    return rows


def _json_rows(path):
    with open(path) as fh:
        text = fh.read()
    if not text.strip():
        raise DataError(f"{path}: empty file")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(doc, dict):
        doc = doc.get("scores")
    if not isinstance(doc, list):
        raise DataError(f"{path}: expected a list of rows or an object with a 'scores' list")
    rows = []
    for k, rec in enumerate(doc):
        where = f"{path}: row {k}"
        if not isinstance(rec, dict) or not {"subject", "stimulus", "score"} <= rec.keys():
            raise DataError(f"{where}: needs subject, stimulus and score")
        rows.append(
            (where, (str(rec["subject"]), str(rec["stimulus"]), _repetition(rec.get("repetition"), where),
                     _score(rec["score"], where)))
        )
    return rows


def parse_dataset(path, format: Optional[str] = None) -> ScoreTensor:
    """Read a dataset file; indices follow first appearance of each id."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "csv").lower()
    if fmt not in ("csv", "json"):
        raise DataError(f"unsupported dataset format {fmt!r}")
    rows = _csv_rows(path) if fmt == "csv" else _json_rows(path)
    return _build(rows, path)


def write_dataset(scores: ScoreTensor, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "stimulus", "repetition", "score"])
        for subject, stimulus, rep, score in scores.records():
            w.writerow([subject, stimulus, rep, _fmt(score)])


# -- fit reports ------------------------------------------------------------

def _pair(row):
    return [float(row[0]), float(row[1])]


def report_to_dict(report: FitReport, ci: str = "both") -> dict:
    if ci not in CI_MODES:
        raise ValueError(f"ci must be one of {CI_MODES}")
    p = report.params
    model = isinstance(p, ModelParams)
    stimuli = []
    for j, sid in enumerate(report.stimuli):
        rec = {"id": sid, "psi": float(p.psi[j])}
        if not model:
            rec["upsilon_j"] = float(p.upsilon_j[j])
        if ci in ("mle", "both") or not model:
            rec["ci"] = _pair(report.psi_ci[j])
        if model and ci in ("alt", "both"):
            rec["ci2"] = _pair(report.psi_ci2[j])
        stimuli.append(rec)
    rejected = set(report.rejected_subjects)
    subjects = []
    for i, sid in enumerate(report.subjects):
        rec = {"id": sid}
        if model:
            rec.update(
                delta=float(p.delta[i]),
                delta_ci=_pair(report.delta_ci[i]),
                upsilon=float(p.upsilon[i]),
                upsilon_ci=_pair(report.upsilon_ci[i]),
            )
        else:
            rec.update(delta=None if report.bias is None else float(report.bias[i]),
                       delta_ci=None, upsilon=None, upsilon_ci=None)
        rec["rejected"] = i in rejected
        rec["warnings"] = [w for w in report.warnings if w.startswith(f"subject {sid}:") or
                           w.startswith(f"subject {sid} ")]
        subjects.append(rec)
    return {
        "schema": REPORT_SCHEMA,
        "method": report.method.value,
        "ci_mode": ci,
        "scalars": {
            "log_likelihood": float(report.log_likelihood),
            "nbic": float(report.nbic),
            "num_obs": int(report.num_obs),
            "num_params": int(report.num_params),
            "iterations": int(report.iterations),
            "converged": bool(report.converged),
        },
        "stimuli": stimuli,
        "subjects": subjects,
        "rejected_subjects": [report.subjects[i] for i in sorted(rejected)],
        "flagged_subjects": [report.subjects[i] for i in report.flagged_subjects],
        "warnings": list(report.warnings),
    }


def report_from_dict(doc: dict) -> FitReport:
    """Rebuild a :class:`FitReport` from :func:`report_to_dict` output."""
    if doc.get("schema") != REPORT_SCHEMA:
        raise DataError(f"not an {REPORT_SCHEMA} document")
    method = Method(doc["method"])
    st, sb = doc["stimuli"], doc["subjects"]
    sc = doc["scalars"]
    psi = np.array([r["psi"] for r in st])

    def col(records, key):
        if not records or records[0].get(key) is None:
            return None
        return np.array([r[key] for r in records], dtype=np.float64)

    if "upsilon_j" in st[0]:
        params = MosParams(psi, col(st, "upsilon_j"))
    else:
        params = ModelParams(psi, col(sb, "delta"), col(sb, "upsilon"))
    psi_ci = col(st, "ci")
    ids = [r["id"] for r in sb]
    return FitReport(
        method=method,
        subjects=tuple(ids),
        stimuli=tuple(r["id"] for r in st),
        params=params,
        log_likelihood=sc["log_likelihood"],
        nbic=sc["nbic"],
        num_params=sc["num_params"],
        num_obs=sc["num_obs"],
        psi_ci=psi_ci if psi_ci is not None else np.full((psi.size, 2), np.nan),
        iterations=sc["iterations"],
        converged=sc["converged"],
        psi_ci2=col(st, "ci2"),
        delta_ci=col(sb, "delta_ci") if isinstance(params, ModelParams) else None,
        upsilon_ci=col(sb, "upsilon_ci") if isinstance(params, ModelParams) else None,
        bias=col(sb, "delta") if isinstance(params, MosParams) else None,
        rejected_subjects=tuple(ids.index(s) for s in doc["rejected_subjects"]),
        flagged_subjects=tuple(ids.index(s) for s in doc["flagged_subjects"]),
        warnings=tuple(doc["warnings"]),
    )


def write_json(doc, path) -> None:
    text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
    if path is None or str(path) == "-":
        import sys

        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt(v)
    if isinstance(v, list):
        return ";".join(_csv_cell(x) for x in v)
    return str(v)


def _write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_csv_cell(v) for v in row])


def csv_companions(path):
    """Paths of the per-subject and scalar tables written next to ``path``."""
    path = Path(path)
    return path.with_name(path.stem + "_subjects.csv"), path.with_name(path.stem + "_summary.csv")


def emit_report(report: FitReport, path, format: Optional[str] = None, ci: str = "both") -> None:
    """Write a report as JSON, or as CSV tables.

    CSV writes the per-stimulus table to ``path`` plus ``<stem>_subjects.csv``
    and ``<stem>_summary.csv`` beside it.
    """
    doc = report_to_dict(report, ci)
    fmt = (format or Path(str(path)).suffix.lstrip(".") or "json").lower()
    if fmt == "json":
        write_json(doc, path)
        return
    if fmt != "csv":
        raise DataError(f"unsupported report format {fmt!r}")
    st = doc["stimuli"]
    stim_cols = ["id", "psi"] + [k for k in ("upsilon_j",) if k in st[0]]
    for key in ("ci", "ci2"):
        if key in st[0]:
            stim_cols += [f"{key}_lower", f"{key}_upper"]
    rows = []
    for r in st:
        row = [r["id"], r["psi"]] + ([r["upsilon_j"]] if "upsilon_j" in r else [])
        for key in ("ci", "ci2"):
            if key in r:
                row += r[key]
        rows.append(row)
    _write_table(path, stim_cols, rows)
    subj_path, summary_path = csv_companions(path)
    _write_table(
        subj_path,
        ["id", "delta", "delta_ci_lower", "delta_ci_upper", "upsilon", "upsilon_ci_lower",
         "upsilon_ci_upper", "rejected", "warnings"],
        [
            [r["id"], r["delta"], *(r["delta_ci"] or [None, None]), r["upsilon"],
             *(r["upsilon_ci"] or [None, None]), r["rejected"], r["warnings"]]
            for r in doc["subjects"]
        ],
    )
    _write_table(summary_path, ["key", "value"], [["method", doc["method"]], *doc["scalars"].items()])


def load_report(path) -> FitReport:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid report JSON ({exc})") from None
    return report_from_dict(doc)


# -- other documents --------------------------------------------------------

def rejection_to_dict(rej: RejectionReport, scores: ScoreTensor) -> dict:
    return {
        "schema": "opinionfit.rejection/1",
        "subjects": [
            {
                "id": sid,
                "p": int(rej.p[i]),
                "q": int(rej.q[i]),
                "votes": int(rej.votes[i]),
                "ratio1": float(rej.ratio1[i]),
                "ratio2": None if np.isnan(rej.ratio2[i]) else float(rej.ratio2[i]),
                "rejected": i in rej.rejected,
            }
            for i, sid in enumerate(scores.subjects)
        ],
        "rejected_subjects": [scores.subjects[i] for i in sorted(rej.rejected)],
        "flagged_cells": [{"stimulus": scores.stimuli[j], "repetition": r} for j, r in rej.flagged_cells],
    }
