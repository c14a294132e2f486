"""CSV serialization for run traces and certification reports.

UTF-8, LF line endings, a mandatory header row, floats written with
``repr`` (shortest representation that round-trips a 64-bit double).
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .errors import TraceError
from .solvers import IterationRecord

TRACE_COLUMNS = ("k", "f", "gap", "grad_norm", "alpha", "gamma", "lambda", "dist_to_opt", "wall_ns")
CERT_COLUMNS = ("k", "lambda", "lemma4_exp", "lemma4_poly", "thm1_bound", "gap", "violated")


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _rows_to_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def trace_text(records) -> str:
    return _rows_to_text(TRACE_COLUMNS, (
        (r.k, r.f, r.gap, r.grad_norm, r.alpha, r.gamma, r.lam, r.dist_to_opt, r.wall_ns)
        for r in records))


def write_trace(records, path) -> None:
    _write(path, trace_text(records))


def read_trace(path) -> list[IterationRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceError(f"{path}: empty file, header row missing") from None
        if tuple(header) != TRACE_COLUMNS:
            raise TraceError(f"{path}: unexpected header {header}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(TRACE_COLUMNS):
                raise TraceError(f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} fields")
            try:
                k, f, gap, gn, a, g, lam, d, wall = row
                out.append(IterationRecord(
                    k=int(k), f=float(f), gap=float(gap), grad_norm=float(gn), alpha=float(a),
                    gamma=float(g), lam=float(lam), dist_to_opt=float(d), wall_ns=int(wall),
                    beta_mass=math.nan))
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from exc
    return out


def certificate_text(reports) -> str:
    return _rows_to_text(CERT_COLUMNS, (
        (r.k, r.lam, r.lemma4_exp_bound, r.lemma4_poly_bound, r.theorem1_bound,
         r.observed_gap, r.violated) for r in reports))


def write_certificate(reports, path) -> None:
    _write(path, certificate_text(reports))


def write_json(obj, path) -> None:
    _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
