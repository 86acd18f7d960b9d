"""File formats: record CSVs, JSON configs and JSON reports.

Record CSV: UTF-8, comma separated, header drawn from
``stratum,f,r,y,d,y_true`` (``r`` and ``y`` required). ``y`` is empty
exactly when ``r = 0``. ``y_true`` holds the unmasked outcome and is only
read by commands that compute metrics.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from typing import Optional

import numpy as np

from .tables import DataError, Records

SCHEMA_VERSION = "1.0"
CSV_COLUMNS = ("stratum", "f", "r", "y", "d", "y_true")


def _parse_int(text, line, col):
    try:
        return int(text)
    except ValueError:
        raise DataError(f"line {line}: column {col!r} must be an integer, got {text!r}") from None


def _read_rows(source):
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    reader = csv.reader(_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("line 1: empty file, expected a header") from None
    header = [h.strip() for h in header]
    seen = set()
    for h in header:
        if h in seen:
            raise DataError(f"line 1: duplicate column {h!r}")
        seen.add(h)
    unknown = [h for h in header if h not in CSV_COLUMNS]
    if unknown:
        raise DataError(f"line 1: unknown column(s) {unknown}")
    rows = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        rows.append((line, dict(zip(header, (c.strip() for c in row)))))
    return header, rows


def _stratum_column(values):
    if all(v == "" for v in values):
        return None
    if any(v == "" for v in values):
        raise DataError("stratum column is partly empty")
    try:
        return np.array([int(v) for v in values], dtype=np.int64)
    except ValueError:
        return np.array(values, dtype=object)


def read_records_csv(source, allow_truth: bool = False):
    """Parse a record CSV.

    Returns
    -------
    records : Records
    y_true : ndarray or None
        Only when ``allow_truth`` is set and the column exists.
    """
    header, rows = _read_rows(source)
    if "r" not in header or "y" not in header:
        raise DataError("line 1: columns 'r' and 'y' are required")
    if "y_true" in header and not allow_truth:
        raise DataError("line 1: column 'y_true' is only accepted by the benchmark command")
    if not rows:
        raise DataError("no data rows")
    r = np.empty(len(rows), dtype=np.int64)
    y = np.zeros(len(rows), dtype=np.int64)
    f = np.empty(len(rows), dtype=np.int64) if "f" in header else None
    d = np.empty(len(rows), dtype=np.int64) if "d" in header else None
    yt = np.empty(len(rows), dtype=np.int64) if "y_true" in header else None
    for i, (line, row) in enumerate(rows):
        r[i] = _parse_int(row["r"], line, "r")
        if r[i] not in (0, 1):
            raise DataError(f"line {line}: r must be 0 or 1")
        if r[i] == 1:
            if row["y"] == "":
                raise DataError(f"line {line}: y is empty but r = 1")
            y[i] = _parse_int(row["y"], line, "y")
            if y[i] < 1:
                raise DataError(f"line {line}: y must be >= 1")
        elif row["y"] != "":
            raise DataError(f"line {line}: y must be empty when r = 0")
        if f is not None:
            f[i] = _parse_int(row["f"], line, "f")
        if d is not None:
            d[i] = _parse_int(row["d"], line, "d")
            if d[i] not in (0, 1):
                raise DataError(f"line {line}: d must be 0 or 1")
        if yt is not None:
            yt[i] = _parse_int(row["y_true"], line, "y_true")
            if r[i] == 1 and yt[i] != y[i]:
                raise DataError(f"line {line}: y_true disagrees with observed y")
    stratum = _stratum_column([row.get("stratum", "") for _, row in rows]) if "stratum" in header else None
    return Records(r, y, f, stratum, d), yt


def read_labeled_csv(source):
    """Fully labeled dataset: every row needs ``y`` (or ``y_true``) and ``f``."""
    from .simlab import LabeledData

    rec, yt = read_records_csv(source, allow_truth=True)
    if rec.f is None:
        raise DataError("labeled dataset needs an f column")
    y = yt if yt is not None else rec.y
    if np.any(y < 1):
        raise DataError(f"record {int(np.flatnonzero(y < 1)[0])}: outcome missing in a labeled dataset")
    return LabeledData(y, rec.f, rec.stratum)


def records_to_csv(records: Records, y_true=None) -> str:
    cols = []
    if records.stratum is not None:
        cols.append(("stratum", records.stratum))
    if records.f is not None:
        cols.append(("f", records.f))
    cols.append(("r", records.r))
    cols.append(("y", records.y))
    if records.d is not None:
        cols.append(("d", records.d))
    if y_true is not None:
        cols.append(("y_true", np.asarray(y_true)))
    out = _io.StringIO()
    out.write(",".join(name for name, _ in cols) + "\n")
    for i in range(len(records)):
        cells = []
        for name, col in cols:
            v = col[i]
            if name == "y" and records.r[i] == 0:
                cells.append("")
            else:
                cells.append(str(v))
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def write_records_csv(path, records: Records, y_true=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records, y_true))


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_default)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _fix(obj, flagged, path=""):
    if isinstance(obj, dict):
        return {str(k): _fix(v, flagged, f"{path}.{k}" if path else str(k)) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_fix(v, flagged, f"{path}[{i}]") for i, v in enumerate(obj)]
    if isinstance(obj, np.ndarray):
        return _fix(obj.tolist(), flagged, path)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            flagged.append(path)
            return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def build_report(command: str, config: dict, files: dict, results: dict,
                 warnings: Optional[list] = None, timing: Optional[dict] = None) -> dict:
    """Assemble a report; non-finite numbers become strings and are listed under ``nonfinite``."""
    flagged: list = []
    clean = _fix(results, flagged)
    rep = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "inputs": {"config": _fix(config, []), "config_hash": config_hash(_fix(config, [])),
                   "files": {name: file_digest(p) for name, p in sorted(files.items())}},
        "results": clean,
        "nonfinite": flagged,
        "warnings": list(warnings or []),
    }
    if timing is not None:
        rep["timing"] = timing
    return rep


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"
