"""CSV reading and writing for streams, traces and run manifests.

Input files carry one header line and comma-separated decimal values::

    t,y                 response series
    t,y,x1,...,xd       responses with features
    t,score             precomputed nonconformity scores

A trace file written by :func:`write_trace` is also accepted as input; its
``score`` (and, for replays, ``radius``) columns are read.

Floats are written with ``repr`` so that re-reading a file reproduces every
value exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np

TRACE_COLUMNS = ("t", "y", "y_hat", "score", "radius", "lower", "upper", "covered", "width",
                 "g", "wealth")


class DataError(ValueError):
    """Malformed input; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass
class InputStream:
    t: np.ndarray
    y: Optional[np.ndarray] = None
    X: Optional[np.ndarray] = None
    score: Optional[np.ndarray] = None
    radius: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.t)


def _classify(header):
    if header[:1] != ["t"]:
        raise DataError("first column must be 't'", 1)
    if tuple(header) == TRACE_COLUMNS:
        return "trace"
    if header == ["t", "score"]:
        return "score"
    if header[:2] == ["t", "y"]:
        rest = header[2:]
        if rest != [f"x{i}" for i in range(1, len(rest) + 1)]:
            raise DataError("feature columns must be named x1, x2, ...", 1)
        return "features" if rest else "series"
    raise DataError("header must be 't,y', 't,y,x1,...,xd' or 't,score'", 1)


def _number(text: str, line: int, column: str, allow_empty=False) -> float:
    if allow_empty and text == "":
        return math.nan
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"column {column!r}: cannot parse {text!r} as a number", line) from None
    if not math.isfinite(v):
        raise DataError(f"column {column!r}: non-finite value {text!r}", line)
    return v


def read_stream(path) -> InputStream:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty file", 1) from None
        kind = _classify(header)
        rows = []
        for line, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(rec)}", line)
            if kind == "trace":
                i_t, i_s, i_r = (header.index(c) for c in ("t", "score", "radius"))
                vals = [_number(rec[i_t], line, "t"), _number(rec[i_s], line, "score"),
                        _number(rec[i_r], line, "radius")]
            else:
                vals = [_number(v, line, h) for v, h in zip(rec, header)]
            if kind in ("score", "trace") and vals[1] < 0:
                raise DataError("scores must be nonnegative", line)
            rows.append(vals)
    data = np.array(rows, dtype=float).reshape(len(rows), -1)
    t = data[:, 0]
    if kind == "trace":
        return InputStream(t=t, score=data[:, 1], radius=data[:, 2])
    if kind == "score":
        return InputStream(t=t, score=data[:, 1])
    return InputStream(t=t, y=data[:, 1], X=data[:, 2:] if kind == "features" else None)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def write_trace(path, trace) -> None:
    """Write a :class:`~coinconf.engine.Trace` in the trace CSV schema."""
    cols = [trace.t, trace.y, trace.y_hat, trace.score, trace.radius, trace.lower, trace.upper,
            trace.covered, trace.width, trace.g, trace.wealth]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in zip(*(c.tolist() for c in cols)):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_trace(path) -> Dict[str, np.ndarray]:
    """Columns of a trace CSV; empty cells become ``nan``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise DataError("not a trace file", 1)
        rows = [[_number(v, i, h, allow_empty=True) for v, h in zip(rec, header)]
                for i, rec in enumerate(reader, start=2) if rec]
    data = np.array(rows, dtype=float).reshape(len(rows), len(TRACE_COLUMNS))
    out = {h: data[:, i] for i, h in enumerate(TRACE_COLUMNS)}
    out["t"] = out["t"].astype(int)
    out["covered"] = out["covered"].astype(bool)
    return out


def write_rows(path, rows, columns=None) -> None:
    """Write a list of dicts as CSV."""
    rows = list(rows)
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r[c]) if not isinstance(r[c], str) else r[c]
                              for c in columns) + "\n")


def write_manifest(path, entries: Mapping) -> None:
    """Plain ``key=value`` lines, one per entry."""
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in entries.items():
            if isinstance(v, (list, tuple)):
                v = " ".join(str(x) for x in v)
            fh.write(f"{k}={'' if v is None else v}\n")


def read_manifest(path) -> Dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                k, _, v = line.partition("=")
                out[k] = v
    return out
