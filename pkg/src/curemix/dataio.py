"""Delimited-text and JSON input/output.

Dataset files are comma-separated UTF-8 with a header row and '.' decimal
separator. Required columns: ``time`` and ``status`` (0 = censored,
1 = event, 2 = known cured); covariate columns are named ``x1..``,
``z1..`` and ``q1..``. Lines starting with '#' carry provenance and are
skipped on read, so written files round-trip through the reader.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import DataError


def _provenance_lines(provenance: dict | None) -> list[str]:
    if not provenance:
        return []
    return [f"# {key}={provenance[key]}" for key in sorted(provenance)]


def write_dataset(path, dataset: Dataset, provenance: dict | None = None) -> None:
    """Write a dataset as delimited text with an optional provenance header."""
    path = Path(path)
    cols = (["time", "status"] + list(dataset.x_names) + list(dataset.z_names)
            + list(dataset.q_names))
    with path.open("w", encoding="utf-8", newline="") as fh:
        for line in _provenance_lines(provenance):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(dataset.n):
            row = [repr(float(dataset.time[i])), int(dataset.status[i])]
            row += [repr(float(v)) for v in dataset.x[i]]
            row += [repr(float(v)) for v in dataset.z[i]]
            row += [repr(float(v)) for v in dataset.q[i]]
            writer.writerow(row)


def read_dataset(path) -> Dataset:
    """Read a dataset written by :func:`write_dataset` (or hand-made to the
    same schema). Raises DataError with a line number on malformed input."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        lines = fh.readlines()
    rows = []
    header = None
    header_line = None
    for lineno, raw in enumerate(lines, start=1):
        if raw.startswith("#") or not raw.strip():
            continue
        parsed = next(csv.reader([raw]))
        if header is None:
            header = [c.strip() for c in parsed]
            header_line = lineno
            continue
        rows.append((lineno, parsed))
    if header is None:
        raise DataError(f"{path}: no header row found")
    for required in ("time", "status"):
        if required not in header:
            raise DataError(f"{path}:{header_line}: missing required column "
                            f"'{required}'")
    x_names = [c for c in header if c.startswith("x")]
    z_names = [c for c in header if c.startswith("z")]
    q_names = [c for c in header if c.startswith("q")]
    known = {"time", "status", *x_names, *z_names, *q_names}
    unknown = [c for c in header if c not in known]
    if unknown:
        raise DataError(f"{path}:{header_line}: unrecognized columns "
                        f"{unknown}; expected time, status, x*, z*, q*")
    idx = {c: header.index(c) for c in header}

    def parse(lineno, parsed, col, kind=float):
        try:
            return kind(parsed[idx[col]])
        except (ValueError, IndexError):
            raise DataError(f"{path}:{lineno}: bad value for column '{col}'")

    n = len(rows)
    time = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    x = np.empty((n, len(x_names)))
    z = np.empty((n, len(z_names)))
    q = np.empty((n, len(q_names)))
    for i, (lineno, parsed) in enumerate(rows):
        if len(parsed) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, "
                            f"got {len(parsed)}")
        time[i] = parse(lineno, parsed, "time")
        status[i] = parse(lineno, parsed, "status", int)
        if status[i] not in (0, 1, 2):
            raise DataError(f"{path}:{lineno}: status must be 0, 1 or 2")
        for j, c in enumerate(x_names):
            x[i, j] = parse(lineno, parsed, c)
        for j, c in enumerate(z_names):
            z[i, j] = parse(lineno, parsed, c)
        for j, c in enumerate(q_names):
            q[i, j] = parse(lineno, parsed, c)
    return Dataset(time, status, x=x, z=z, q=q, x_names=x_names,
                   z_names=z_names, q_names=q_names)


def write_truth(path, truth: dict, provenance: dict | None = None) -> None:
    """Write the latent-truth sidecar of a generated dataset."""
    path = Path(path)
    keys = list(truth)
    n = len(truth[keys[0]])
    with path.open("w", encoding="utf-8", newline="") as fh:
        for line in _provenance_lines(provenance):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(keys)
        for i in range(n):
            writer.writerow([repr(float(truth[k][i])) for k in keys])


class _NumpyEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        return super().default(obj)


def write_json(path, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, cls=_NumpyEncoder, allow_nan=True) + "\n",
        encoding="utf-8")


def write_delimited(path, frame, provenance: dict | None = None) -> None:
    """Write a pandas frame as CSV under a provenance comment header."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        for line in _provenance_lines(provenance):
            fh.write(line + "\n")
        frame.to_csv(fh, index=False)
