"""Points files (CSV) and experiment reports (JSON).

Points files carry a header of coordinate columns x0..x{d-1} plus optional
`weight` and trailing integer `label` columns; absent weights mean uniform.
Reports are JSON objects {command, version, timestamp, config, results}
written atomically (temp file + rename) with sorted keys, so identical runs
produce identical bytes up to the timestamp. Floats are serialized with
repr, which round-trips float64 losslessly within 17 significant digits.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
import warnings
from datetime import datetime, timezone
from enum import Enum

import numpy as np

from nwot.core import DiscreteDistribution, SimplexVector

_WEIGHT_WARN_TOL = 1e-6


def write_points_csv(path, dist: DiscreteDistribution, labels=None) -> None:
    """Write a distribution (and optional labels) as a points CSV.

    The weight column is omitted when weights are uniform."""
    d = dist.dimension
    uniform = np.allclose(dist.weights, 1.0 / len(dist), atol=1e-15)
    header = [f"x{i}" for i in range(d)]
    if not uniform:
        header.append("weight")
    if labels is not None:
        labels = np.asarray(labels).reshape(-1)
        if labels.shape[0] != len(dist):
            raise ValueError("one label per point required")
        header.append("label")
    rows = []
    for i in range(len(dist)):
        row = [format(v, ".17g") for v in dist.points[i]]
        if not uniform:
            row.append(format(dist.weights[i], ".17g"))
        if labels is not None:
            row.append(str(int(labels[i])))
        rows.append(row)
    _atomic_write_text(
        path,
        "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n",
    )


def read_points_csv(path):
    """Load a points CSV; returns (distribution, labels or None).

    Missing weights default to uniform. Weights that do not sum to 1 beyond
    1e-6 are renormalized with a warning; malformed or empty files raise
    ValueError.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty dataset") from None
        header = [h.strip() for h in header]
        rows = [r for r in reader if r]
    coord_cols = [i for i, h in enumerate(header) if h.startswith("x")]
    if not coord_cols or any(not h[1:].isdigit() for h in (header[i] for i in coord_cols)):
        raise ValueError(f"malformed header: {header}")
    weight_col = header.index("weight") if "weight" in header else None
    label_col = header.index("label") if "label" in header else None
    if not rows:
        raise ValueError("empty dataset")
    width = len(header)
    if any(len(r) != width for r in rows):
        raise ValueError("ragged rows in points file")
    try:
        pts = np.array([[float(r[i]) for i in coord_cols] for r in rows])
        weights = (
            np.array([float(r[weight_col]) for r in rows])
            if weight_col is not None
            else np.full(len(rows), 1.0 / len(rows))
        )
        labels = (
            np.array([int(float(r[label_col])) for r in rows])
            if label_col is not None
            else None
        )
    except ValueError as exc:
        raise ValueError(f"malformed points file: {exc}") from None
    if weight_col is not None:
        if weights.min() < 0:
            raise ValueError("weights must be nonnegative")
        total = weights.sum()
        if total <= 0:
            raise ValueError("weights must carry positive mass")
        if abs(total - 1.0) > _WEIGHT_WARN_TOL:
            warnings.warn(
                f"weights sum to {total!r}; renormalizing", stacklevel=2
            )
        weights = weights / total
    return DiscreteDistribution(pts, weights), labels


def jsonable(obj):
    """Recursively convert report values to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, SimplexVector):
        return [float(v) for v in obj.values]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def make_report(command: str, config: dict, results: dict) -> dict:
    from nwot import __version__

    return {
        "command": command,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": jsonable(config),
        "results": jsonable(results),
    }


def write_report(path, report: dict) -> None:
    _atomic_write_text(path, json.dumps(report, indent=2, sort_keys=True) + "\n")


def _walk(obj, key=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _walk(v, str(k))
    elif isinstance(obj, list):
        yield key, obj


_MONOTONE_KEYS = {"trace"}
_SIMPLEX_KEYS = {"pi", "pi1", "pi2", "estimated_pi", "proportions"}


def read_report(path, validate: bool = True) -> dict:
    """Load a report; re-validates embedded simplex vectors and traces."""
    with open(path) as fh:
        report = json.load(fh)
    if not validate:
        return report
    for key in ("command", "version", "config", "results"):
        if key not in report:
            raise ValueError(f"report missing field {key!r}")
    for key, values in _walk(report.get("results", {})):
        if key in _SIMPLEX_KEYS and values:
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim == 1 and (
                abs(arr.sum() - 1.0) > 1e-9 or arr.min() < -1e-9
            ):
                raise ValueError(f"report field {key!r} is not a simplex vector")
        if key in _MONOTONE_KEYS and values:
            arr = np.asarray(values, dtype=np.float64)
            if np.any(np.diff(arr) > 1e-9):
                raise ValueError(f"report field {key!r} is not non-increasing")
    return report


def _atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".nwot-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
