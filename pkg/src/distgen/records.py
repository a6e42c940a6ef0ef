"""Result persistence: the experiment CSV schema and JSON run records."""

import csv
import io
import json
import math
import os
import subprocess
from pathlib import Path

import numpy as np

from . import __version__

__all__ = [
    "CSV_COLUMNS",
    "format_cell",
    "rows_to_csv",
    "write_csv",
    "to_jsonable",
    "dumps_json",
    "artifact_version",
    "write_run_record",
]

CSV_COLUMNS = (
    "experiment",
    "K",
    "n",
    "repeat",
    "seed",
    "gen_gap",
    "emp_risk_local",
    "emp_risk_agg",
    "emp_risk_agg_margin",
    "pop_risk",
    "delta_emp",
    "bound_expected",
    "bound_tail",
    "bound_centralized",
)


def format_cell(value):
    """Render one CSV cell; missing values are empty, floats use ``repr``."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def rows_to_csv(rows, columns=CSV_COLUMNS):
    """Serialize rows to CSV text with a fixed header and ``\\n`` line endings.

    Keys outside ``columns`` are rejected so the schema cannot drift.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        extra = set(row) - set(columns)
        if extra:
            raise ValueError(f"row has columns outside the schema: {sorted(extra)}")
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns=CSV_COLUMNS):
    text = rows_to_csv(rows, columns)
    Path(path).write_text(text, encoding="utf-8", newline="")
    return text


def to_jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``
    so the output stays strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return obj


def dumps_json(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def artifact_version():
    """Package version, with the short commit hash appended when available."""
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    commit = out.stdout.strip()
    return f"{__version__}+g{commit}" if out.returncode == 0 and commit else __version__


def write_run_record(path, command, config, results, wall_clock):
    """Write a run record.

    Everything except the ``"run"`` block is a pure function of the config,
    so two runs with the same config agree byte-for-byte outside it.
    """
    record = {
        "artifact_version": artifact_version(),
        "command": command,
        "config": config,
        "results": results,
        "run": {"wall_clock_seconds": wall_clock},
    }
    text = dumps_json(record)
    Path(path).write_text(text, encoding="utf-8")
    return record
