"""Bit-stable serialization of check reports and other results.

Floats are written with 17 significant digits (round-trip exact), keys are
sorted and non-finite values become the strings ``"inf"``, ``"-inf"`` and
``"nan"``.  Files are written atomically.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

from .checks import CheckReport, Row

_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def render_float(x):
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def render_json(obj, indent=0):
    """Deterministic JSON text for nested dicts, lists, numbers and strings."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {render_json(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            return "[]"
        return "[\n" + ",\n".join(pad + render_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return render_float(obj)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    return json.dumps(str(obj))


def _restore(obj):
    if isinstance(obj, dict):
        return {k: _restore(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_restore(v) for v in obj]
    if isinstance(obj, str) and obj in _NONFINITE:
        return _NONFINITE[obj]
    return obj


def report_to_dict(report):
    return {
        "check": report.check,
        "status": report.status,
        "tolerance": report.tolerance,
        "min_margin": report.min_margin,
        "budget": report.budget,
        "params": report.params,
        "witness": report.witness,
        "notes": list(report.notes),
        "rows": [{"label": r.label, "lhs": r.lhs, "rhs": r.rhs, "margin": r.margin, "extra": r.extra}
                 for r in report.rows],
    }


def report_from_dict(data):
    data = _restore(data)
    rows = [Row(r["label"], r["lhs"], r["rhs"], r["margin"], r.get("extra", {})) for r in data["rows"]]
    return CheckReport(data["check"], data["params"], rows, data["tolerance"], data["status"],
                       data["witness"], data["budget"], data["notes"])


def report_to_json(report):
    return render_json(report_to_dict(report)) + "\n"


def report_from_json(text):
    return report_from_dict(json.loads(text))


def report_to_csv(report):
    keys = sorted({k for r in report.rows for k in r.label})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row"] + keys + ["lhs", "rhs", "margin"])
    for i, r in enumerate(report.rows):
        labels = []
        for k in keys:
            v = r.label.get(k, "")
            labels.append(render_float(v).strip('"') if isinstance(v, float) else v)
        w.writerow([i] + labels + [render_float(x).strip('"') for x in (r.lhs, r.rhs, r.margin)])
    return buf.getvalue()


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_report(report, path, fmt="json"):
    """Write ``report`` to ``path`` as ``json`` or ``csv``."""
    if fmt == "json":
        write_atomic(path, report_to_json(report))
    elif fmt == "csv":
        write_atomic(path, report_to_csv(report))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path
