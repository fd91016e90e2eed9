"""CSV and JSON writers for scenario reports."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .solver import SimReport

CSV_COLUMNS = ["label", "revenue", "metric", "q10", "q25", "q50", "q75", "q100"]
METRICS = (("trading_rate", "rate_quantiles"), ("inventory", "inventory_quantiles"))


def sig6(x):
    """Round to 6 significant digits, keeping NaN and integers intact."""
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, int):
        return x
    if not math.isfinite(x):
        return x
    return float(f"{x:.6g}")


def _fmt(x) -> str:
    return f"{x:.6g}"


def sort_reports(reports, key: str = "label") -> list:
    """``panel`` puts self-damping (negative excitation) before self-exciting."""
    reports = list(reports)
    if key == "panel":
        return sorted(reports, key=lambda r: (0 if r.excitation < 0 else 1))
    if key == "label":
        return sorted(reports, key=lambda r: r.label)
    raise ValueError(f"unknown sort key {key!r}")


def rounded(report: SimReport) -> SimReport:
    d = report.to_dict()
    for k, v in d.items():
        d[k] = [sig6(x) for x in v] if isinstance(v, list) else sig6(v)
    return SimReport.from_dict(d)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        for metric, attr in METRICS:
            w.writerow([r.label, _fmt(r.revenue), metric] + [_fmt(q) for q in getattr(r, attr)])
    return buf.getvalue()


def reports_to_json(reports) -> str:
    docs = [rounded(r).to_dict() for r in reports]
    # NaN is not valid JSON; missing figures of failed scenarios become null
    return json.dumps(_nan_to_none(docs), indent=1) + "\n"


def _nan_to_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    return obj


def _none_to_nan(obj):
    if obj is None:
        return math.nan
    if isinstance(obj, list):
        return [_none_to_nan(v) for v in obj]
    return obj


def reports_from_json(text: str) -> list:
    out = []
    for d in json.loads(text):
        d = {k: (v if k in ("error", "label") else _none_to_nan(v)) for k, v in d.items()}
        out.append(SimReport.from_dict(d))
    return out


def write_report(reports, path, format: str = "csv") -> None:
    """Write reports as CSV (two rows per scenario) or JSON, 6 significant digits."""
    if format == "csv":
        text = reports_to_csv(reports)
    elif format == "json":
        text = reports_to_json(reports)
    else:
        raise ValueError(f"unknown report format {format!r}")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def read_report(path) -> list:
    return reports_from_json(Path(path).read_text())
