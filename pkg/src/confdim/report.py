"""Versioned JSON analysis reports."""

from __future__ import annotations

import json
import math

SCHEMA = "confdim-report"
SCHEMA_VERSION = 1
EXACT_FIELDS = ("beta", "sigma", "bound")
REQUIRED = ("schema", "schema_version", "tool_version", "command", "seed", "space", "status")


class ReportError(ValueError):
    pass


def exact(x):
    """Decimal string that round-trips the float bit for bit; labels pass through."""
    if isinstance(x, str) or x is None:
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def parse_exact(s):
    if s is None:
        return None
    try:
        return float(s)
    except ValueError:
        return s


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return exact(obj)
    return obj


def new_report(command, seed, space, tool_version):
    return {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "tool_version": tool_version,
        "command": command,
        "seed": seed,
        "space": space,
        "status": "ok",
        "certificates": {},
        "messages": [],
    }


def dumps(report):
    """Canonical text: sorted keys, two-space indent, UTF-8 safe, trailing newline."""
    body = _jsonable(report)
    for key in EXACT_FIELDS:
        if key in body and not isinstance(body[key], str) and body[key] is not None:
            body[key] = exact(body[key])
    return json.dumps(body, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def loads(text):
    try:
        report = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportError(f"malformed report: {exc}") from exc
    validate(report)
    return report


def validate(report):
    if not isinstance(report, dict):
        raise ReportError("report must be a JSON object")
    missing = [k for k in REQUIRED if k not in report]
    if missing:
        raise ReportError(f"report lacks fields: {', '.join(missing)}")
    if report["schema"] != SCHEMA:
        raise ReportError(f"unknown schema {report['schema']!r}")
    if report["schema_version"] != SCHEMA_VERSION:
        raise ReportError(f"unsupported schema version {report['schema_version']!r}")
    for key in EXACT_FIELDS:
        if key in report and report[key] is not None and not isinstance(report[key], str):
            raise ReportError(f"{key} must be a decimal string")
    return report


def write(report, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(report))


def read(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
