"""CSV and JSON writers with provenance headers."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__

SCHEMA_VERSION = 1


def provenance(config_hash: str, command: str) -> dict:
    return {"tool": "cepspin", "version": __version__, "config_sha256": config_hash,
            "command": command}


def fmt(v) -> str:
    """Shortest round-trip text for numbers; strings pass through."""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def csv_text(columns, rows, prov: dict) -> str:
    buf = io.StringIO()
    for k in sorted(prov):
        buf.write(f"# {k}: {prov[k]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_csv(path, columns, rows, prov: dict) -> Path:
    return write_text(path, csv_text(columns, rows, prov))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def json_text(kind: str, payload: dict, prov: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "provenance": prov,
           "result": payload}
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def write_json(path, kind: str, payload: dict, prov: dict) -> Path:
    return write_text(path, json_text(kind, payload, prov))
