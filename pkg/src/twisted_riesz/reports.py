"""Report emission: JSON (sorted keys) and RFC-4180 CSV with 17 significant digits.

Every report embeds the resolved configuration, the library version and the
normalization convention of the propagator constant.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .propagator import NORMALIZATION


def _version() -> str:
    from . import __version__

    return __version__


def fmt_real(x: float) -> str:
    """Shortest round-trip text is not required; 17 significant digits always round-trip."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def jsonable(v):
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return jsonable(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": jsonable(float(v.real)), "im": jsonable(float(v.imag))}
    if isinstance(v, float) and not math.isfinite(v):
        return fmt_real(v)
    if isinstance(v, Path):
        return str(v)
    return v


def envelope(kind: str, config: dict, payload) -> dict:
    return {"report": kind, "version": _version(), "normalization": NORMALIZATION,
            "config": jsonable(config), "result": jsonable(payload)}


def to_json(doc: dict) -> str:
    return json.dumps(jsonable(doc), sort_keys=True, indent=2) + "\n"


def _flatten(prefix: str, v, out: list):
    if isinstance(v, dict):
        for k in sorted(v):
            _flatten(f"{prefix}.{k}" if prefix else str(k), v[k], out)
    elif isinstance(v, (list, tuple)):
        for i, x in enumerate(v):
            _flatten(f"{prefix}[{i}]", x, out)
    else:
        out.append((prefix, v))


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_real(v)
    if v is None:
        return ""
    return str(v)


def to_csv(doc: dict, rows: list[dict] | None = None) -> str:
    """Tabular rows when given (one per line), else key,value pairs of the flattened document."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    if rows:
        cols = list(rows[0].keys())
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(jsonable(r.get(c))) for c in cols])
        meta = []
        _flatten("", {k: doc[k] for k in ("report", "version", "normalization", "config")}, meta)
        for k, v in meta:
            w.writerow([f"# {k}", _cell(v)])
    else:
        flat = []
        _flatten("", jsonable(doc), flat)
        w.writerow(["key", "value"])
        for k, v in flat:
            w.writerow([k, _cell(v)])
    return buf.getvalue()


def write_report(doc: dict, out: str | Path | None, fmt: str = "json", rows: list[dict] | None = None) -> str:
    text = to_json(doc) if fmt == "json" else to_csv(doc, rows)
    if out is not None and str(out) != "-":
        path = Path(out)
        path.write_text(text, newline="")
    return text
