"""Run reports: a deterministic JSON body plus a separate timing section.

Schema (``photogemm.report/1``)::

    {
      "schema":  "photogemm.report/1",
      "command": "experiment error-scaling",
      "seed":    0,
      "params":  {...},      # command arguments that shape the results
      "config":  {...},      # flat dotted-key echo of the SystemConfig
      "results": {...},      # command specific
      "meta":    {"wall_clock_s": 1.23}
    }

Everything except ``meta`` is a pure function of config, seed and params.
"""
from __future__ import annotations

import csv
import io
import json
from typing import Any, Optional

import numpy as np

from .config import SystemConfig, to_flat

SCHEMA = "photogemm.report/1"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def make_report(command: str, cfg: SystemConfig, seed: int, params: dict, results: Any, wall_clock_s: Optional[float] = None) -> dict:
    doc = {
        "schema": SCHEMA,
        "command": command,
        "seed": int(seed),
        "params": _jsonable(params),
        "config": _jsonable(to_flat(cfg)),
        "results": _jsonable(results),
    }
    if wall_clock_s is not None:
        doc["meta"] = {"wall_clock_s": wall_clock_s}
    return doc


def body(doc: dict) -> dict:
    """The reproducible part of a report."""
    return {k: v for k, v in doc.items() if k != "meta"}


def dumps_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n"


def _flatten(prefix: str, x, out: dict) -> None:
    if isinstance(x, dict):
        for k, v in x.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(x, list) and x and not isinstance(x[0], (dict, list)):
        out[prefix] = " ".join(str(v) for v in x)
    elif isinstance(x, list):
        for i, v in enumerate(x):
            _flatten(f"{prefix}.{i}", v, out)
    else:
        out[prefix] = x


def _tables(results) -> list[tuple[str, list[dict]]]:
    """Lists of records found in the results, one CSV table each."""
    found = []

    def walk(name, x):
        if isinstance(x, list) and x and all(isinstance(r, dict) for r in x):
            rows = []
            for r in x:
                flat = {}
                _flatten("", {k: v for k, v in r.items() if not isinstance(v, list) or k == "histogram"}, flat)
                rows.append({k: v for k, v in flat.items() if not k.startswith("histogram")})
            found.append((name, rows))
            for i, r in enumerate(x):
                for k, v in r.items():
                    walk(f"{name}.{i}.{k}", v)
        elif isinstance(x, dict):
            for k, v in x.items():
                walk(f"{name}.{k}" if name else k, v)

    walk("", results)
    return found


def dumps_csv(doc: dict) -> str:
    """Every record table in the results as CSV, separated by ``# table`` lines.

    Scalars that are not part of a table go into a final key/value table.
    """
    buf = io.StringIO()
    tables = _tables(doc["results"])
    for name, rows in tables:
        buf.write(f"# table {name}\n")
        fields = list(dict.fromkeys(k for r in rows for k in r))
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    scalars = {}
    _flatten("", {k: v for k, v in doc.items() if k not in ("results", "meta", "config")}, scalars)
    res = doc["results"]
    if isinstance(res, dict):
        for k, v in res.items():
            if not isinstance(v, list):
                _flatten(f"results.{k}", v, scalars)
    buf.write("# table summary\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in scalars.items():
        w.writerow([k, v])
    return buf.getvalue()


def dumps(doc: dict, fmt: str = "json") -> str:
    return dumps_csv(doc) if fmt == "csv" else dumps_json(doc)
