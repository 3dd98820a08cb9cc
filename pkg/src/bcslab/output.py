"""CSV and JSON artifacts.

Floats are written bit-faithfully: 17 significant digits in CSV, the
shortest round-trip repr in JSON, where non-finite values become strings.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from bcslab.errors import OutputError
from bcslab.models import PotentialSpec, RadialGrid

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json")


def _float(value: float) -> float | str:
    if math.isfinite(value):
        return value
    if math.isnan(value):
        return "nan"
    return "infinity" if value > 0 else "-infinity"


def to_jsonable(obj: Any) -> Any:
    """Plain JSON values for records, dataclasses, numpy arrays and paths."""
    if isinstance(obj, RadialGrid):
        return obj.metadata()
    if isinstance(obj, PotentialSpec):
        return {"model": obj.model, **dict(obj.params), "lambda_scale": obj.lambda_scale, "part": obj.part}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return format(value, ".17g") if math.isfinite(value) else str(_float(value))
    return str(value)


def render_csv(rows: Sequence[Mapping[str, Any]]) -> str:
    if not rows:
        raise OutputError("no rows to write")
    columns = list(rows[0])
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row[column]) for column in columns])
    return buffer.getvalue()


def render_json(document: Any) -> str:
    return json.dumps(to_jsonable(document), indent=2, allow_nan=False) + "\n"


def emit_results(results: Any, fmt: str, path: str | Path) -> Path:
    """Write results as CSV (a sequence of rows with a fixed column order) or JSON."""
    if fmt not in FORMATS:
        raise OutputError(f"unknown output format {fmt!r}", accepted=list(FORMATS))
    path = Path(path)
    text = render_csv(results) if fmt == "csv" else render_json(results)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}", path=str(path)) from exc
    logger.info("wrote %s", path)
    return path
