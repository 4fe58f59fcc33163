"""CSV and JSON report writers."""

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from noiselab.core.exceptions import ReportError
from noiselab.models.schemas import CommandReport
from noiselab.utils.logger import get_logger

logger = get_logger(__name__)


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        return f"{float(value.real)!r}{float(value.imag):+.17g}j"
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Deterministic CSV body; floats are written with repr."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    except OSError as e:
        logger.error("Failed to write CSV report", path=str(path), error=str(e), exc_info=True)
        raise ReportError(f"Cannot write {path}: {e}") from e
    logger.debug("CSV report written", path=str(path))
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_json(path: Path, report: CommandReport) -> Path:
    """JSON summary with checks serialized as {name, pass, margin}."""
    payload = _jsonable(report.model_dump(mode="python", by_alias=True))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=False, default=str) + "\n", encoding="utf-8")
    except OSError as e:
        logger.error("Failed to write JSON report", path=str(path), error=str(e), exc_info=True)
        raise ReportError(f"Cannot write {path}: {e}") from e
    logger.debug("JSON report written", path=str(path))
    return path

