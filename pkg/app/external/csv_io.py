import csv
import math
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Union

import structlog

logger = structlog.get_logger(__name__)


def format_cell(value: Any) -> str:
    """Locale-free rendering; floats use the shortest round-trip repr"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(value))
    if hasattr(value, "item"):
        return format_cell(value.item())
    return str(value)


def write_csv(path: Union[str, Path], columns: List[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(c)) for c in columns])
            count += 1
    logger.debug("csv_written", path=str(path), rows=count)
    return path


def read_csv(path: Union[str, Path]) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
