"""CSV and JSON writers and the run-CSV reader."""

import csv
import io
import json
import logging
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

from pydantic import ValidationError as PydanticValidationError

from afem.exceptions import ExportError, ValidationError
from afem.models.records import RUN_CSV_FIELDS, IterationRecord

logger = logging.getLogger(__name__)

JSON_INDENT = 2


def format_csv(rows: Iterable[Mapping[str, Any]], fieldnames: list[str]) -> str:
    string_buffer = io.StringIO()
    writer = csv.DictWriter(string_buffer, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: "" if row.get(key) is None else row[key] for key in fieldnames})
    return string_buffer.getvalue()


def write_text(content: str, path: Path, kind: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
    except OSError as e:
        raise ExportError(kind, f"Failed to write {path}: {e}", {"path": str(path)}) from e
    logger.debug(f"Wrote {kind} file {path}")


def write_csv(rows: Iterable[Mapping[str, Any]], fieldnames: list[str], path: Path) -> None:
    write_text(format_csv(rows, fieldnames), path, "csv")


def write_run_csv(records: Iterable[IterationRecord], path: Path) -> None:
    """Write records with the run CSV columns."""
    write_csv([record.csv_row() for record in records], RUN_CSV_FIELDS, path)


def write_json(data: Any, path: Path) -> None:
    write_text(json.dumps(data, indent=JSON_INDENT, default=str) + "\n", path, "json")


def read_run_csv(path: Path) -> list[IterationRecord]:
    """Parse a run CSV back into records.

    Raises:
        ValidationError: If the file is missing, lacks columns or holds malformed rows
    """
    if not path.is_file():
        raise ValidationError("csv", str(path), f"Run CSV not found: {path}")
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        missing = [name for name in RUN_CSV_FIELDS if name not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError("csv", str(path), f"{path} lacks columns {missing}")
        records: list[IterationRecord] = []
        for line, row in enumerate(reader, start=2):
            data = {key: (value if value != "" else None) for key, value in row.items() if key in RUN_CSV_FIELDS}
            try:
                records.append(IterationRecord.model_validate(data))
            except PydanticValidationError as e:
                raise ValidationError("csv", str(path), f"{path}:{line}: invalid row: {e}") from e
    logger.debug(f"Read {len(records)} records from {path}")
    return records
