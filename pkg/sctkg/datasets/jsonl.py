"""JSONL dataset files: one JSON object per line, UTF-8, LF line endings, non-ASCII kept as is."""
import dataclasses
import json
import logging
import os
import pathlib
from typing import Iterable, List, Optional, Tuple, Union

import pandas as pd
import pydantic

from sctkg.datasets.models import schema_model
from sctkg.datasets.validate import NOT_UTF8, validate_record

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]


def dump_record(record: Union[pydantic.BaseModel, dict]) -> str:
    if isinstance(record, pydantic.BaseModel):
        record = record.model_dump(exclude_none=True)
    return json.dumps(record, ensure_ascii=False)


def write_jsonl(records: Iterable[Union[pydantic.BaseModel, dict]], path: PathLike) -> int:
    """Writes records, one per line. Returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(dump_record(record))
            f.write("\n")
            count += 1
    logger.debug("Wrote %d records to %s", count, path)
    return count


def read_jsonl(
    path: PathLike, schema: str
) -> Tuple[List[pydantic.BaseModel], List[Tuple[int, List[str]]]]:
    """Reads and validates a dataset file. Blank lines are ignored and a line that is not UTF-8 is
    reported like any other invalid line.

    :return: The valid records in file order, and ``(line number, violations)`` for every line
        that failed validation
    """
    model = schema_model(schema)
    records, problems = [], []
    with open(path, "rb") as f:
        for line_number, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8").rstrip("\r\n")
            except UnicodeDecodeError:
                problems.append((line_number, [NOT_UTF8]))
                continue
            if not line.strip():
                continue
            violations = validate_record(line, schema)
            if violations:
                problems.append((line_number, violations))
                continue
            records.append(model.model_validate_json(line))
    if problems:
        logger.warning("%s: %d invalid lines", path, len(problems))
    return records, problems


@dataclasses.dataclass
class ConversionReport:
    rows_read: int = 0
    rows_written: int = 0
    rejected: List[Tuple[int, List[str]]] = dataclasses.field(default_factory=list)


def _read_frame(source: pathlib.Path) -> pd.DataFrame:
    if source.suffix.lower() in (".csv", ".tsv"):
        sep = "\t" if source.suffix.lower() == ".tsv" else ","
        return pd.read_csv(source, sep=sep, dtype=str, keep_default_na=False, encoding="utf-8")
    try:
        import pyarrow  # noqa: F401
    except ImportError as e:
        from sctkg.integrations.base import require_plugin

        require_plugin(e, ["pyarrow"], "parquet")
    return pd.read_parquet(source)


def parquet_to_jsonl(
    source: PathLike, destination: PathLike, schema: Optional[str] = None
) -> ConversionReport:
    """Converts a columnar dataset (parquet, or a CSV/TSV intermediate) to JSONL, one row per line
    with the columns as keys in column order.

    :param schema: When given, rows failing that schema are reported and left out
    """
    source = pathlib.Path(source)
    frame = _read_frame(source)
    report = ConversionReport()
    rows = []
    for row_number, row in enumerate(frame.to_dict("records"), start=1):
        report.rows_read += 1
        payload = {key: _plain(value) for key, value in row.items()}
        if schema is not None:
            violations = validate_record(json.dumps(payload, ensure_ascii=False), schema)
            if violations:
                report.rejected.append((row_number, violations))
                continue
        rows.append(payload)
    report.rows_written = write_jsonl(rows, destination)
    logger.info(
        "Converted %s: %d rows read, %d written", source, report.rows_read, report.rows_written
    )
    return report


def _plain(value):
    # numpy scalars and arrays from parquet columns
    if hasattr(value, "tolist"):
        return value.tolist()
    return value
