"""Merging of the two raw outpatient tables (diagnoses, medical records) into one case per visit.

The diagnosis table has one row per visit and diagnosis, the record table one row per visit and
condition type (chief complaint, history, examination ...). Both are keyed by the visit serial
number ``ID``. Inputs are assumed to be de-identified already.
"""
import collections
import dataclasses
import logging
import os
from typing import Iterable, List, Mapping, Optional, Tuple, Union

import pandas as pd

from sctkg.common.types import RowError

logger = logging.getLogger(__name__)

DIAGNOSIS_COLUMNS = [
    "ID",
    "Gender",
    "Age",
    "Age Unit",
    "Visit Time",
    "Department",
    "Clinic Type",
    "Diagnosis Code",
    "Diagnosis",
]
RECORD_COLUMNS = [
    "ID",
    "Gender",
    "Age",
    "Age Unit",
    "Visit Time",
    "Department",
    "Clinic Type",
    "Record Type",
    "Diagnosis Code & Name",
    "Condition Type",
    "Element Value",
    "Date",
]
NARRATIVE_FIELDS = (
    "Chief Complaint",
    "History of Present Illness",
    "Past Medical History",
    "Physical Examination",
    "Collateral Tests",
    "Treatment Plan",
)
SPREADSHEET_EPOCH = "1899-12-30"

Table = Union[pd.DataFrame, Iterable[Mapping[str, str]]]


@dataclasses.dataclass
class MergedCase:
    visit_id: int
    gender: str
    age: Union[int, float]
    age_unit: str
    visit_time: str
    department: str
    clinic_type: str
    record_type: str
    diagnoses: List[Tuple[str, str]]
    narrative_fields: dict[str, str] = dataclasses.field(default_factory=dict)
    provenance_notes: List[str] = dataclasses.field(default_factory=list)

    def __post_init__(self):
        if not self.diagnoses:
            raise ValueError(f"Case {self.visit_id} has no diagnoses.")

    def field(self, name: str) -> str:
        return self.narrative_fields.get(name, "")

    @property
    def diagnosis_names(self) -> str:
        return "; ".join(name for _, name in self.diagnoses)

    @property
    def diagnosis_codes(self) -> List[str]:
        return [code for code, _ in self.diagnoses]

    @property
    def clinical_text(self) -> str:
        """The narrative fields joined in order, used for seed matching."""
        return "\n".join(value for value in self.narrative_fields.values() if value)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class MergeReport:
    """``orphan_records``: ids with record rows but no diagnosis rows. ``orphan_diagnoses``: the
    reverse. Neither produces a case. Row errors carry the table line number, except visits
    that fail to merge, which carry the visit id."""

    orphan_records: List[int] = dataclasses.field(default_factory=list)
    orphan_diagnoses: List[int] = dataclasses.field(default_factory=list)
    errors: List[RowError] = dataclasses.field(default_factory=list)


def serial_to_timestamp(serial: float) -> str:
    """Converts a spreadsheet serial date (days since 1899-12-30) to ``YYYY/M/D H:MM:SS``,
    rounded to the second, e.g. ``45293.38157`` -> ``2024/1/2 9:09:28``."""
    ts = pd.to_datetime(serial, unit="D", origin=SPREADSHEET_EPOCH).round("s")
    return f"{ts.year}/{ts.month}/{ts.day} {ts.hour}:{ts.minute:02d}:{ts.second:02d}"


def _as_serial(value: str) -> Optional[float]:
    try:
        return float(value)
    except ValueError:
        return None


def _age(value: str) -> Union[int, float]:
    number = float(value)
    return int(number) if number.is_integer() else number


def _rows(table: Table) -> List[Mapping[str, str]]:
    if isinstance(table, pd.DataFrame):
        return table.to_dict("records")
    return list(table)


def _visit_id(row: Mapping[str, str]) -> int:
    value = str(row.get("ID", "")).strip()
    if not value.isdigit() or int(value) < 1:
        raise ValueError(f"bad visit id {value!r}")
    return int(value)


def _text(row: Mapping[str, str], column: str) -> str:
    value = row.get(column)
    return "" if value is None else str(value).strip()


def merge_cases(
    diagnosis_rows: Table, record_rows: Table, report: Optional[MergeReport] = None
) -> List[MergedCase]:
    """Aligns the two tables on visit id and consolidates each visit into one case.

    Diagnoses are deduplicated by code (first name wins). Narrative fields are keyed by the
    record rows' condition type in the order they first appear; repeated condition types are
    joined with a newline. The record table's textual visit time is preferred; a numeric serial
    date is converted and the conversion noted in ``provenance_notes``.

    :param diagnosis_rows: Rows with the diagnosis table columns
    :param record_rows: Rows with the record table columns, many per visit
    :param report: Optional report collecting orphans and bad rows
    :return: Cases ascending by visit id
    """
    report = report if report is not None else MergeReport()
    diagnoses = collections.defaultdict(list)
    for index, row in enumerate(_rows(diagnosis_rows), start=2):
        try:
            diagnoses[_visit_id(row)].append(row)
        except ValueError as e:
            report.errors.append(RowError(index, f"diagnoses: {e}"))
    records = collections.defaultdict(list)
    for index, row in enumerate(_rows(record_rows), start=2):
        try:
            records[_visit_id(row)].append(row)
        except ValueError as e:
            report.errors.append(RowError(index, f"records: {e}"))
    report.orphan_records.extend(sorted(set(records) - set(diagnoses)))
    report.orphan_diagnoses.extend(sorted(set(diagnoses) - set(records)))
    if report.orphan_records or report.orphan_diagnoses:
        logger.warning(
            "Skipping %d visits without diagnoses and %d visits without records",
            len(report.orphan_records),
            len(report.orphan_diagnoses),
        )

    cases = []
    for visit_id in sorted(set(records) & set(diagnoses)):
        try:
            cases.append(_merge_one(visit_id, diagnoses[visit_id], records[visit_id]))
        except ValueError as e:
            report.errors.append(RowError(visit_id, str(e)))
    return cases


def _merge_one(
    visit_id: int, diagnosis_rows: List[Mapping[str, str]], record_rows: List[Mapping[str, str]]
) -> MergedCase:
    first_record, first_diagnosis = record_rows[0], diagnosis_rows[0]

    def pick(column: str) -> str:
        return _text(first_record, column) or _text(first_diagnosis, column)

    seen_codes = {}
    for row in diagnosis_rows:
        code = _text(row, "Diagnosis Code")
        if code and code not in seen_codes:
            seen_codes[code] = _text(row, "Diagnosis")

    narrative: dict[str, str] = {}
    for row in record_rows:
        condition, value = _text(row, "Condition Type"), _text(row, "Element Value")
        if not condition:
            continue
        narrative[condition] = (
            f"{narrative[condition]}\n{value}" if condition in narrative else value
        )

    notes = []
    visit_time = _text(first_record, "Visit Time")
    if not visit_time or _as_serial(visit_time) is not None:
        raw = visit_time or _text(first_diagnosis, "Visit Time")
        serial = _as_serial(raw)
        if serial is not None:
            visit_time = serial_to_timestamp(serial)
            notes.append(f"visit time converted from spreadsheet serial {raw}")
        else:
            visit_time = raw

    return MergedCase(
        visit_id=visit_id,
        gender=pick("Gender"),
        age=_age(pick("Age")),
        age_unit=pick("Age Unit"),
        visit_time=visit_time,
        department=pick("Department"),
        clinic_type=pick("Clinic Type"),
        record_type=_text(first_record, "Record Type"),
        diagnoses=list(seen_codes.items()),
        narrative_fields=narrative,
        provenance_notes=notes,
    )


def read_table(path: Union[str, os.PathLike], columns: List[str]) -> pd.DataFrame:
    """Reads a delimiter-separated case table; tab-separated when the suffix is ``.tsv`` or
    ``.txt``, comma-separated otherwise. Every value is kept as text.

    :raises ValueError: if a required column is missing
    """
    sep = "\t" if str(path).endswith((".tsv", ".txt")) else ","
    frame = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, encoding="utf-8")
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    return frame


def load_case_tables(
    diagnosis_path: Union[str, os.PathLike],
    record_path: Union[str, os.PathLike],
    report: Optional[MergeReport] = None,
) -> List[MergedCase]:
    return merge_cases(
        read_table(diagnosis_path, DIAGNOSIS_COLUMNS),
        read_table(record_path, RECORD_COLUMNS),
        report=report,
    )
