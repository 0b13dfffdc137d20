"""Streaming readers for RF2 release files.

Every reader validates the header eagerly (so a bad file fails before any row is produced) and then
yields rows lazily in file order. Bad lines are skipped and recorded on the
:py:class:`~sctkg.common.types.ParseReport`, which is complete once the row iterator is exhausted.
"""
import concurrent.futures
import dataclasses
import logging
import os
import pathlib
import queue
import threading
from typing import Callable, Iterator, Optional, Union

from sctkg.common.types import ParseReport
from sctkg.core.rf2 import (
    ROW_TYPES,
    SCTID_MAX_DIGITS,
    SCTID_MIN_DIGITS,
    AxiomRow,
    ConceptRow,
    DescriptionRow,
    RelationshipRow,
    Row,
    is_valid_effective_time,
    serialize_row,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

# Release layouts nest files under Snapshot/Terminology etc., so these are matched recursively.
RELEASE_FILE_PATTERNS: dict[str, tuple[str, ...]] = {
    "concept": ("*Concept_*.txt",),
    "description": ("*Description_*.txt",),
    "relationship": ("*Relationship_*.txt",),
    "axiom": ("*OWLExpression*.txt", "*OWLAxiom*.txt"),
}


class RF2FormatError(ValueError):
    """Raised when a whole file cannot be parsed (bad header, wrong encoding)."""

    def __init__(self, path: PathLike, message: str):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


class _FieldError(ValueError):
    pass


def _sctid(value: str) -> int:
    if not value.isdigit() or value.startswith("0"):
        raise _FieldError(f"non-numeric id {value!r}")
    if not SCTID_MIN_DIGITS <= len(value) <= SCTID_MAX_DIGITS:
        raise _FieldError(f"id {value!r} has {len(value)} digits")
    return int(value)


def _date(value: str) -> int:
    if not value.isdigit() or not is_valid_effective_time(int(value)) or len(value) != 8:
        raise _FieldError(f"bad date {value!r}")
    return int(value)


def _active(value: str) -> bool:
    if value == "1":
        return True
    if value == "0":
        return False
    raise _FieldError(f"bad boolean {value!r}")


def _group(value: str) -> int:
    if not value.isdigit() or (len(value) > 1 and value.startswith("0")):
        raise _FieldError(f"bad relationship group {value!r}")
    return int(value)


def _language(value: str) -> str:
    if len(value) != 2 or not value.isalpha():
        raise _FieldError(f"bad language code {value!r}")
    return value


def _text(value: str) -> str:
    if not value.strip():
        raise _FieldError("empty text")
    return value


def _uuid_or_id(value: str) -> str:
    if not value:
        raise _FieldError("empty id")
    return value


def _owl(value: str) -> str:
    # emptiness is only an error for active rows, checked after conversion
    return value


_CONVERTERS: dict[str, tuple[Callable[[str], object], ...]] = {
    "concept": (_sctid, _date, _active, _sctid, _sctid),
    "description": (_sctid, _date, _active, _sctid, _sctid, _language, _sctid, _text, _sctid),
    "relationship": (
        _sctid, _date, _active, _sctid, _sctid, _sctid, _group, _sctid, _sctid, _sctid
    ),
    "axiom": (_uuid_or_id, _date, _active, _sctid, _sctid, _sctid, _owl),
}


def parse_line(kind: str, line: str) -> Row:
    """Parses a single data line (terminator already stripped) into a row of the given kind.

    :raises ValueError: naming the first problem found on the line
    """
    row_type = ROW_TYPES[kind]
    fields = line.split("\t")
    if len(fields) != len(row_type.COLUMNS):
        raise _FieldError(f"expected {len(row_type.COLUMNS)} fields, got {len(fields)}")
    values = []
    for column, converter, value in zip(row_type.COLUMNS, _CONVERTERS[kind], fields):
        try:
            values.append(converter(value))
        except _FieldError as e:
            raise _FieldError(f"{column}: {e}") from e
    row = row_type(*values)
    if isinstance(row, AxiomRow) and row.active and not row.owl_expression.strip():
        raise _FieldError("owlExpression: empty expression on active row")
    return row


def _strip_terminator(line: str) -> str:
    if line.endswith("\n"):
        line = line[:-1]
    if line.endswith("\r"):
        line = line[:-1]
    return line


def parse_file(path: PathLike, kind: str) -> tuple[Iterator[Row], ParseReport]:
    """Opens an RF2 file and returns a lazy row iterator plus the report it fills in.

    .. code-block:: python

        rows, report = parse_file("sct2_Concept_Snapshot_INT.txt", "concept")
        concepts = list(rows)
        print(report.rows_ok, report.rows_skipped)

    :param path: Path to the file
    :param kind: One of ``concept``, ``description``, ``relationship``, ``axiom``
    :raises FileNotFoundError: if the file does not exist
    :raises RF2FormatError: if the header does not match the expected columns
    """
    if kind not in ROW_TYPES:
        raise ValueError(f"Unknown RF2 file kind {kind!r}. Expected one of {sorted(ROW_TYPES)}.")
    expected = "\t".join(ROW_TYPES[kind].COLUMNS)
    report = ParseReport(file=str(path))
    handle = open(path, "r", encoding="utf-8", newline="")
    try:
        header = _strip_terminator(handle.readline())
    except UnicodeDecodeError as e:
        handle.close()
        raise RF2FormatError(path, f"not valid UTF-8 ({e})") from e
    if header != expected:
        handle.close()
        raise RF2FormatError(path, f"header mismatch: expected {expected!r}, got {header!r}")

    def _rows() -> Iterator[Row]:
        line_number = 1
        with handle:
            lines = iter(handle)
            while True:
                try:
                    raw = next(lines)
                except StopIteration:
                    break
                except UnicodeDecodeError as e:
                    # decoding is chunked, so the bad byte is at or after this line
                    report.file_error = f"not valid UTF-8 after line {line_number} ({e})"
                    logger.error("Stopped reading %s: %s", report.file, report.file_error)
                    return
                line_number += 1
                line = _strip_terminator(raw)
                try:
                    row = parse_line(kind, line)
                except ValueError as e:
                    report.skip(line_number, str(e))
                    continue
                report.rows_ok += 1
                yield row
        if report.rows_skipped:
            logger.warning(
                "Skipped %d malformed lines in %s", report.rows_skipped, report.file
            )

    return _rows(), report


def parse_concept_file(path: PathLike) -> tuple[Iterator[ConceptRow], ParseReport]:
    return parse_file(path, "concept")


def parse_description_file(path: PathLike) -> tuple[Iterator[DescriptionRow], ParseReport]:
    return parse_file(path, "description")


def parse_relationship_file(path: PathLike) -> tuple[Iterator[RelationshipRow], ParseReport]:
    return parse_file(path, "relationship")


def parse_axiom_file(path: PathLike) -> tuple[Iterator[AxiomRow], ParseReport]:
    return parse_file(path, "axiom")


def discover_release(release_dir: PathLike) -> dict[str, list[pathlib.Path]]:
    """Finds the release files of each kind under a directory, sorted by path."""
    root = pathlib.Path(release_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"Release directory {release_dir} does not exist")
    found = {}
    for kind, patterns in RELEASE_FILE_PATTERNS.items():
        paths = set()
        for pattern in patterns:
            paths.update(p for p in root.rglob(pattern) if p.is_file())
        found[kind] = sorted(paths)
    return found


@dataclasses.dataclass
class ReleaseRows:
    concepts: list[ConceptRow] = dataclasses.field(default_factory=list)
    descriptions: list[DescriptionRow] = dataclasses.field(default_factory=list)
    relationships: list[RelationshipRow] = dataclasses.field(default_factory=list)
    axioms: list[AxiomRow] = dataclasses.field(default_factory=list)
    reports: list[ParseReport] = dataclasses.field(default_factory=list)

    def rows_of(self, kind: str) -> list:
        return {
            "concept": self.concepts,
            "description": self.descriptions,
            "relationship": self.relationships,
            "axiom": self.axioms,
        }[kind]

    @property
    def file_errors(self) -> list[ParseReport]:
        return [report for report in self.reports if report.file_error is not None]


def _parse_whole_file(path: pathlib.Path, kind: str) -> tuple[list[Row], ParseReport]:
    try:
        rows, report = parse_file(path, kind)
        parsed = list(rows)
        if report.file_error is not None:
            return [], report
        return parsed, report
    except (OSError, RF2FormatError) as e:
        logger.error("Could not parse %s: %s", path, e)
        return [], ParseReport(file=str(path), file_error=str(e))


def parallel_parse(release_dir: PathLike, worker_count: int = 4) -> ReleaseRows:
    """Parses every release file under ``release_dir`` with a pool of ``worker_count`` workers.

    Rows of each kind are concatenated in file-path order, so the result does not depend on the
    worker count. A file that fails is reported and does not stop the others; a kind with no file
    at all gets a report carrying a ``missing ... file`` error.

    :param release_dir: Directory holding (possibly nested) RF2 files
    :param worker_count: Number of parsing threads, at least 1
    :return: Rows per kind plus one report per file
    """
    if worker_count < 1:
        raise ValueError(f"worker_count must be >= 1, got {worker_count}")
    files = discover_release(release_dir)
    result = ReleaseRows()
    jobs = [(kind, path) for kind in RELEASE_FILE_PATTERNS for path in files[kind]]
    with concurrent.futures.ThreadPoolExecutor(max_workers=worker_count) as pool:
        futures = [pool.submit(_parse_whole_file, path, kind) for kind, path in jobs]
        # futures are consumed in submission order, which is file order
        for (kind, _), future in zip(jobs, futures):
            rows, report = future.result()
            result.rows_of(kind).extend(rows)
            result.reports.append(report)
    for kind in RELEASE_FILE_PATTERNS:
        if not files[kind]:
            result.reports.append(
                ParseReport(file=str(release_dir), file_error=f"missing {kind} file")
            )
    logger.info(
        "Parsed %d concepts, %d descriptions, %d relationships, %d axioms from %s",
        len(result.concepts),
        len(result.descriptions),
        len(result.relationships),
        len(result.axioms),
        release_dir,
    )
    return result


_DONE = object()


def stream_release(
    release_dir: PathLike,
    worker_count: int = 4,
    queue_size: int = 10_000,
    reports: Optional[list[ParseReport]] = None,
) -> Iterator[tuple[str, Row]]:
    """Streams ``(kind, row)`` pairs from all release files through a bounded queue.

    Workers block when the queue is full, so at most ``queue_size`` rows are buffered no matter how
    large the files are. Rows from one file stay in file order; files are interleaved.

    :param reports: Optional list the per-file reports are appended to
    """
    if worker_count < 1:
        raise ValueError(f"worker_count must be >= 1, got {worker_count}")
    files = discover_release(release_dir)
    jobs = [(kind, path) for kind in RELEASE_FILE_PATTERNS for path in files[kind]]
    rows: queue.Queue = queue.Queue(maxsize=queue_size)
    stop = threading.Event()
    lock = threading.Lock()

    def _worker(kind: str, path: pathlib.Path):
        try:
            iterator, report = parse_file(path, kind)
            for row in iterator:
                if stop.is_set():
                    return
                rows.put((kind, row))
        except (OSError, RF2FormatError) as e:
            report = ParseReport(file=str(path), file_error=str(e))
        finally:
            rows.put(_DONE)
        if reports is not None:
            with lock:
                reports.append(report)

    with concurrent.futures.ThreadPoolExecutor(max_workers=worker_count) as pool:
        for kind, path in jobs:
            pool.submit(_worker, kind, path)
        remaining = len(jobs)
        try:
            while remaining:
                item = rows.get()
                if item is _DONE:
                    remaining -= 1
                    continue
                yield item
        finally:
            stop.set()
            # unblock workers stuck on a full queue when the consumer stops early
            while remaining:
                if rows.get() is _DONE:
                    remaining -= 1


RELEASE_FILE_NAMES = {
    "concept": "sct2_Concept_{release_kind}_INT_{date}.txt",
    "description": "sct2_Description_{release_kind}-en_INT_{date}.txt",
    "relationship": "sct2_Relationship_{release_kind}_INT_{date}.txt",
    "axiom": "sct2_sRefset_OWLExpression{release_kind}_INT_{date}.txt",
}


def write_release(
    rows: ReleaseRows,
    out_dir: PathLike,
    date: int = 20240131,
    release_kind: Optional[str] = None,
) -> dict[str, pathlib.Path]:
    """Writes rows as RF2 files (tab-separated, CRLF, rows in the given order) under
    ``<out_dir>/<release_kind>/Terminology``. The result reads back with :py:func:`parallel_parse`.

    :param release_kind: ``"Snapshot"`` or ``"Full"``; ``"Full"`` when any concept id repeats
    :return: The path written per kind
    """
    if release_kind is None:
        repeated = len({c.id for c in rows.concepts}) != len(rows.concepts)
        release_kind = "Full" if repeated else "Snapshot"
    if release_kind not in ("Snapshot", "Full"):
        raise ValueError(f"release_kind must be 'Snapshot' or 'Full', got {release_kind!r}")
    directory = pathlib.Path(out_dir) / release_kind / "Terminology"
    directory.mkdir(parents=True, exist_ok=True)
    written = {}
    for kind, pattern in RELEASE_FILE_NAMES.items():
        path = directory / pattern.format(release_kind=release_kind, date=date)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write("\t".join(ROW_TYPES[kind].COLUMNS) + "\r\n")
            for row in rows.rows_of(kind):
                f.write(serialize_row(row) + "\r\n")
        written[kind] = path
    logger.debug("Wrote %s release files to %s", release_kind, directory)
    return written
