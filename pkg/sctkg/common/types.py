import dataclasses
from typing import Optional


# Report types shared across the parsing, snapshot and graph layers.
# Anything that skips input collects a reason here rather than dropping it quietly.
@dataclasses.dataclass(frozen=True)
class RowError:
    line_number: int
    reason: str


@dataclasses.dataclass
class ParseReport:
    """Outcome of parsing one RF2 file. ``rows_ok + rows_skipped`` equals the number of data lines
    read, and ``file_error`` is set when the file could not be parsed at all."""

    file: str
    rows_ok: int = 0
    rows_skipped: int = 0
    errors: list[RowError] = dataclasses.field(default_factory=list)
    file_error: Optional[str] = None

    def skip(self, line_number: int, reason: str):
        self.rows_skipped += 1
        self.errors.append(RowError(line_number, reason))

    @property
    def ok(self) -> bool:
        return self.file_error is None and self.rows_skipped == 0


@dataclasses.dataclass
class SnapshotReport:
    """Rows rejected while resolving a snapshot. ``index`` is the row's position in the input."""

    errors: list[RowError] = dataclasses.field(default_factory=list)
    self_loops: list[int] = dataclasses.field(default_factory=list)


class UnknownConceptError(LookupError):
    """Raised when a concept id is not known to the store or server being asked."""

    def __init__(self, concept_id: int, where: str = "store"):
        super().__init__(f"unknown concept {concept_id} ({where})")
        self.concept_id = concept_id
