import logging
from typing import Iterable, Optional, TypeVar

from sctkg.common.types import RowError, SnapshotReport
from sctkg.core.rf2 import RelationshipRow, is_valid_effective_time

logger = logging.getLogger(__name__)

R = TypeVar("R")


def resolve_snapshot(rows: Iterable[R], report: Optional[SnapshotReport] = None) -> list[R]:
    """Collapses versioned rows of one kind into the current snapshot.

    For each id the row with the greatest ``effective_time`` wins (ties go to the row that came
    later in the input). The winner is kept only when it is active. Output is ordered by id.

    Rows with an invalid effective time are skipped and recorded in ``report``. Active
    relationship rows that loop back onto their source are rejected the same way.

    .. code-block:: python

        rows = [ConceptRow(1, 20200101, True, ...), ConceptRow(1, 20220101, False, ...)]
        resolve_snapshot(rows)  # [] -- the latest version is inactive

    :param rows: Rows of a single kind, in any order
    :param report: Optional report to collect rejected rows into
    :return: The active current rows, ascending by id
    """
    latest: dict = {}
    for index, row in enumerate(rows):
        if not is_valid_effective_time(row.effective_time):
            if report is not None:
                report.errors.append(
                    RowError(index, f"malformed effectiveTime {row.effective_time!r}")
                )
            continue
        key = (row.effective_time, index)
        current = latest.get(row.id)
        if current is None or key > current[0]:
            latest[row.id] = (key, row)

    resolved = []
    for row_id in sorted(latest):
        row = latest[row_id][1]
        if not row.active:
            continue
        if isinstance(row, RelationshipRow) and row.source_id == row.destination_id:
            logger.warning("Rejecting self-loop relationship %s on %s", row.id, row.source_id)
            if report is not None:
                report.self_loops.append(row.id)
            continue
        resolved.append(row)
    return resolved

