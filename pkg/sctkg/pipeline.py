"""Wiring between the stages: release files → resolved snapshots → composites → graph store.

.. code-block:: python

    config = load_config("sctkg.ini")
    ingested = ingest_release("./release", include_axioms=config.graph.include_axioms)
    store, report = build_graph(ingested.composites, config.graph, store_dir="./store")
"""
import dataclasses
import logging
import os
import pathlib
from typing import Dict, List, Optional, Sequence, Tuple, Union

from sctkg.common.types import SnapshotReport
from sctkg.config import GraphConfig
from sctkg.core.composite import (
    CompositeConcept,
    CompositeReport,
    build_composites,
    drop_incomplete,
    reintegrate_axioms,
)
from sctkg.core.rf2 import AxiomTriple
from sctkg.core.snapshot import resolve_snapshot
from sctkg.graph.aliases import AliasTable
from sctkg.graph.buffer import AdaptiveFlushPolicy, FlushPolicy, StaticFlushPolicy
from sctkg.graph.loader import GraphLoader
from sctkg.graph.persistence import BaseGraphJournal, DevNullJournal, FileJournal
from sctkg.graph.store import CommitReport, GraphStore, RetryPolicy
from sctkg.lifecycle.base import LifecycleAdapter
from sctkg.parsing.owl import axiom_triples
from sctkg.parsing.rf2_files import ReleaseRows, RF2FormatError, parallel_parse

logger = logging.getLogger(__name__)

JOURNAL_FILE = "graph.journal"
REQUIRED_KINDS = ("concept", "description")


@dataclasses.dataclass
class IngestResult:
    composites: List[CompositeConcept]
    rows: ReleaseRows
    snapshot_reports: Dict[str, SnapshotReport]
    composite_report: CompositeReport
    axiom_errors: List[Tuple[str, str]] = dataclasses.field(default_factory=list)
    axiom_triples: int = 0
    axiom_self_loops: List[AxiomTriple] = dataclasses.field(default_factory=list)

    def summary(self) -> dict:
        return {
            "composites": len(self.composites),
            "rows": {
                "concepts": len(self.rows.concepts),
                "descriptions": len(self.rows.descriptions),
                "relationships": len(self.rows.relationships),
                "axioms": len(self.rows.axioms),
            },
            "rows_skipped": sum(report.rows_skipped for report in self.rows.reports),
            "file_errors": {r.file: r.file_error for r in self.rows.file_errors},
            "snapshot_errors": {
                kind: len(report.errors) + len(report.self_loops)
                for kind, report in self.snapshot_reports.items()
            },
            "orphan_descriptions": len(self.composite_report.orphan_descriptions),
            "orphan_relationships": len(self.composite_report.orphan_relationships),
            "dropped": [
                {"concept_id": cid, "reason": reason}
                for cid, reason in self.composite_report.dropped
            ],
            "axiom_triples": self.axiom_triples,
            "axiom_errors": len(self.axiom_errors),
            "axiom_self_loops": len(self.axiom_self_loops),
        }


def composites_from_rows(rows: ReleaseRows, include_axioms: bool = True) -> IngestResult:
    """Resolves each kind to its snapshot, folds axiom triples into the relationships and joins
    everything into composites, dropping the incomplete ones."""
    snapshot_reports = {
        kind: SnapshotReport() for kind in ("concept", "description", "relationship")
    }
    concepts = resolve_snapshot(rows.concepts, snapshot_reports["concept"])
    descriptions = resolve_snapshot(rows.descriptions, snapshot_reports["description"])
    relationships = resolve_snapshot(rows.relationships, snapshot_reports["relationship"])
    triples, errors, self_loops = [], [], []
    if include_axioms and rows.axioms:
        axiom_report = SnapshotReport()
        snapshot_reports["axiom"] = axiom_report
        triples, errors = axiom_triples(resolve_snapshot(rows.axioms, axiom_report))
        relationships = reintegrate_axioms(triples, relationships, self_loops=self_loops)
    composite_report = CompositeReport()
    composites = build_composites(concepts, descriptions, relationships, report=composite_report)
    kept, dropped = drop_incomplete(composites)
    composite_report.dropped.extend(dropped)
    return IngestResult(
        composites=kept,
        rows=rows,
        snapshot_reports=snapshot_reports,
        composite_report=composite_report,
        axiom_errors=[(axiom_id, str(error)) for axiom_id, error in errors],
        axiom_triples=len(triples) - len(self_loops),
        axiom_self_loops=self_loops,
    )


def ingest_release(
    release_dir: Union[str, os.PathLike], workers: int = 4, include_axioms: bool = True
) -> IngestResult:
    """Parses a release directory and turns it into composites.

    :raises FileNotFoundError: if ``release_dir`` does not exist
    :raises RF2FormatError: if the concept or description files are missing or unreadable.
        Row-level problems do not raise; they are in the result's reports.
    """
    root = pathlib.Path(release_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"Release directory {root} does not exist")
    rows = parallel_parse(root, worker_count=workers)
    for report in rows.file_errors:
        if any(f"missing {kind} file" == report.file_error for kind in REQUIRED_KINDS):
            raise RF2FormatError(report.file, report.file_error)
        logger.warning("%s: %s", report.file, report.file_error)
    if not rows.concepts:
        raise RF2FormatError(root, "no concept rows could be parsed")
    return composites_from_rows(rows, include_axioms=include_axioms)


def flush_policy_for(config: GraphConfig) -> FlushPolicy:
    if config.adaptive_flush:
        return AdaptiveFlushPolicy(
            initial=config.flush_threshold,
            minimum=min(100, config.flush_threshold),
            maximum=max(10_000, config.flush_threshold),
        )
    return StaticFlushPolicy(config.flush_threshold)


def open_journal(
    store_dir: Optional[Union[str, os.PathLike]], fsync: bool = False, fresh: bool = False
) -> BaseGraphJournal:
    """The store directory's journal, or an in-memory one without a directory.

    :param fresh: Discard an existing journal first
    """
    if store_dir is None:
        return DevNullJournal()
    path = pathlib.Path(store_dir) / JOURNAL_FILE
    if fresh and path.exists():
        logger.info("Discarding previous journal %s", path)
        path.unlink()
    return FileJournal(path, fsync=fsync)


def open_store(
    store_dir: Union[str, os.PathLike], config: Optional[GraphConfig] = None
) -> GraphStore:
    """Replays a store built earlier by :py:func:`build_graph`."""
    config = config if config is not None else GraphConfig()
    path = pathlib.Path(store_dir) / JOURNAL_FILE
    if not path.exists():
        raise FileNotFoundError(f"No graph journal at {path}; run build-graph first")
    return GraphStore.from_journal(
        FileJournal(path, fsync=config.fsync), dedupe_on_insert=config.dedupe_on_insert
    )


def load_aliases(config: GraphConfig) -> AliasTable:
    return AliasTable.from_file(config.alias_file) if config.alias_file else AliasTable()


def build_graph(
    composites: Sequence[CompositeConcept],
    config: Optional[GraphConfig] = None,
    store_dir: Optional[Union[str, os.PathLike]] = None,
    hooks: Sequence[LifecycleAdapter] = (),
) -> Tuple[GraphStore, CommitReport]:
    """Loads composites into a fresh store, journaled under ``store_dir`` when given.

    :raises BatchCommitError: if a batch failed for good
    """
    config = config if config is not None else GraphConfig()
    store = GraphStore(
        journal=open_journal(store_dir, fsync=config.fsync, fresh=True),
        hooks=hooks,
        retry_policy=RetryPolicy(max_attempts=config.retries, base_delay=config.retry_base_delay),
        dedupe_on_insert=config.dedupe_on_insert,
    )
    loader = GraphLoader(
        store,
        flush_policy=flush_policy_for(config),
        shards=config.shards,
        workers=config.workers,
        aliases=load_aliases(config),
    )
    report = loader.load(composites)
    return store, report
