"""The in-process labeled property graph.

Nodes are concepts keyed by concept id, edges are typed relationships keyed by relationship id.
All writes are expressed as :py:class:`~sctkg.graph.records.GraphDelta` lists and applied under a
single lock with an undo log, so a batch is either entirely visible or not at all.
"""
import collections
import dataclasses
import itertools
import logging
import threading
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

from sctkg.common.types import UnknownConceptError
from sctkg.core.rf2 import RelationshipRow
from sctkg.graph.persistence import BaseGraphJournal, DevNullJournal
from sctkg.graph.records import (
    AddEdge,
    EdgeRecord,
    EnsurePlaceholder,
    GraphDelta,
    NodeRecord,
    RemoveEdge,
    UpsertNode,
    UpsertOutcome,
)
from sctkg.lifecycle import LifecycleAdapter, LifecycleAdapterSet

logger = logging.getLogger(__name__)


class StorageFault(RuntimeError):
    """A transient failure while committing. Commits that fail with this are retried."""

    pass


class BatchCommitError(RuntimeError):
    """A batch could not be committed within the retry budget. Nothing of it is visible."""

    def __init__(self, batch_id: str, attempts: int, cause: BaseException):
        super().__init__(f"batch {batch_id} failed after {attempts} attempts: {cause}")
        self.batch_id = batch_id
        self.attempts = attempts


RETRYABLE_ERRORS = (StorageFault, OSError)


@dataclasses.dataclass
class RetryPolicy:
    """Retry budget for one batch. Delays grow as ``base_delay * multiplier ** (attempt - 1)``."""

    max_attempts: int = 3
    base_delay: float = 0.05
    multiplier: float = 2.0
    max_delay: float = 5.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError(f"max_attempts must be >= 1, got {self.max_attempts}")
        if self.base_delay < 0 or self.multiplier < 1:
            raise ValueError(
                f"Backoff must be non-decreasing: base_delay={self.base_delay}, "
                f"multiplier={self.multiplier}"
            )


@dataclasses.dataclass
class CommitReport:
    batches_committed: int = 0
    batches_retried: int = 0
    batches_failed: int = 0
    nodes_written: int = 0
    edges_written: int = 0

    def __iadd__(self, other: "CommitReport") -> "CommitReport":
        for field in dataclasses.fields(self):
            setattr(self, field.name, getattr(self, field.name) + getattr(other, field.name))
        return self


@dataclasses.dataclass
class GraphStats:
    categories: Dict[str, int]
    relationship_types: Dict[str, int]

    def to_dict(self) -> dict:
        return {"categories": self.categories, "relationship_types": self.relationship_types}


class GraphData:
    """Indexed graph containers plus the undo log. Only deltas write to this, and only while the
    owning store holds its lock."""

    def __init__(self, dedupe: bool = True):
        self.dedupe = dedupe
        self.nodes: Dict[int, NodeRecord] = {}
        self.edges: Dict[int, EdgeRecord] = {}
        self.triples: Dict[Tuple[int, int, int], set] = collections.defaultdict(set)
        self.out_edges: Dict[int, set] = collections.defaultdict(set)
        self.in_edges: Dict[int, set] = collections.defaultdict(set)
        self.redundancy_notes: List[Tuple[int, int]] = []
        self._undo: Optional[List[Callable[[], None]]] = None

    def begin(self):
        self._undo = []

    def commit(self):
        self._undo = None

    def rollback(self):
        undo, self._undo = self._undo or [], None
        for step in reversed(undo):
            step()

    def _record(self, step: Callable[[], None]):
        if self._undo is not None:
            self._undo.append(step)

    def put_node(self, node: NodeRecord):
        previous = self.nodes.get(node.concept_id)
        self.nodes[node.concept_id] = node
        if previous is None:
            self._record(lambda: self.nodes.pop(node.concept_id))
        else:
            self._record(lambda: self.nodes.__setitem__(node.concept_id, previous))

    def _index(self, edge: EdgeRecord):
        self.triples[edge.triple].add(edge.relationship_id)
        self.out_edges[edge.source_id].add(edge.relationship_id)
        self.in_edges[edge.destination_id].add(edge.relationship_id)

    def _unindex(self, edge: EdgeRecord):
        for index, key in (
            (self.triples, edge.triple),
            (self.out_edges, edge.source_id),
            (self.in_edges, edge.destination_id),
        ):
            index[key].discard(edge.relationship_id)
            if not index[key]:
                del index[key]

    def _restore_edge(self, edge: EdgeRecord):
        self.edges[edge.relationship_id] = edge
        self._index(edge)

    def _forget_edge(self, relationship_id: int):
        self._unindex(self.edges.pop(relationship_id))

    def put_edge(self, edge: EdgeRecord):
        previous = self.edges.get(edge.relationship_id)
        if previous is not None:
            self._forget_edge(previous.relationship_id)
        self._restore_edge(edge)

        def undo():
            self._forget_edge(edge.relationship_id)
            if previous is not None:
                self._restore_edge(previous)

        self._record(undo)

    def drop_edge(self, relationship_id: int):
        previous = self.edges[relationship_id]
        self._forget_edge(relationship_id)
        self._record(lambda: self._restore_edge(previous))

    def note_redundancy(self, kept: int, removed: int):
        self.redundancy_notes.append((kept, removed))
        self._record(self.redundancy_notes.pop)


class GraphStore:
    """Thread-safe property graph with atomic batch commits.

    .. code-block:: python

        store = GraphStore()
        store.upsert_node(NodeRecord(123, "Diabetes mellitus", "disorder", []))
        store.add_edge(relationship_row, aliases.resolver(store))
        store.submit_batch(nodes, edges)  # all-or-nothing, retried on StorageFault

    Every mutation is journaled. Reads return copies; hold no references across writes.
    """

    def __init__(
        self,
        journal: Optional[BaseGraphJournal] = None,
        hooks: Sequence[LifecycleAdapter] = (),
        retry_policy: Optional[RetryPolicy] = None,
        dedupe_on_insert: bool = True,
    ):
        """
        :param journal: Durable log of committed batches. Defaults to no persistence.
        :param hooks: Lifecycle adapters called around batch commits
        :param retry_policy: Retry budget for :py:meth:`submit_batch`
        :param dedupe_on_insert: Resolve repeated triples on insert. Turned off only to build
            deliberately redundant graphs for the validator.
        """
        self._data = GraphData(dedupe=dedupe_on_insert)
        self._lock = threading.RLock()
        self._journal = journal if journal is not None else DevNullJournal()
        self._hooks = LifecycleAdapterSet(*hooks)
        self.retry_policy = retry_policy if retry_policy is not None else RetryPolicy()
        self._report = CommitReport()
        self._batch_counter = itertools.count(1)
        self.retry_log: List[Tuple[str, int, str]] = []

    @classmethod
    def from_journal(cls, journal: BaseGraphJournal, **kwargs) -> "GraphStore":
        """Rebuilds a store by replaying every committed batch in the journal. The journal stays
        attached, so further writes append to it."""
        store = cls(journal=journal, **kwargs)
        batches = 0
        with store._lock:
            for _, deltas in journal.replay():
                for delta in deltas:
                    delta.apply_mutate(store._data)
                batches += 1
        logger.info(
            "Replayed %d batches: %d nodes, %d edges",
            batches,
            len(store._data.nodes),
            len(store._data.edges),
        )
        return store

    def add_hooks(self, *hooks: LifecycleAdapter):
        with self._lock:
            self._hooks = self._hooks.with_new_adapters(*hooks)

    def _next_batch_id(self) -> str:
        return f"batch-{next(self._batch_counter):08d}"

    def _apply(
        self,
        deltas: Sequence[GraphDelta],
        batch_id: str,
        attempt: int = 1,
        nodes: Sequence[NodeRecord] = (),
        edges: Sequence[EdgeRecord] = (),
    ) -> list:
        """Applies deltas as one unit. Any exception (from a delta, a hook or the journal)
        rolls back everything this call wrote."""
        with self._lock:
            self._data.begin()
            try:
                results = [delta.apply_mutate(self._data) for delta in deltas]
                self._hooks.call_all_lifecycle_hooks_sync(
                    "pre_commit_batch", batch_id=batch_id, attempt=attempt, nodes=nodes, edges=edges
                )
                self._journal.append(batch_id, deltas)
            except BaseException:
                self._data.rollback()
                raise
            self._data.commit()
            return results

    def upsert_node(self, node: NodeRecord) -> UpsertOutcome:
        """Creates the node, or merges it into the stored one (synonyms unioned, name and category
        taken from real data, placeholder cleared by real data)."""
        delta = UpsertNode(node.copy())
        delta.validate()
        return self._apply([delta], self._next_batch_id(), nodes=[node])[0]

    def ensure_placeholder(self, concept_id: int) -> NodeRecord:
        delta = EnsurePlaceholder(concept_id)
        delta.validate()
        with self._lock:
            if concept_id in self._data.nodes:
                return self._data.nodes[concept_id].copy()
            return self._apply([delta], self._next_batch_id())[0].copy()

    def add_edge_record(self, edge: EdgeRecord) -> EdgeRecord:
        """Stores an edge, creating placeholder endpoints. A repeated triple keeps the edge with
        the larger relationship id; the returned record is the one that was kept.

        :raises ValueError: for self-loops and invalid ids
        """
        delta = AddEdge(edge.copy())
        delta.validate()
        return self._apply([delta], self._next_batch_id(), edges=[edge])[0].copy()

    def add_edge(
        self, relationship: RelationshipRow, type_name_resolver: Callable[[int], str]
    ) -> EdgeRecord:
        """Adds an edge for an active relationship row, naming it with ``type_name_resolver``.

        A row repeating a stored ``(source, type, destination)`` triple does not add an edge. The
        larger relationship id stays stored, so a later row with a larger id replaces the earlier
        edge; either way ``redundancy_notes`` gets ``(kept, removed)``.
        """
        if not relationship.active:
            raise ValueError(f"Relationship {relationship.id} is inactive and cannot be added.")
        return self.add_edge_record(
            EdgeRecord(
                relationship_id=relationship.id,
                source_id=relationship.source_id,
                destination_id=relationship.destination_id,
                type_id=relationship.type_id,
                type_name=type_name_resolver(relationship.type_id),
                relationship_group=relationship.relationship_group,
            )
        )

    def remove_edges(self, relationship_ids: Iterable[int]) -> int:
        deltas = [RemoveEdge(rid) for rid in relationship_ids]
        if not deltas:
            return 0
        self._apply(deltas, self._next_batch_id())
        return len(deltas)

    def submit_batch(
        self,
        nodes: Sequence[NodeRecord],
        edges: Sequence[EdgeRecord],
        batch_id: Optional[str] = None,
    ) -> CommitReport:
        """Commits nodes and edges atomically, retrying transient faults with exponential backoff.

        :param nodes: Nodes to upsert
        :param edges: Edges to add
        :param batch_id: Identifier carried in hooks, the journal and errors. Generated if absent.
        :return: This batch's contribution to the commit counters
        :raises BatchCommitError: when every attempt failed. The batch is not visible.
        :raises ValueError: for an empty batch or an invalid element, before any attempt
        """
        if not nodes and not edges:
            raise ValueError("Cannot submit an empty batch.")
        batch_id = batch_id if batch_id is not None else self._next_batch_id()
        deltas: List[GraphDelta] = [UpsertNode(n.copy()) for n in nodes]
        deltas.extend(AddEdge(e.copy()) for e in edges)
        for delta in deltas:
            delta.validate()

        policy = self.retry_policy
        attempts = 0

        def _log_retry(retry_state):
            error = retry_state.outcome.exception()
            logger.warning(
                "Commit of %s failed on attempt %d (%s), retrying", batch_id, attempts, error
            )
            with self._lock:
                self.retry_log.append((batch_id, attempts, str(error)))

        retrying = Retrying(
            stop=stop_after_attempt(policy.max_attempts),
            wait=wait_exponential(
                multiplier=policy.base_delay, exp_base=policy.multiplier, max=policy.max_delay
            ),
            retry=retry_if_exception_type(RETRYABLE_ERRORS),
            before_sleep=_log_retry,
            reraise=True,
        )
        exception: Optional[BaseException] = None
        try:
            for attempt in retrying:
                with attempt:
                    attempts += 1
                    self._apply(deltas, batch_id, attempts, nodes, edges)
        except RETRYABLE_ERRORS as e:
            exception = e
        report = CommitReport(
            batches_committed=0 if exception else 1,
            batches_retried=1 if attempts > 1 else 0,
            batches_failed=1 if exception else 0,
            nodes_written=0 if exception else len(nodes),
            edges_written=0 if exception else len(edges),
        )
        with self._lock:
            self._report += report
        self._hooks.call_all_lifecycle_hooks_sync(
            "post_commit_batch",
            batch_id=batch_id,
            attempts=attempts,
            nodes=nodes,
            edges=edges,
            exception=exception,
        )
        if exception is not None:
            logger.error(
                "Batch %s rolled back after %d attempts: %s", batch_id, attempts, exception
            )
            raise BatchCommitError(batch_id, attempts, exception) from exception
        return report

    @property
    def commit_report(self) -> CommitReport:
        with self._lock:
            return dataclasses.replace(self._report)

    @property
    def redundancy_notes(self) -> List[Tuple[int, int]]:
        """``(kept_relationship_id, removed_relationship_id)`` pairs resolved on insert. The removed
        id is either the incoming edge, which was never stored, or a stored edge it replaced."""
        with self._lock:
            return list(self._data.redundancy_notes)

    @property
    def dedupe_on_insert(self) -> bool:
        return self._data.dedupe

    def has_node(self, concept_id: int) -> bool:
        with self._lock:
            return concept_id in self._data.nodes

    def get_node(self, concept_id: int) -> NodeRecord:
        with self._lock:
            node = self._data.nodes.get(concept_id)
            if node is None:
                raise UnknownConceptError(concept_id)
            return node.copy()

    def get_edge(self, relationship_id: int) -> EdgeRecord:
        with self._lock:
            edge = self._data.edges.get(relationship_id)
            if edge is None:
                raise KeyError(f"No edge with relationship id {relationship_id}")
            return edge.copy()

    def nodes(self) -> List[NodeRecord]:
        """All nodes, ascending by concept id."""
        with self._lock:
            return [self._data.nodes[k].copy() for k in sorted(self._data.nodes)]

    def edges(self) -> List[EdgeRecord]:
        """All edges, ascending by relationship id."""
        with self._lock:
            return [self._data.edges[k].copy() for k in sorted(self._data.edges)]

    def out_edges(self, concept_id: int) -> List[EdgeRecord]:
        """Edges leaving a node, ordered by (destination, type, relationship id)."""
        with self._lock:
            rids = self._data.out_edges.get(concept_id, ())
            edges = [self._data.edges[rid].copy() for rid in rids]
        return sorted(edges, key=lambda e: (e.destination_id, e.type_id, e.relationship_id))

    def in_edges(self, concept_id: int) -> List[EdgeRecord]:
        with self._lock:
            rids = self._data.in_edges.get(concept_id, ())
            edges = [self._data.edges[rid].copy() for rid in rids]
        return sorted(edges, key=lambda e: (e.source_id, e.type_id, e.relationship_id))

    def adjacency(self) -> Dict[int, Tuple[List[int], List[int]]]:
        """Per node, the relationship ids attached as outgoing and incoming, from the indexes
        rather than from the edge fields."""
        with self._lock:
            return {
                concept_id: (
                    sorted(self._data.out_edges.get(concept_id, ())),
                    sorted(self._data.in_edges.get(concept_id, ())),
                )
                for concept_id in sorted(set(self._data.out_edges) | set(self._data.in_edges))
            }

    @property
    def node_count(self) -> int:
        with self._lock:
            return len(self._data.nodes)

    @property
    def edge_count(self) -> int:
        with self._lock:
            return len(self._data.edges)

    def stats(self) -> GraphStats:
        """Node counts per category and edge counts per type name, from one consistent view."""
        with self._lock:
            categories = collections.Counter(n.category for n in self._data.nodes.values())
            types = collections.Counter(e.type_name for e in self._data.edges.values())
        return GraphStats(dict(sorted(categories.items())), dict(sorted(types.items())))

    def canonical(self) -> Tuple[Tuple[NodeRecord, ...], Tuple[EdgeRecord, ...]]:
        """Comparable view of the whole graph; equal for equal graphs."""
        with self._lock:
            return tuple(self.nodes()), tuple(self.edges())

    def close(self):
        self._journal.close()
