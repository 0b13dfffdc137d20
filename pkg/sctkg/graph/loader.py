import concurrent.futures
import logging
import time
from typing import Iterable, List, Optional, Sequence

from sctkg.core.composite import CompositeConcept
from sctkg.graph.aliases import AliasTable
from sctkg.graph.buffer import BufferSlice, FlushPolicy, StaticFlushPolicy, SubgraphBuffer, shard
from sctkg.graph.records import EdgeRecord, NodeRecord
from sctkg.graph.store import BatchCommitError, CommitReport, GraphStore
from sctkg.lifecycle import LifecycleAdapter, LifecycleAdapterSet

logger = logging.getLogger(__name__)


def composite_to_records(
    composite: CompositeConcept, aliases: AliasTable
) -> tuple[NodeRecord, List[EdgeRecord]]:
    node = NodeRecord(
        concept_id=composite.concept_id,
        name=composite.term,
        category=composite.category,
        synonyms=list(composite.synonyms),
        placeholder=False,
    )
    edges = [
        EdgeRecord(
            relationship_id=ref.relationship_id,
            source_id=composite.concept_id,
            destination_id=ref.destination_id,
            type_id=type_id,
            type_name=aliases.edge_type_name(type_id, ref.type_name),
            relationship_group=ref.relationship_group,
        )
        for type_id, refs in composite.relationships.items()
        for ref in refs
    ]
    return node, edges


class GraphLoader:
    """Streams composites into a store: node upserts and edges go into a buffer, and every time
    the buffer reaches the flush threshold it is sharded and the shards are committed
    concurrently.

    .. code-block:: python

        loader = GraphLoader(store, flush_policy=StaticFlushPolicy(1000), shards=4, workers=4)
        report = loader.load(composites)

    The final graph does not depend on threshold, shard count or worker count.
    """

    def __init__(
        self,
        store: GraphStore,
        flush_policy: Optional[FlushPolicy] = None,
        shards: int = 1,
        workers: int = 1,
        aliases: Optional[AliasTable] = None,
        hooks: Sequence[LifecycleAdapter] = (),
    ):
        if shards < 1 or workers < 1:
            raise ValueError(f"shards and workers must be >= 1, got {shards} and {workers}")
        self.store = store
        self.flush_policy = flush_policy if flush_policy is not None else StaticFlushPolicy()
        self.shards = shards
        self.workers = workers
        self.aliases = aliases if aliases is not None else AliasTable()
        self._hooks = LifecycleAdapterSet(self.flush_policy, *hooks)
        self.buffer = SubgraphBuffer(self.flush_policy.threshold)
        self.flushes = 0

    def load(self, composites: Iterable[CompositeConcept]) -> CommitReport:
        """Loads every composite and flushes what remains at the end.

        :return: Commit counters for this load
        :raises BatchCommitError: if a batch failed for good. Other shards of the same flush still
            commit, and the error names the first failed batch.
        """
        report = CommitReport()
        for composite in composites:
            node, edges = composite_to_records(composite, self.aliases)
            self.buffer.add_node(node)
            for edge in edges:
                self.buffer.add_edge(edge)
            if self.buffer.should_flush():
                report += self.flush()
        if not self.buffer.is_empty():
            report += self.flush()
        logger.info(
            "Loaded %d nodes and %d edges in %d batches (%d retried)",
            report.nodes_written,
            report.edges_written,
            report.batches_committed,
            report.batches_retried,
        )
        return report

    def flush(self) -> CommitReport:
        pending = self.buffer.drain()
        slices = [s for s in shard(pending, self.shards) if len(s)]
        started = time.perf_counter()
        report = CommitReport()
        errors: List[BatchCommitError] = []
        with concurrent.futures.ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [
                pool.submit(self._commit_slice, piece, index)
                for index, piece in enumerate(slices)
            ]
            for future in futures:
                try:
                    report += future.result()
                except BatchCommitError as e:
                    errors.append(e)
                    report.batches_failed += 1
                    report.batches_retried += 1 if e.attempts > 1 else 0
        latency = time.perf_counter() - started
        self.flushes += 1
        self._hooks.call_all_lifecycle_hooks_sync(
            "post_flush",
            pending_nodes=len(pending.nodes),
            pending_edges=len(pending.edges),
            latency=latency,
        )
        self.buffer.flush_threshold = self.flush_policy.threshold
        if errors:
            raise errors[0]
        return report

    def _commit_slice(self, piece: BufferSlice, index: int) -> CommitReport:
        batch_id = f"flush-{self.flushes + 1:06d}-shard-{index:03d}"
        return self.store.submit_batch(piece.nodes, piece.edges, batch_id=batch_id)
