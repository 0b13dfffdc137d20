import abc
import dataclasses
import logging
from typing import Any, List

from sctkg.graph.records import EdgeRecord, NodeRecord
from sctkg.lifecycle import PostFlushHook

logger = logging.getLogger(__name__)

DEFAULT_FLUSH_THRESHOLD = 1000


@dataclasses.dataclass
class BufferSlice:
    """A unit of work for one :py:meth:`GraphStore.submit_batch` call."""

    nodes: List[NodeRecord] = dataclasses.field(default_factory=list)
    edges: List[EdgeRecord] = dataclasses.field(default_factory=list)

    def __len__(self) -> int:
        return len(self.nodes) + len(self.edges)


class SubgraphBuffer:
    """Pending nodes and edges waiting for the next flush.

    The loader checks :py:meth:`should_flush` after every node it adds, so the number of pending
    nodes never exceeds the threshold. ``peak_pending_nodes`` records the high-water mark.
    """

    def __init__(self, flush_threshold: int = DEFAULT_FLUSH_THRESHOLD):
        if flush_threshold < 1:
            raise ValueError(f"flush_threshold must be >= 1, got {flush_threshold}")
        self.flush_threshold = flush_threshold
        self.pending_nodes: List[NodeRecord] = []
        self.pending_edges: List[EdgeRecord] = []
        self.peak_pending_nodes = 0
        self.peak_pending_edges = 0

    def add_node(self, node: NodeRecord):
        self.pending_nodes.append(node)
        self.peak_pending_nodes = max(self.peak_pending_nodes, len(self.pending_nodes))

    def add_edge(self, edge: EdgeRecord):
        self.pending_edges.append(edge)
        self.peak_pending_edges = max(self.peak_pending_edges, len(self.pending_edges))

    def should_flush(self) -> bool:
        return len(self.pending_nodes) >= self.flush_threshold

    def is_empty(self) -> bool:
        return not self.pending_nodes and not self.pending_edges

    def drain(self) -> BufferSlice:
        drained = BufferSlice(self.pending_nodes, self.pending_edges)
        self.pending_nodes, self.pending_edges = [], []
        return drained


def shard(pending: BufferSlice, n: int) -> List[BufferSlice]:
    """Partitions pending work into ``n`` disjoint slices for concurrent commits.

    Nodes are dealt round-robin in concept id order, so slice sizes differ by at most one. An edge
    goes to the slice holding its source node when that node is pending, else to slice
    ``source_id % n``. Empty slices are kept so that the result always has ``n`` entries.

    :param pending: The drained buffer
    :param n: Number of slices, at least 1
    :return: ``n`` slices whose union is ``pending``
    """
    if n < 1:
        raise ValueError(f"Shard count must be >= 1, got {n}")
    if n == 1:
        return [BufferSlice(list(pending.nodes), list(pending.edges))]
    slices = [BufferSlice() for _ in range(n)]
    home = {}
    for index, node in enumerate(sorted(pending.nodes, key=lambda node: node.concept_id)):
        home.setdefault(node.concept_id, index % n)
        slices[home[node.concept_id]].nodes.append(node)
    for edge in pending.edges:
        slices[home.get(edge.source_id, edge.source_id % n)].edges.append(edge)
    return slices


class FlushPolicy(PostFlushHook, abc.ABC):
    """Decides the flush threshold. Registered as a ``post_flush`` hook so that it can observe
    every flush and adjust."""

    @property
    @abc.abstractmethod
    def threshold(self) -> int:
        pass

    def post_flush(
        self, *, pending_nodes: int, pending_edges: int, latency: float, **future_kwargs: Any
    ):
        pass


class StaticFlushPolicy(FlushPolicy):
    def __init__(self, threshold: int = DEFAULT_FLUSH_THRESHOLD):
        if threshold < 1:
            raise ValueError(f"threshold must be >= 1, got {threshold}")
        self._threshold = threshold

    @property
    def threshold(self) -> int:
        return self._threshold


class AdaptiveFlushPolicy(FlushPolicy):
    """Halves the threshold when a flush takes much longer than ``target_latency`` and doubles it
    when a flush is much faster, staying within ``[minimum, maximum]``. Only full flushes count;
    the final partial flush says nothing about throughput."""

    def __init__(
        self,
        initial: int = DEFAULT_FLUSH_THRESHOLD,
        minimum: int = 100,
        maximum: int = 10_000,
        target_latency: float = 0.5,
        tolerance: float = 2.0,
    ):
        if not 1 <= minimum <= initial <= maximum:
            raise ValueError(
                f"Expected 1 <= minimum <= initial <= maximum, got {minimum}, {initial}, {maximum}"
            )
        if target_latency <= 0 or tolerance <= 1:
            raise ValueError(
                f"target_latency must be > 0 and tolerance > 1, got {target_latency}, {tolerance}"
            )
        self._threshold = initial
        self.minimum = minimum
        self.maximum = maximum
        self.target_latency = target_latency
        self.tolerance = tolerance
        self.history: List[int] = [initial]

    @property
    def threshold(self) -> int:
        return self._threshold

    def post_flush(
        self, *, pending_nodes: int, pending_edges: int, latency: float, **future_kwargs: Any
    ):
        if pending_nodes < self._threshold:
            return
        if latency > self.target_latency * self.tolerance:
            new_threshold = max(self.minimum, self._threshold // 2)
        elif latency < self.target_latency / self.tolerance:
            new_threshold = min(self.maximum, self._threshold * 2)
        else:
            return
        if new_threshold != self._threshold:
            logger.debug(
                "Flush of %d nodes took %.3fs, threshold %d -> %d",
                pending_nodes,
                latency,
                self._threshold,
                new_threshold,
            )
            self._threshold = new_threshold
            self.history.append(new_threshold)
