import abc
from typing import TYPE_CHECKING, Any, Optional, Sequence, Union

if TYPE_CHECKING:
    # type-checking-only for a circular import
    from sctkg.graph.records import EdgeRecord, NodeRecord

from sctkg.lifecycle.internal import lifecycle


@lifecycle.base_hook("pre_commit_batch")
class PreCommitBatchHook(abc.ABC):
    """Hook that runs once per commit attempt, after the batch is staged and before it is made
    durable. Raising from this hook fails the attempt and the staged batch is rolled back."""

    @abc.abstractmethod
    def pre_commit_batch(
        self,
        *,
        batch_id: str,
        attempt: int,
        nodes: Sequence["NodeRecord"],
        edges: Sequence["EdgeRecord"],
        **future_kwargs: Any,
    ):
        """Run before a batch attempt is committed.

        :param batch_id: Identifier of the batch, stable across retries
        :param attempt: 1-based attempt number
        :param nodes: Nodes in the batch
        :param edges: Edges in the batch
        :param future_kwargs: Future keyword arguments
        """
        pass


@lifecycle.base_hook("post_commit_batch")
class PostCommitBatchHook(abc.ABC):
    """Hook that runs once per batch after it committed or finally failed."""

    @abc.abstractmethod
    def post_commit_batch(
        self,
        *,
        batch_id: str,
        attempts: int,
        nodes: Sequence["NodeRecord"],
        edges: Sequence["EdgeRecord"],
        exception: Optional[Exception],
        **future_kwargs: Any,
    ):
        """Run after a batch is resolved.

        :param batch_id: Identifier of the batch
        :param attempts: Number of attempts made
        :param nodes: Nodes in the batch
        :param edges: Edges in the batch
        :param exception: The last error if the batch failed, else None
        :param future_kwargs: Future keyword arguments
        """
        pass


@lifecycle.base_hook("post_flush")
class PostFlushHook(abc.ABC):
    """Hook that runs after the loader flushed its pending buffer."""

    @abc.abstractmethod
    def post_flush(
        self,
        *,
        pending_nodes: int,
        pending_edges: int,
        latency: float,
        **future_kwargs: Any,
    ):
        """Run after a flush.

        :param pending_nodes: Number of nodes the flush wrote
        :param pending_edges: Number of edges the flush wrote
        :param latency: Wall-clock seconds the flush took
        :param future_kwargs: Future keyword arguments
        """
        pass


# strictly for typing -- this conflicts a bit with the lifecycle decorator above, but its fine for now
# This makes IDE completion/type-hinting easier
LifecycleAdapter = Union[PreCommitBatchHook, PostCommitBatchHook, PostFlushHook]
