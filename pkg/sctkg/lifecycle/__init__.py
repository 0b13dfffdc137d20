from sctkg.lifecycle.base import (
    LifecycleAdapter,
    PostCommitBatchHook,
    PostFlushHook,
    PreCommitBatchHook,
)
from sctkg.lifecycle.default import CommitLogger, SlowDownHook
from sctkg.lifecycle.internal import InvalidLifecycleHook, LifecycleAdapterSet

__all__ = [
    "CommitLogger",
    "InvalidLifecycleHook",
    "LifecycleAdapter",
    "LifecycleAdapterSet",
    "PostCommitBatchHook",
    "PostFlushHook",
    "PreCommitBatchHook",
    "SlowDownHook",
]
