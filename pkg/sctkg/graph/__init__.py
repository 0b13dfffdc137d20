from sctkg.graph.aliases import DEFAULT_ALIASES, AliasTable
from sctkg.graph.buffer import (
    AdaptiveFlushPolicy,
    BufferSlice,
    FlushPolicy,
    StaticFlushPolicy,
    SubgraphBuffer,
    shard,
)
from sctkg.graph.export import export_bulk_csv, import_bulk_csv
from sctkg.graph.loader import GraphLoader
from sctkg.graph.persistence import BaseGraphJournal, DevNullJournal, FileJournal
from sctkg.graph.records import EdgeRecord, NodeRecord
from sctkg.graph.store import (
    BatchCommitError,
    CommitReport,
    GraphStats,
    GraphStore,
    RetryPolicy,
    StorageFault,
)
from sctkg.graph.validator import (
    ValidationReport,
    check_id_consistency,
    detect_redundant_edges,
    validate,
    verify_multi_hop,
)

__all__ = [
    "AdaptiveFlushPolicy",
    "AliasTable",
    "BaseGraphJournal",
    "BatchCommitError",
    "BufferSlice",
    "check_id_consistency",
    "CommitReport",
    "DEFAULT_ALIASES",
    "detect_redundant_edges",
    "DevNullJournal",
    "EdgeRecord",
    "export_bulk_csv",
    "FileJournal",
    "FlushPolicy",
    "GraphLoader",
    "GraphStats",
    "GraphStore",
    "import_bulk_csv",
    "NodeRecord",
    "RetryPolicy",
    "shard",
    "StaticFlushPolicy",
    "StorageFault",
    "SubgraphBuffer",
    "validate",
    "ValidationReport",
    "verify_multi_hop",
]
