from sctkg.datasets.backends import (
    BackendError,
    GenBackend,
    HttpBackend,
    MockBackend,
    case_context,
    load_template,
    make_backend,
)
from sctkg.datasets.cases import MergedCase, MergeReport, load_case_tables, merge_cases
from sctkg.datasets.generate import (
    ExpertTagMap,
    GenerationResult,
    RecordRejected,
    gen_platypus,
    generate_dataset,
    inject_knowledge,
    knowledge_from_store,
    to_esft_train,
    to_esft_val,
)
from sctkg.datasets.jsonl import parquet_to_jsonl, read_jsonl, write_jsonl
from sctkg.datasets.models import EsftTrainRecord, EsftValRecord, Message, PlatypusRecord
from sctkg.datasets.validate import validate_record

__all__ = [
    "BackendError",
    "case_context",
    "EsftTrainRecord",
    "EsftValRecord",
    "ExpertTagMap",
    "gen_platypus",
    "GenBackend",
    "generate_dataset",
    "GenerationResult",
    "HttpBackend",
    "inject_knowledge",
    "knowledge_from_store",
    "load_case_tables",
    "load_template",
    "make_backend",
    "merge_cases",
    "MergedCase",
    "MergeReport",
    "Message",
    "MockBackend",
    "parquet_to_jsonl",
    "PlatypusRecord",
    "read_jsonl",
    "RecordRejected",
    "to_esft_train",
    "to_esft_val",
    "validate_record",
    "write_jsonl",
]
