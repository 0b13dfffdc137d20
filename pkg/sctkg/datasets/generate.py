import concurrent.futures
import dataclasses
import json
import logging
import os
from typing import Callable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import pydantic

from sctkg.datasets.backends import BackendError, GenBackend, render_prompt
from sctkg.datasets.cases import MergedCase
from sctkg.datasets.models import (
    KNOWLEDGE_MARKER,
    PROMPT_SUFFIX,
    SUMMARY_CUE,
    USER_PREFIX,
    EsftTrainRecord,
    EsftValRecord,
    Message,
    PlatypusRecord,
    char_count,
    schema_model,
)
from sctkg.datasets.validate import validate_record, violations_from_error
from sctkg.graph.aliases import AliasTable
from sctkg.graph.store import GraphStore
from sctkg.paths.engine import (
    DEFAULT_MAX_DEPTH,
    DEFAULT_MAX_PATHS,
    KnowledgeVector,
    RenderMode,
    build_knowledge_vector,
)

logger = logging.getLogger(__name__)

Schema = Literal["platypus", "esft_train", "esft_val"]
KnowledgeSource = Callable[[MergedCase], Optional[KnowledgeVector]]

DEFAULT_EXPERT_TAGS: dict[str, List[str]] = {
    "Clinical Psychology": ["psychiatry"],
    "Psychiatry": ["psychiatry"],
    "Respiratory Medicine": ["respiratory"],
    "Infectious Diseases": ["infectious"],
    "Otolaryngology": ["ent", "infectious"],
    "Rheumatology": ["rheumatology", "immunology"],
    "Cardiology": ["cardiovascular"],
    "Gastroenterology": ["digestive"],
    "Neurology": ["neurology"],
    "Pediatrics": ["pediatric"],
}


class RecordRejected(ValueError):
    """An assembled record failed schema validation and was not emitted."""

    def __init__(self, visit_id: int, violations: List[str]):
        super().__init__(f"record for visit {visit_id} rejected: {'; '.join(violations)}")
        self.visit_id = visit_id
        self.violations = violations


class ExpertTagMap:
    """Clinic type -> expert tags. Lookup ignores case and surrounding whitespace; unmapped clinic
    types get no tags."""

    def __init__(self, mapping: Optional[Mapping[str, Sequence[str]]] = None):
        source = mapping if mapping is not None else DEFAULT_EXPERT_TAGS
        self._tags = {key.strip().lower(): list(tags) for key, tags in source.items()}

    @classmethod
    def from_file(
        cls, path: Union[str, os.PathLike], extend_defaults: bool = True
    ) -> "ExpertTagMap":
        """Reads a JSON object ``{"<clinic type>": ["tag", ...]}``."""
        with open(path, encoding="utf-8") as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict) or not all(
            isinstance(v, list) and all(isinstance(t, str) for t in v) for v in loaded.values()
        ):
            raise ValueError(f"{path}: expected a JSON object of string lists")
        mapping = {**DEFAULT_EXPERT_TAGS, **loaded} if extend_defaults else loaded
        return cls(mapping)

    def tags_for(self, clinic_type: str) -> List[str]:
        return list(self._tags.get(clinic_type.strip().lower(), []))


def inject_knowledge(
    dialogue: str, knowledge: KnowledgeVector, mode: RenderMode = "concepts-only"
) -> str:
    """Puts one ``[Knowledge] <path>`` line per path after the dialogue and before the closing
    ``Summary:`` cue, which is (re)appended."""
    body = dialogue.rstrip()
    if body.endswith(SUMMARY_CUE):
        body = body[: -len(SUMMARY_CUE)]
    lines = [f"{KNOWLEDGE_MARKER} {rendered}" for rendered in knowledge.render(mode)]
    return "\n".join([body, *lines]) + SUMMARY_CUE


def _generate_field(backend: GenBackend, field: str, case: MergedCase) -> str:
    try:
        text = backend.generate(render_prompt(field, case), field=field, case=case)
    except BackendError as e:
        raise BackendError(f"visit {case.visit_id}, field {field}: {e}") from e
    except Exception as e:
        raise BackendError(f"visit {case.visit_id}, field {field}: {e!r}") from e
    return text.strip()


def _check(payload: dict, schema: str, visit_id: int) -> pydantic.BaseModel:
    violations = validate_record(json.dumps(payload, ensure_ascii=False), schema)
    if violations:
        raise RecordRejected(visit_id, violations)
    return schema_model(schema).model_validate(payload)


def gen_platypus(
    case: MergedCase,
    backend: GenBackend,
    knowledge: Optional[KnowledgeVector] = None,
    render_mode: RenderMode = "concepts-only",
) -> PlatypusRecord:
    """Builds one Open-Platypus record. The backend is asked for the content of ``input``,
    ``output`` and ``instruction``, one call each; the keys and ``data_source`` (the visit time)
    are filled in here.

    :param knowledge: Paths to inject into the dialogue as ``[Knowledge]`` lines
    :raises BackendError: if a backend call failed
    :raises RecordRejected: if the assembled record does not validate
    """
    dialogue = _generate_field(backend, "input", case)
    if knowledge is not None and knowledge.paths:
        dialogue = inject_knowledge(dialogue, knowledge, render_mode)
    elif not dialogue.endswith(SUMMARY_CUE):
        dialogue += SUMMARY_CUE
    payload = {
        "input": dialogue,
        "output": _generate_field(backend, "output", case),
        "instruction": _generate_field(backend, "instruction", case),
        "data_source": case.visit_time,
    }
    return _check(payload, "platypus", case.visit_id)


def to_esft_train(
    record: PlatypusRecord, id: int, expert_tags: Sequence[str] = ()
) -> EsftTrainRecord:
    """Converts to the ESFT training layout. ``expert_tags`` is left out when empty."""
    reply = record.output
    return EsftTrainRecord(
        id=id,
        dataset=record.data_source,
        messages=[
            Message(role="user", content=USER_PREFIX + record.input),
            Message(role="assistant", content=reply),
        ],
        length=char_count(reply),
        expert_tags=list(expert_tags) or None,
    )


def to_esft_val(record: PlatypusRecord, idx: int, raw_answer: str, answer: str) -> EsftValRecord:
    dialogue = record.input
    if dialogue.endswith(SUMMARY_CUE):
        dialogue = dialogue[: -len(SUMMARY_CUE)]
    return EsftValRecord(
        idx=idx,
        prompt=f"User: {USER_PREFIX}{dialogue}{PROMPT_SUFFIX}",
        raw_answers=[raw_answer],
        answers=[answer],
        length=char_count(answer),
    )


def knowledge_from_store(
    store: GraphStore,
    max_paths: int = DEFAULT_MAX_PATHS,
    max_depth: int = DEFAULT_MAX_DEPTH,
    aliases: Optional[AliasTable] = None,
) -> KnowledgeSource:
    """Knowledge source that matches seeds in a case's narrative fields."""

    def source(case: MergedCase) -> Optional[KnowledgeVector]:
        text = case.clinical_text
        if not text.strip():
            return None
        return build_knowledge_vector(
            store, text, max_paths=max_paths, max_depth=max_depth, aliases=aliases
        )

    return source


@dataclasses.dataclass
class GenerationResult:
    records: List[pydantic.BaseModel] = dataclasses.field(default_factory=list)
    failures: List[Tuple[int, str]] = dataclasses.field(default_factory=list)


def generate_dataset(
    cases: Sequence[MergedCase],
    backend: GenBackend,
    schema: Schema = "platypus",
    knowledge: Optional[KnowledgeSource] = None,
    expert_tags: Optional[ExpertTagMap] = None,
    render_mode: RenderMode = "concepts-only",
    workers: int = 1,
) -> GenerationResult:
    """Generates one record per case in the requested schema.

    Cases are generated concurrently with at most ``workers`` backend conversations in flight;
    records come back in case order. A case whose generation fails is recorded in ``failures``
    and the rest carry on.

    For ``esft_val`` the backend's summary is the raw answer and the case's diagnosis names are
    the standardized answer.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    expert_tags = expert_tags if expert_tags is not None else ExpertTagMap()

    def one(case: MergedCase) -> pydantic.BaseModel:
        vector = knowledge(case) if knowledge is not None else None
        record = gen_platypus(case, backend, vector, render_mode)
        try:
            if schema == "esft_train":
                tags = expert_tags.tags_for(case.clinic_type)
                return to_esft_train(record, case.visit_id, tags)
            if schema == "esft_val":
                return to_esft_val(record, case.visit_id, record.output, case.diagnosis_names)
        except pydantic.ValidationError as e:
            raise RecordRejected(case.visit_id, violations_from_error(e)) from e
        return record

    schema_model(schema)
    result = GenerationResult()
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(case.visit_id, pool.submit(one, case)) for case in cases]
        for visit_id, future in futures:
            try:
                result.records.append(future.result())
            except (BackendError, RecordRejected) as e:
                logger.warning("Skipping visit %s: %s", visit_id, e)
                result.failures.append((visit_id, str(e)))
    logger.info(
        "Generated %d %s records (%d failed)", len(result.records), schema, len(result.failures)
    )
    return result
