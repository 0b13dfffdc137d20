"""Client for Snowstorm-style terminology servers: fetches a concept with its descriptions and
outgoing relationships and maps them onto the RF2 row types.

Routes are configurable; the defaults are::

    {base_url}/{branch}/concepts/{id}
    {base_url}/{branch}/concepts/{id}/descriptions?offset=..&limit=..
    {base_url}/{branch}/concepts/{id}/relationships?offset=..&limit=..

List endpoints may answer with a bare JSON list or a page ``{"items": [...], "total": n}``.
Payload objects may use RF2 column names (``id``, ``relationshipGroup`` ...) or the server's
own (``conceptId``, ``groupId``, ``lang`` ...); unknown fields are ignored.
"""
import concurrent.futures
import dataclasses
import json
import logging
import os
import pathlib
import threading
from typing import Iterable, List, Optional, Tuple, Union

import pydantic
from tenacity import (
    RetryError,
    Retrying,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from sctkg.common.types import UnknownConceptError
from sctkg.core.rf2 import (
    EXISTENTIAL_MODIFIER_ID,
    ConceptRow,
    DescriptionRow,
    RelationshipRow,
    is_valid_sctid,
)
from sctkg.integrations.base import require_plugin
from sctkg.parsing.rf2_files import ReleaseRows

try:
    import requests
except ImportError as e:
    require_plugin(e, ["requests"], "snowstorm")

logger = logging.getLogger(__name__)

DEFINITION_STATUS_IDS = {"PRIMITIVE": 900000000000074008, "FULLY_DEFINED": 900000000000073002}
CASE_SIGNIFICANCE_IDS = {
    "CASE_INSENSITIVE": 900000000000448009,
    "ENTIRE_TERM_CASE_SENSITIVE": 900000000000017005,
    "INITIAL_CHARACTER_CASE_INSENSITIVE": 900000000000020002,
}
CHARACTERISTIC_TYPE_IDS = {
    "STATED_RELATIONSHIP": 900000000000010007,
    "INFERRED_RELATIONSHIP": 900000000000011006,
    "ADDITIONAL_RELATIONSHIP": 900000000000227009,
}
MODIFIER_IDS = {"EXISTENTIAL": EXISTENTIAL_MODIFIER_ID, "UNIVERSAL": 900000000000450001}


class SnowstormError(RuntimeError):
    """A request failed for good, or the server answered with something that is not a bundle."""


class PayloadError(SnowstormError):
    pass


class _Retryable(Exception):
    pass


class ServerConfig(pydantic.BaseModel):
    base_url: str = "http://localhost:8080"
    branch: str = "MAIN"
    page_size: int = pydantic.Field(default=100, ge=1)
    max_retries: int = pydantic.Field(default=3, ge=0, le=10)
    backoff_base: float = pydantic.Field(default=0.5, ge=0)
    backoff_max: float = pydantic.Field(default=30.0, gt=0)
    timeout: float = pydantic.Field(default=30.0, gt=0)
    concept_route: str = "{base}/{branch}/concepts/{id}"
    descriptions_route: str = "{base}/{branch}/concepts/{id}/descriptions"
    relationships_route: str = "{base}/{branch}/concepts/{id}/relationships"

    def url(self, route: str, concept_id: int) -> str:
        return route.format(base=self.base_url.rstrip("/"), branch=self.branch, id=concept_id)


def _enum_or_id(value, mapping: dict):
    # servers may send enum names where RF2 has concept ids
    if isinstance(value, str) and value in mapping:
        return mapping[value]
    return value


class _Payload(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="ignore", populate_by_name=True)

    effective_time: int = pydantic.Field(validation_alias="effectiveTime")
    active: bool
    module_id: int = pydantic.Field(validation_alias="moduleId")


class ConceptPayload(_Payload):
    id: int = pydantic.Field(validation_alias=pydantic.AliasChoices("conceptId", "id"))
    definition_status_id: int = pydantic.Field(
        validation_alias=pydantic.AliasChoices("definitionStatusId", "definitionStatus")
    )

    @pydantic.field_validator("definition_status_id", mode="before")
    @classmethod
    def parse_status(cls, value):
        return _enum_or_id(value, DEFINITION_STATUS_IDS)

    def to_row(self) -> ConceptRow:
        return ConceptRow(
            self.id, self.effective_time, self.active, self.module_id, self.definition_status_id
        )


class DescriptionPayload(_Payload):
    id: int = pydantic.Field(validation_alias=pydantic.AliasChoices("descriptionId", "id"))
    concept_id: int = pydantic.Field(validation_alias="conceptId")
    language_code: str = pydantic.Field(
        validation_alias=pydantic.AliasChoices("languageCode", "lang")
    )
    type_id: int = pydantic.Field(validation_alias="typeId")
    term: str
    case_significance_id: int = pydantic.Field(
        validation_alias=pydantic.AliasChoices("caseSignificanceId", "caseSignificance")
    )

    @pydantic.field_validator("case_significance_id", mode="before")
    @classmethod
    def parse_case_significance(cls, value):
        return _enum_or_id(value, CASE_SIGNIFICANCE_IDS)

    def to_row(self) -> DescriptionRow:
        return DescriptionRow(
            self.id,
            self.effective_time,
            self.active,
            self.module_id,
            self.concept_id,
            self.language_code,
            self.type_id,
            self.term,
            self.case_significance_id,
        )


class RelationshipPayload(_Payload):
    id: int = pydantic.Field(validation_alias=pydantic.AliasChoices("relationshipId", "id"))
    source_id: int = pydantic.Field(validation_alias="sourceId")
    destination_id: int = pydantic.Field(validation_alias="destinationId")
    relationship_group: int = pydantic.Field(
        validation_alias=pydantic.AliasChoices("relationshipGroup", "groupId")
    )
    type_id: int = pydantic.Field(validation_alias="typeId")
    characteristic_type_id: int = pydantic.Field(
        validation_alias=pydantic.AliasChoices("characteristicTypeId", "characteristicType")
    )
    modifier_id: int = pydantic.Field(
        default=EXISTENTIAL_MODIFIER_ID,
        validation_alias=pydantic.AliasChoices("modifierId", "modifier"),
    )

    @pydantic.field_validator("characteristic_type_id", mode="before")
    @classmethod
    def parse_characteristic_type(cls, value):
        return _enum_or_id(value, CHARACTERISTIC_TYPE_IDS)

    @pydantic.field_validator("modifier_id", mode="before")
    @classmethod
    def parse_modifier(cls, value):
        return _enum_or_id(value, MODIFIER_IDS)

    def to_row(self) -> RelationshipRow:
        return RelationshipRow(
            self.id,
            self.effective_time,
            self.active,
            self.module_id,
            self.source_id,
            self.destination_id,
            self.relationship_group,
            self.type_id,
            self.characteristic_type_id,
            self.modifier_id,
        )


ConceptBundle = Tuple[ConceptRow, List[DescriptionRow], List[RelationshipRow]]


@dataclasses.dataclass
class FetchReport:
    """``fetched + len(failed) == requested``."""

    requested: int = 0
    fetched: int = 0
    failed: List[Tuple[int, str]] = dataclasses.field(default_factory=list)
    skipped_from_checkpoint: int = 0

    def to_dict(self) -> dict:
        return {
            "requested": self.requested,
            "fetched": self.fetched,
            "failed": [{"concept_id": cid, "error": error} for cid, error in self.failed],
            "skipped_from_checkpoint": self.skipped_from_checkpoint,
        }


class SnowstormClient:
    """Shareable across threads; each thread gets its own HTTP session.

    ``retry_log`` records every retried request as ``(url, attempt, error, delay)``.
    """

    def __init__(self, config: Optional[ServerConfig] = None):
        self.config = config if config is not None else ServerConfig()
        self._local = threading.local()
        self._lock = threading.Lock()
        self.retry_log: List[Tuple[str, int, str, float]] = []

    @property
    def session(self) -> "requests.Session":
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def _get_once(self, url: str, params: Optional[dict], concept_id: int):
        try:
            response = self.session.get(url, params=params, timeout=self.config.timeout)
        except (
            requests.ConnectionError,
            requests.Timeout,
            requests.exceptions.ChunkedEncodingError,
        ) as e:
            raise _Retryable(f"{type(e).__name__}: {e}") from e
        except requests.RequestException as e:
            raise SnowstormError(f"GET {url}: {type(e).__name__}: {e}") from e
        if response.status_code == 404:
            raise UnknownConceptError(concept_id, where=self.config.base_url)
        if response.status_code == 429 or response.status_code >= 500:
            raise _Retryable(f"HTTP {response.status_code}")
        if response.status_code != 200:
            raise SnowstormError(f"GET {url}: HTTP {response.status_code}")
        try:
            return response.json()
        except ValueError as e:
            raise PayloadError(f"GET {url}: response is not JSON") from e

    def _log_retry(self, url: str):
        def before_sleep(state):
            delay = state.next_action.sleep if state.next_action is not None else 0.0
            error = state.outcome.exception()
            with self._lock:
                self.retry_log.append((url, state.attempt_number, str(error), delay))
            logger.warning(
                "GET %s failed (attempt %d): %s; retrying in %.2fs",
                url,
                state.attempt_number,
                error,
                delay,
            )

        return before_sleep

    def get_json(self, url: str, concept_id: int, params: Optional[dict] = None):
        """GETs a JSON document. 404 is terminal, 429/5xx and connection errors are retried up to
        ``max_retries`` times with exponential backoff."""
        retrying = Retrying(
            stop=stop_after_attempt(self.config.max_retries + 1),
            wait=wait_exponential(
                multiplier=self.config.backoff_base, max=self.config.backoff_max
            ),
            retry=retry_if_exception_type(_Retryable),
            before_sleep=self._log_retry(url),
        )
        try:
            return retrying(self._get_once, url, params, concept_id)
        except RetryError as e:
            raise SnowstormError(
                f"GET {url} failed after {self.config.max_retries + 1} attempts: "
                f"{e.last_attempt.exception()}"
            ) from e

    def _pages(self, route: str, concept_id: int) -> List[dict]:
        url = self.config.url(route, concept_id)
        items: List[dict] = []
        offset = 0
        while True:
            params = {"offset": offset, "limit": self.config.page_size}
            page = self.get_json(url, concept_id, params)
            if isinstance(page, list):
                return items + page
            if not isinstance(page, dict) or not isinstance(page.get("items"), list):
                raise PayloadError(f"GET {url}: expected a list or a page with 'items'")
            batch = page["items"]
            items.extend(batch)
            offset += len(batch)
            total = page.get("total")
            if not batch or (total is not None and offset >= total) or (
                total is None and len(batch) < self.config.page_size
            ):
                return items

    def fetch_concept_bundle(self, concept_id: int) -> ConceptBundle:
        """:raises UnknownConceptError: on 404
        :raises SnowstormError: when retries run out or the payload cannot be mapped
        """
        if not is_valid_sctid(concept_id):
            raise ValueError(f"{concept_id} is not a valid SCTID")
        url = self.config.url(self.config.concept_route, concept_id)
        document = self.get_json(url, concept_id)
        try:
            concept = ConceptPayload.model_validate(document).to_row()
            descriptions = [
                DescriptionPayload.model_validate(item).to_row()
                for item in self._pages(self.config.descriptions_route, concept_id)
            ]
            relationships = [
                RelationshipPayload.model_validate(item).to_row()
                for item in self._pages(self.config.relationships_route, concept_id)
            ]
        except pydantic.ValidationError as e:
            raise PayloadError(f"concept {concept_id}: cannot decode payload: {e}") from e
        return concept, descriptions, relationships


def fetch_concept_bundle(config: ServerConfig, concept_id: int) -> ConceptBundle:
    return SnowstormClient(config).fetch_concept_bundle(concept_id)


def _read_checkpoint(path: pathlib.Path) -> set:
    if not path.exists():
        return set()
    with open(path, encoding="utf-8") as f:
        return {int(line) for line in f if line.strip()}


def fetch_all(
    config: ServerConfig,
    ids: Iterable[int],
    concurrency: int = 1,
    checkpoint: Optional[Union[str, os.PathLike]] = None,
    client: Optional[SnowstormClient] = None,
) -> Tuple[ReleaseRows, FetchReport]:
    """Fetches many concepts with at most ``concurrency`` requests in flight.

    Failures are isolated per id and land in the report. Rows come back sorted by id with no
    duplicates, so the result does not depend on ``concurrency``.

    :param checkpoint: File listing completed ids, one per line. Ids already in it are skipped and
        every newly fetched id is appended, so an interrupted run can resume. A resumed run only
        returns the rows fetched in that run.
    """
    if concurrency < 1:
        raise ValueError(f"concurrency must be >= 1, got {concurrency}")
    client = client if client is not None else SnowstormClient(config)
    wanted = list(dict.fromkeys(ids))
    report = FetchReport(requested=len(wanted))
    checkpoint_path = pathlib.Path(checkpoint) if checkpoint is not None else None
    done = _read_checkpoint(checkpoint_path) if checkpoint_path is not None else set()
    todo = [cid for cid in wanted if cid not in done]
    report.skipped_from_checkpoint = len(wanted) - len(todo)
    report.fetched += report.skipped_from_checkpoint

    concepts, descriptions, relationships = {}, {}, {}
    lock = threading.Lock()
    checkpoint_file = open(checkpoint_path, "a", encoding="utf-8") if checkpoint_path else None
    try:
        with concurrent.futures.ThreadPoolExecutor(max_workers=concurrency) as pool:
            futures = {pool.submit(client.fetch_concept_bundle, cid): cid for cid in todo}
            for future in concurrent.futures.as_completed(futures):
                cid = futures[future]
                try:
                    concept, concept_descriptions, concept_relationships = future.result()
                except (SnowstormError, UnknownConceptError, ValueError) as e:
                    with lock:
                        report.failed.append((cid, str(e)))
                    continue
                with lock:
                    concepts[concept.id] = concept
                    descriptions.update((d.id, d) for d in concept_descriptions)
                    relationships.update((r.id, r) for r in concept_relationships)
                    report.fetched += 1
                    if checkpoint_file is not None:
                        checkpoint_file.write(f"{cid}\n")
                        checkpoint_file.flush()
    finally:
        if checkpoint_file is not None:
            checkpoint_file.close()
    report.failed.sort()
    rows = ReleaseRows(
        concepts=[concepts[k] for k in sorted(concepts)],
        descriptions=[descriptions[k] for k in sorted(descriptions)],
        relationships=[relationships[k] for k in sorted(relationships)],
    )
    logger.info(
        "Fetched %d of %d concepts (%d failed)",
        report.fetched,
        report.requested,
        len(report.failed),
    )
    return rows, report


def bundle_document(
    concept: ConceptRow,
    descriptions: Iterable[DescriptionRow],
    relationships: Iterable[RelationshipRow],
) -> dict:
    """The stub-server fixture document for one concept, using RF2 column names."""

    def as_dict(row) -> dict:
        return {
            column: getattr(row, field.name)
            for column, field in zip(row.COLUMNS, dataclasses.fields(row))
        }

    return {
        "concept": as_dict(concept),
        "descriptions": [as_dict(d) for d in descriptions],
        "relationships": [as_dict(r) for r in relationships],
    }


def write_fixture(rows: ReleaseRows, directory: Union[str, os.PathLike]) -> List[pathlib.Path]:
    """Writes one ``<conceptId>.json`` bundle per concept, which is what the stub server serves.
    Relationships are filed under their source concept."""
    out = pathlib.Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    by_concept_d, by_concept_r = {}, {}
    for d in rows.descriptions:
        by_concept_d.setdefault(d.concept_id, []).append(d)
    for r in rows.relationships:
        by_concept_r.setdefault(r.source_id, []).append(r)
    paths = []
    for concept in rows.concepts:
        path = out / f"{concept.id}.json"
        document = bundle_document(
            concept, by_concept_d.get(concept.id, []), by_concept_r.get(concept.id, [])
        )
        path.write_text(json.dumps(document, ensure_ascii=False, indent=1), encoding="utf-8")
        paths.append(path)
    return paths
