"""Composite concepts: a concept bundled with its descriptions and its outgoing relationships
grouped by relationship type. This is the unit the graph loader consumes."""
import collections
import dataclasses
import logging
import re
from typing import Iterable, NamedTuple, Optional, Sequence

from sctkg.core.rf2 import (
    AXIOM_RELATIONSHIP_ID_BASE,
    CORE_MODULE_ID,
    EXISTENTIAL_MODIFIER_ID,
    FSN_TYPE_ID,
    STATED_CHARACTERISTIC_ID,
    AxiomTriple,
    ConceptRow,
    DescriptionRow,
    RelationshipRow,
    is_valid_sctid,
)
from sctkg.core.snapshot import resolve_snapshot

logger = logging.getLogger(__name__)

NO_CATEGORY = "(none)"

# only the trailing parenthetical is the tag
_SEMANTIC_TAG = re.compile(r"^(?P<term>.*)\((?P<tag>[^()]+)\)\s*$", re.DOTALL)

# effectiveTime stamped on axiom-derived relationships whose axiom row carried none
DEFAULT_AXIOM_EFFECTIVE_TIME = 20020131


def semantic_tag(fsn: str) -> tuple[str, str]:
    """Splits a fully specified name into ``(term, category)``.

    .. code-block:: python

        semantic_tag("Diabetes mellitus (disorder)")  # ("Diabetes mellitus", "disorder")
        semantic_tag("Penicillin")  # ("Penicillin", "(none)")

    :param fsn: The fully specified name
    :return: The term without its tag, and the tag (or ``"(none)"``)
    """
    match = _SEMANTIC_TAG.match(fsn)
    if match is None:
        return fsn, NO_CATEGORY
    return match.group("term").strip(), match.group("tag").strip()


class RelationshipRef(NamedTuple):
    type_name: str
    destination_id: int
    relationship_group: int
    relationship_id: int


@dataclasses.dataclass
class CompositeConcept:
    concept_id: int
    fsn: str
    term: str
    category: str
    synonyms: list[str] = dataclasses.field(default_factory=list)
    relationships: dict[int, list[RelationshipRef]] = dataclasses.field(default_factory=dict)

    @property
    def relationship_count(self) -> int:
        return sum(len(refs) for refs in self.relationships.values())


@dataclasses.dataclass
class CompositeReport:
    """Inputs that could not be attached to any active concept."""

    orphan_descriptions: list[int] = dataclasses.field(default_factory=list)
    orphan_relationships: list[int] = dataclasses.field(default_factory=list)
    dropped: list[tuple[int, str]] = dataclasses.field(default_factory=list)


def _choose_fsn(descriptions: list[DescriptionRow], fsn_type_id: int) -> Optional[DescriptionRow]:
    candidates = [d for d in descriptions if d.type_id == fsn_type_id and d.term.strip()]
    if not candidates:
        return None
    return max(candidates, key=lambda d: (d.effective_time, d.id))


def build_composites(
    concepts: Sequence[ConceptRow],
    descriptions: Sequence[DescriptionRow],
    relationships: Sequence[RelationshipRow],
    fsn_type_id: int = FSN_TYPE_ID,
    report: Optional[CompositeReport] = None,
) -> list[CompositeConcept]:
    """Joins resolved snapshots into one composite per active concept.

    The FSN is the concept's FSN-typed description (latest wins, then the larger description id).
    Every other active description becomes a synonym. Relationship type names are the term of
    the type concept's FSN when that concept is known, else the type id as text. A concept with
    no FSN comes back with an empty ``fsn`` so that :py:func:`drop_incomplete` can report it.

    :param concepts: Resolved concept snapshot
    :param descriptions: Resolved description snapshot
    :param relationships: Resolved relationship snapshot
    :param fsn_type_id: Description type id that marks the FSN
    :param report: Optional report that collects descriptions/relationships with no concept
    :return: Composites in ascending concept id order
    """
    concept_ids = {c.id for c in concepts if c.active}
    descriptions_by_concept = collections.defaultdict(list)
    for description in descriptions:
        if not description.active:
            continue
        if description.concept_id not in concept_ids:
            if report is not None:
                report.orphan_descriptions.append(description.id)
            continue
        descriptions_by_concept[description.concept_id].append(description)

    fsn_by_concept: dict[int, DescriptionRow] = {}
    for concept_id, concept_descriptions in descriptions_by_concept.items():
        chosen = _choose_fsn(concept_descriptions, fsn_type_id)
        if chosen is not None:
            fsn_by_concept[concept_id] = chosen

    def type_name(type_id: int) -> str:
        fsn = fsn_by_concept.get(type_id)
        if fsn is None:
            return str(type_id)
        return semantic_tag(fsn.term)[0]

    relationships_by_source = collections.defaultdict(list)
    for relationship in relationships:
        if not relationship.active:
            continue
        if relationship.source_id not in concept_ids:
            if report is not None:
                report.orphan_relationships.append(relationship.id)
            continue
        relationships_by_source[relationship.source_id].append(relationship)

    composites = []
    for concept_id in sorted(concept_ids):
        fsn_row = fsn_by_concept.get(concept_id)
        fsn = fsn_row.term if fsn_row is not None else ""
        term, category = semantic_tag(fsn) if fsn else ("", NO_CATEGORY)
        synonyms = []
        for description in sorted(descriptions_by_concept.get(concept_id, []), key=lambda d: d.id):
            if fsn_row is not None and description.id == fsn_row.id:
                continue
            if description.term not in synonyms:
                synonyms.append(description.term)
        grouped = collections.defaultdict(list)
        for relationship in sorted(
            relationships_by_source.get(concept_id, []),
            key=lambda r: (r.type_id, r.relationship_group, r.destination_id, r.id),
        ):
            grouped[relationship.type_id].append(
                RelationshipRef(
                    type_name=type_name(relationship.type_id),
                    destination_id=relationship.destination_id,
                    relationship_group=relationship.relationship_group,
                    relationship_id=relationship.id,
                )
            )
        composites.append(
            CompositeConcept(
                concept_id=concept_id,
                fsn=fsn,
                term=term,
                category=category,
                synonyms=synonyms,
                relationships={type_id: grouped[type_id] for type_id in sorted(grouped)},
            )
        )
    return composites


def drop_incomplete(
    composites: Iterable[CompositeConcept],
) -> tuple[list[CompositeConcept], list[tuple[int, str]]]:
    """Removes composites with empty FSNs or unusable ids.

    :return: ``(kept, dropped)`` where ``dropped`` is a list of ``(concept_id, reason)``
    """
    kept, dropped = [], []
    for composite in composites:
        if not is_valid_sctid(composite.concept_id):
            dropped.append((composite.concept_id, "unresolved concept id"))
        elif not composite.fsn or not composite.fsn.strip():
            dropped.append((composite.concept_id, "empty FSN"))
        elif not composite.category:
            dropped.append((composite.concept_id, "empty category"))
        else:
            kept.append(composite)
    if dropped:
        logger.info("Dropped %d incomplete composites", len(dropped))
    return kept, dropped


def reintegrate_axioms(
    axiom_triples: Iterable[AxiomTriple],
    relationships: Sequence[RelationshipRow],
    id_base: int = AXIOM_RELATIONSHIP_ID_BASE,
    self_loops: Optional[list[AxiomTriple]] = None,
) -> list[RelationshipRow]:
    """Merges axiom-derived triples into a relationship snapshot.

    A triple whose ``(source, type, destination)`` already exists is dropped in favour of the RF2
    row, and a triple whose source is its own destination is skipped. New triples get synthetic
    ids starting at ``id_base``, allocated in sorted triple order so that the result does not
    depend on input order.

    :param axiom_triples: Triples produced by the OWL axiom parser
    :param relationships: Resolved relationship snapshot
    :param id_base: First synthetic relationship id
    :param self_loops: Optional list the skipped self-referencing triples are appended to
    :return: The merged snapshot, ascending by id
    """
    existing = {r.triple for r in relationships}
    if any(r.id >= id_base for r in relationships):
        raise ValueError(
            f"Relationship snapshot already uses ids at or above the axiom range ({id_base})."
        )
    new_triples: dict[tuple[int, int, int], AxiomTriple] = {}
    skipped = 0
    for triple in sorted(
        axiom_triples,
        key=lambda t: (t.source_id, t.type_id, t.destination_id, t.relationship_group),
    ):
        if triple.source_id == triple.destination_id:
            skipped += 1
            if self_loops is not None:
                self_loops.append(triple)
            continue
        if triple.triple in existing or triple.triple in new_triples:
            continue
        new_triples[triple.triple] = triple

    merged = list(relationships)
    for offset, key in enumerate(sorted(new_triples)):
        triple = new_triples[key]
        merged.append(
            RelationshipRow(
                id=id_base + offset,
                effective_time=triple.effective_time or DEFAULT_AXIOM_EFFECTIVE_TIME,
                active=True,
                module_id=triple.module_id or CORE_MODULE_ID,
                source_id=triple.source_id,
                destination_id=triple.destination_id,
                relationship_group=triple.relationship_group,
                type_id=triple.type_id,
                characteristic_type_id=STATED_CHARACTERISTIC_ID,
                modifier_id=EXISTENTIAL_MODIFIER_ID,
            )
        )
    if skipped:
        logger.warning("Skipped %d self-referencing axiom triples", skipped)
    logger.debug("Reintegrated %d axiom triples", len(new_triples))
    return sorted(merged, key=lambda r: r.id)


@dataclasses.dataclass
class CategoryCount:
    raw_rows: int = 0
    distinct_ids: int = 0
    active: int = 0


def category_counts(
    concept_rows: Sequence[ConceptRow],
    description_rows: Sequence[DescriptionRow],
    fsn_type_id: int = FSN_TYPE_ID,
) -> dict[str, CategoryCount]:
    """Per semantic tag: raw concept rows, distinct concept ids, and concepts active after
    snapshot resolution. Concepts without a resolvable FSN count under ``"(none)"``."""
    descriptions_by_concept = collections.defaultdict(list)
    for description in resolve_snapshot(description_rows):
        descriptions_by_concept[description.concept_id].append(description)
    category_by_concept = {}
    for concept_id, concept_descriptions in descriptions_by_concept.items():
        chosen = _choose_fsn(concept_descriptions, fsn_type_id)
        if chosen is not None:
            category_by_concept[concept_id] = semantic_tag(chosen.term)[1]

    counts: dict[str, CategoryCount] = collections.defaultdict(CategoryCount)
    seen = collections.defaultdict(set)
    for row in concept_rows:
        category = category_by_concept.get(row.id, NO_CATEGORY)
        counts[category].raw_rows += 1
        seen[category].add(row.id)
    for category, ids in seen.items():
        counts[category].distinct_ids = len(ids)
    for row in resolve_snapshot(concept_rows):
        counts[category_by_concept.get(row.id, NO_CATEGORY)].active += 1
    return dict(sorted(counts.items()))
