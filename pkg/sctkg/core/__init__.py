from sctkg.core.composite import (
    CompositeConcept,
    RelationshipRef,
    build_composites,
    category_counts,
    drop_incomplete,
    reintegrate_axioms,
    semantic_tag,
)
from sctkg.core.rf2 import (
    AxiomRow,
    AxiomTriple,
    ConceptRow,
    DescriptionRow,
    RelationshipRow,
    serialize_row,
)
from sctkg.core.snapshot import resolve_snapshot

__all__ = [
    "AxiomRow",
    "AxiomTriple",
    "build_composites",
    "category_counts",
    "CompositeConcept",
    "ConceptRow",
    "DescriptionRow",
    "drop_incomplete",
    "reintegrate_axioms",
    "RelationshipRef",
    "RelationshipRow",
    "resolve_snapshot",
    "semantic_tag",
    "serialize_row",
]
