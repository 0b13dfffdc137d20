"""Row types for the four RF2 component files we consume, plus the identifier rules they share.

Rows are immutable and versioned: the same ``id`` may occur many times with different
``effective_time``/``active`` values, and :py:func:`sctkg.core.snapshot.resolve_snapshot` picks
the current one.
"""
import dataclasses
import datetime
from typing import ClassVar, Optional, Union

SCTID_MIN_DIGITS = 6
SCTID_MAX_DIGITS = 18

# Public RF2 constants. The FSN type id is configurable wherever it is used.
FSN_TYPE_ID = 900000000000003001
SYNONYM_TYPE_ID = 900000000000013009
IS_A_TYPE_ID = 116680003
ROLE_GROUP_ID = 609096000
STATED_CHARACTERISTIC_ID = 900000000000010007
EXISTENTIAL_MODIFIER_ID = 900000000000451002
OWL_AXIOM_REFSET_ID = 733073007
CORE_MODULE_ID = 900000000000207008

# Relationship ids for triples recovered from axioms are allocated at or above this value.
AXIOM_RELATIONSHIP_ID_BASE = 10**17


def is_valid_sctid(value: object) -> bool:
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        return False
    return SCTID_MIN_DIGITS <= len(str(value)) <= SCTID_MAX_DIGITS


def validate_sctid(value: int, field: str = "id") -> int:
    """Returns the value if it is a usable identifier, else raises ``ValueError``.
    Check digits are not verified."""
    if not is_valid_sctid(value):
        raise ValueError(
            f"{field}={value!r} is not a valid SCTID: expected a positive integer with "
            f"{SCTID_MIN_DIGITS}-{SCTID_MAX_DIGITS} digits."
        )
    return value


def is_valid_effective_time(value: object) -> bool:
    """effectiveTime is kept as a yyyymmdd integer; it must name a real calendar date."""
    if not isinstance(value, int) or isinstance(value, bool):
        return False
    text = str(value)
    if len(text) != 8:
        return False
    try:
        datetime.datetime.strptime(text, "%Y%m%d")
    except ValueError:
        return False
    return True


@dataclasses.dataclass(frozen=True)
class ConceptRow:
    KIND: ClassVar[str] = "concept"
    COLUMNS: ClassVar[tuple[str, ...]] = (
        "id",
        "effectiveTime",
        "active",
        "moduleId",
        "definitionStatusId",
    )

    id: int
    effective_time: int
    active: bool
    module_id: int
    definition_status_id: int

    def to_fields(self) -> tuple[str, ...]:
        return (
            str(self.id),
            str(self.effective_time),
            _flag(self.active),
            str(self.module_id),
            str(self.definition_status_id),
        )


@dataclasses.dataclass(frozen=True)
class DescriptionRow:
    KIND: ClassVar[str] = "description"
    COLUMNS: ClassVar[tuple[str, ...]] = (
        "id",
        "effectiveTime",
        "active",
        "moduleId",
        "conceptId",
        "languageCode",
        "typeId",
        "term",
        "caseSignificanceId",
    )

    id: int
    effective_time: int
    active: bool
    module_id: int
    concept_id: int
    language_code: str
    type_id: int
    term: str
    case_significance_id: int

    def to_fields(self) -> tuple[str, ...]:
        return (
            str(self.id),
            str(self.effective_time),
            _flag(self.active),
            str(self.module_id),
            str(self.concept_id),
            self.language_code,
            str(self.type_id),
            self.term,
            str(self.case_significance_id),
        )


@dataclasses.dataclass(frozen=True)
class RelationshipRow:
    KIND: ClassVar[str] = "relationship"
    COLUMNS: ClassVar[tuple[str, ...]] = (
        "id",
        "effectiveTime",
        "active",
        "moduleId",
        "sourceId",
        "destinationId",
        "relationshipGroup",
        "typeId",
        "characteristicTypeId",
        "modifierId",
    )

    id: int
    effective_time: int
    active: bool
    module_id: int
    source_id: int
    destination_id: int
    relationship_group: int
    type_id: int
    characteristic_type_id: int
    modifier_id: int

    @property
    def triple(self) -> tuple[int, int, int]:
        return self.source_id, self.type_id, self.destination_id

    def to_fields(self) -> tuple[str, ...]:
        return (
            str(self.id),
            str(self.effective_time),
            _flag(self.active),
            str(self.module_id),
            str(self.source_id),
            str(self.destination_id),
            str(self.relationship_group),
            str(self.type_id),
            str(self.characteristic_type_id),
            str(self.modifier_id),
        )


@dataclasses.dataclass(frozen=True)
class AxiomRow:
    KIND: ClassVar[str] = "axiom"
    COLUMNS: ClassVar[tuple[str, ...]] = (
        "id",
        "effectiveTime",
        "active",
        "moduleId",
        "refsetId",
        "referencedComponentId",
        "owlExpression",
    )

    # OWL refset members are keyed by UUID in real releases, so the id stays a string
    id: str
    effective_time: int
    active: bool
    module_id: int
    refset_id: int
    referenced_component_id: int
    owl_expression: str

    def to_fields(self) -> tuple[str, ...]:
        return (
            self.id,
            str(self.effective_time),
            _flag(self.active),
            str(self.module_id),
            str(self.refset_id),
            str(self.referenced_component_id),
            self.owl_expression,
        )


@dataclasses.dataclass(frozen=True)
class AxiomTriple:
    """A relationship recovered from an OWL axiom. The provenance fields are filled in by the
    parser when the triple comes from an axiom row."""

    source_id: int
    type_id: int
    destination_id: int
    relationship_group: int = 0
    effective_time: Optional[int] = None
    module_id: Optional[int] = None

    @property
    def triple(self) -> tuple[int, int, int]:
        return self.source_id, self.type_id, self.destination_id


Row = Union[ConceptRow, DescriptionRow, RelationshipRow, AxiomRow]

ROW_TYPES: dict[str, type] = {
    row_type.KIND: row_type for row_type in (ConceptRow, DescriptionRow, RelationshipRow, AxiomRow)
}


def serialize_row(row: Row) -> str:
    """Renders a row as one RF2 line (without the terminator), in column order."""
    return "\t".join(row.to_fields())


def _flag(value: bool) -> str:
    return "1" if value else "0"
