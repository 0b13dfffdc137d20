"""A deliberately small reader for the OWL functional syntax found in the RF2 OWL axiom refset.

Only the constructs that carry definitional relationships are understood:

- ``SubClassOf(A B)`` and ``EquivalentClasses(A B)`` (read left to right)
- ``ObjectIntersectionOf(...)``
- ``ObjectSomeValuesFrom(r C)``, where ``r`` equal to the role-group property opens a new
  relationship group

Anything else is reported as an unsupported construct and yields no triples.
"""
import dataclasses
import logging
import re
from typing import Iterable, NamedTuple, Optional, Union

from sctkg.core.rf2 import IS_A_TYPE_ID, ROLE_GROUP_ID, AxiomRow, AxiomTriple, is_valid_sctid

logger = logging.getLogger(__name__)

SUPPORTED_AXIOMS = ("SubClassOf", "EquivalentClasses")

_TOKEN = re.compile(r"\s*(?:(?P<open>\()|(?P<close>\))|(?P<iri><[^>]*>)|(?P<word>[^\s()<>]+))")
_SNOMED_IRI = re.compile(r"^<http://snomed\.info/id/(?P<id>\d+)>$")


class OWLParseError(ValueError):
    """Raised for expressions outside the supported subset. ``offset`` is the character position
    in the expression where the problem was found."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


@dataclasses.dataclass
class _Call:
    name: str
    args: list["_Node"]
    offset: int


@dataclasses.dataclass
class _Atom:
    text: str
    offset: int


_Node = Union[_Call, _Atom]


def _tokenize(expression: str) -> list[tuple[str, str, int]]:
    tokens = []
    position = 0
    expression = expression.rstrip()
    while position < len(expression):
        match = _TOKEN.match(expression, position)
        if match is None or match.end() == position:
            raise OWLParseError("tokenizer failure", position)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind)))
        position = match.end()
    return tokens


def _parse_tree(expression: str) -> _Node:
    tokens = _tokenize(expression)
    if not tokens:
        raise OWLParseError("empty expression", 0)
    index = 0

    def parse_node() -> _Node:
        nonlocal index
        if index >= len(tokens):
            raise OWLParseError("unexpected end of expression", len(expression))
        kind, text, offset = tokens[index]
        if kind in ("open", "close"):
            raise OWLParseError(f"unexpected {text!r}", offset)
        index += 1
        if index < len(tokens) and tokens[index][0] == "open" and kind == "word":
            index += 1
            args = []
            while True:
                if index >= len(tokens):
                    raise OWLParseError(f"unclosed {text}(", offset)
                if tokens[index][0] == "close":
                    index += 1
                    return _Call(text, args, offset)
                args.append(parse_node())
        return _Atom(text, offset)

    node = parse_node()
    if index != len(tokens):
        raise OWLParseError("trailing tokens after axiom", tokens[index][2])
    return node


def _concept_id(node: _Node) -> int:
    """Resolves ``:123``, ``<http://snomed.info/id/123>`` or ``123`` to an id."""
    if not isinstance(node, _Atom):
        raise OWLParseError(f"expected a concept reference, found {node.name}(...)", node.offset)
    text = node.text
    iri = _SNOMED_IRI.match(text)
    if iri is not None:
        digits = iri.group("id")
    elif text.startswith(":") and text[1:].isdigit():
        digits = text[1:]
    elif text.isdigit():
        digits = text
    else:
        raise OWLParseError(f"unrecognised concept reference {text!r}", node.offset)
    value = int(digits)
    if not is_valid_sctid(value):
        raise OWLParseError(f"id {digits} outside the SCTID range", node.offset)
    return value


class OWLAxiomResult(NamedTuple):
    triples: list[AxiomTriple]
    error: Optional[OWLParseError]


class _TripleCollector:
    def __init__(self, source_id: int, role_group_id: int):
        self.source_id = source_id
        self.role_group_id = role_group_id
        self.triples: list[AxiomTriple] = []
        self.group_count = 0

    def add(self, type_id: int, destination_id: int, group: int):
        self.triples.append(AxiomTriple(self.source_id, type_id, destination_id, group))

    def visit_class_expression(self, node: _Node):
        if isinstance(node, _Atom):
            self.add(IS_A_TYPE_ID, _concept_id(node), 0)
        elif node.name == "ObjectIntersectionOf":
            for arg in node.args:
                self.visit_class_expression(arg)
        elif node.name == "ObjectSomeValuesFrom":
            self.visit_existential(node, group=0)
        else:
            raise OWLParseError(f"unsupported construct {node.name}", node.offset)

    def visit_existential(self, node: _Call, group: int):
        if len(node.args) != 2:
            raise OWLParseError("ObjectSomeValuesFrom takes two arguments", node.offset)
        attribute, filler = node.args
        type_id = _concept_id(attribute)
        if type_id == self.role_group_id:
            if group != 0:
                raise OWLParseError("nested role group", node.offset)
            self.group_count += 1
            self.visit_group(filler, self.group_count)
            return
        self.add(type_id, _concept_id(filler), group)

    def visit_group(self, node: _Node, group: int):
        if isinstance(node, _Call) and node.name == "ObjectSomeValuesFrom":
            self.visit_existential(node, group)
        elif isinstance(node, _Call) and node.name == "ObjectIntersectionOf":
            for arg in node.args:
                if not (isinstance(arg, _Call) and arg.name == "ObjectSomeValuesFrom"):
                    raise OWLParseError("role groups may only contain existentials", arg.offset)
                self.visit_existential(arg, group)
        else:
            offset = node.offset
            raise OWLParseError("role group filler must be an existential restriction", offset)


def parse_owl_axiom(
    expression: str,
    referenced_component_id: int,
    role_group_id: int = ROLE_GROUP_ID,
) -> OWLAxiomResult:
    """Turns one OWL axiom into relationship triples sourced at ``referenced_component_id``.

    .. code-block:: python

        parse_owl_axiom("SubClassOf(:123456 ObjectIntersectionOf(:789012 "
                        "ObjectSomeValuesFrom(:363698007 :456789)))", 123456).triples
        # [AxiomTriple(123456, 116680003, 789012, 0), AxiomTriple(123456, 363698007, 456789, 0)]

    :param expression: OWL functional syntax
    :param referenced_component_id: Concept the axiom belongs to; must be the axiom's subject
    :param role_group_id: Attribute id that marks a role group
    :return: The triples, or an empty list plus the error when the expression is not understood
    """
    try:
        tree = _parse_tree(expression)
        if not isinstance(tree, _Call):
            raise OWLParseError("expected an axiom", tree.offset)
        if tree.name not in SUPPORTED_AXIOMS:
            raise OWLParseError(f"unsupported construct {tree.name}", tree.offset)
        if len(tree.args) != 2:
            raise OWLParseError(f"{tree.name} takes two class expressions", tree.offset)
        subject, definition = tree.args
        subject_id = _concept_id(subject)
        if subject_id != referenced_component_id:
            raise OWLParseError(
                f"axiom subject {subject_id} does not match referenced component "
                f"{referenced_component_id}",
                subject.offset,
            )
        collector = _TripleCollector(subject_id, role_group_id)
        collector.visit_class_expression(definition)
        return OWLAxiomResult(collector.triples, None)
    except OWLParseError as e:
        logger.debug("Could not parse axiom for %s: %s", referenced_component_id, e)
        return OWLAxiomResult([], e)


def axiom_triples(
    axioms: Iterable[AxiomRow], role_group_id: int = ROLE_GROUP_ID
) -> tuple[list[AxiomTriple], list[tuple[str, OWLParseError]]]:
    """Parses all active axiom rows, stamping each triple with its row's provenance.

    :return: ``(triples, errors)`` where errors are ``(axiom id, error)`` pairs
    """
    triples, errors = [], []
    for row in axioms:
        if not row.active:
            continue
        result = parse_owl_axiom(row.owl_expression, row.referenced_component_id, role_group_id)
        if result.error is not None:
            errors.append((row.id, result.error))
            continue
        triples.extend(
            dataclasses.replace(t, effective_time=row.effective_time, module_id=row.module_id)
            for t in result.triples
        )
    if errors:
        logger.warning("Skipped %d axioms outside the supported OWL subset", len(errors))
    return triples, errors
