from sctkg.parsing.owl import OWLAxiomResult, OWLParseError, axiom_triples, parse_owl_axiom
from sctkg.parsing.rf2_files import (
    ReleaseRows,
    RF2FormatError,
    discover_release,
    parallel_parse,
    parse_axiom_file,
    parse_concept_file,
    parse_description_file,
    parse_file,
    parse_relationship_file,
    stream_release,
)

__all__ = [
    "axiom_triples",
    "discover_release",
    "OWLAxiomResult",
    "OWLParseError",
    "parallel_parse",
    "parse_axiom_file",
    "parse_concept_file",
    "parse_description_file",
    "parse_file",
    "parse_owl_axiom",
    "parse_relationship_file",
    "ReleaseRows",
    "RF2FormatError",
    "stream_release",
]
