"""Post-load checks: edges agree with the nodes they hang off, triples are not repeated, and
chosen concept pairs are connected within a hop budget."""
import collections
import dataclasses
import logging
from typing import Iterable, List, Optional, Sequence, Tuple

from sctkg.common.types import UnknownConceptError
from sctkg.graph.aliases import AliasTable
from sctkg.graph.store import GraphStore

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class ValidationReport:
    id_inconsistencies: List[Tuple[int, str]] = dataclasses.field(default_factory=list)
    redundant_edges: List[Tuple[int, int]] = dataclasses.field(default_factory=list)
    unreachable_pairs: List[Tuple[int, int, int]] = dataclasses.field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not (self.id_inconsistencies or self.redundant_edges or self.unreachable_pairs)

    def to_dict(self) -> dict:
        return {
            "clean": self.clean,
            "id_inconsistencies": [
                {"relationship_id": rid, "detail": detail}
                for rid, detail in self.id_inconsistencies
            ],
            "redundant_edges": [
                {"kept": kept, "removed": removed} for kept, removed in self.redundant_edges
            ],
            "unreachable_pairs": [
                {"source_id": s, "destination_id": d, "max_hops": h}
                for s, d, h in self.unreachable_pairs
            ],
        }


def check_id_consistency(
    store: GraphStore, strict: bool = False, aliases: Optional[AliasTable] = None
) -> List[Tuple[int, str]]:
    """Finds edges whose stored endpoint ids disagree with where the store has them attached,
    and edges pointing at nodes that do not exist. In strict mode an edge whose type id is neither
    a node nor an alias entry is reported too.

    :return: ``(relationship_id, detail)`` pairs, ascending by relationship id
    """
    aliases = aliases if aliases is not None else AliasTable()
    edges = {edge.relationship_id: edge for edge in store.edges()}
    problems = []
    attached_out = collections.defaultdict(list)
    attached_in = collections.defaultdict(list)
    for concept_id, (outgoing, incoming) in store.adjacency().items():
        for rid in outgoing:
            attached_out[rid].append(concept_id)
        for rid in incoming:
            attached_in[rid].append(concept_id)
    for rid in sorted(set(edges) | set(attached_out) | set(attached_in)):
        edge = edges.get(rid)
        if edge is None:
            problems.append((rid, "attached to nodes but not stored"))
            continue
        if attached_out[rid] != [edge.source_id]:
            problems.append(
                (rid, f"source_id {edge.source_id} but attached as outgoing to {attached_out[rid]}")
            )
        if attached_in[rid] != [edge.destination_id]:
            problems.append(
                (
                    rid,
                    f"destination_id {edge.destination_id} but attached as incoming to "
                    f"{attached_in[rid]}",
                )
            )
        endpoints = (("source_id", edge.source_id), ("destination_id", edge.destination_id))
        for field, endpoint in endpoints:
            if not store.has_node(endpoint):
                problems.append((rid, f"{field} {endpoint} has no node"))
        if strict and not store.has_node(edge.type_id) and edge.type_id not in aliases:
            problems.append((rid, f"type_id {edge.type_id} has no node or alias"))
    if problems:
        logger.warning("Found %d id inconsistencies", len(problems))
    return problems


def detect_redundant_edges(store: GraphStore, eliminate: bool = False) -> List[Tuple[int, int]]:
    """Finds edges repeating a ``(source, type, destination)`` triple. Within each group the
    largest relationship id is kept.

    :param eliminate: Remove the redundant edges from the store (one atomic batch)
    :return: ``(kept, removed)`` pairs, ordered by removed id
    """
    by_triple = collections.defaultdict(list)
    for edge in store.edges():
        by_triple[edge.triple].append(edge.relationship_id)
    redundant = []
    for ids in by_triple.values():
        if len(ids) < 2:
            continue
        kept = max(ids)
        redundant.extend((kept, rid) for rid in ids if rid != kept)
    redundant.sort(key=lambda pair: pair[1])
    if eliminate and redundant:
        store.remove_edges(removed for _, removed in redundant)
        logger.info("Removed %d redundant edges", len(redundant))
    return redundant


def verify_multi_hop(
    store: GraphStore,
    source_id: int,
    destination_id: int,
    max_hops: int,
    type_filter: Optional[Iterable[int]] = None,
    undirected: bool = False,
) -> Optional[List[int]]:
    """Breadth-first search for a shortest path of at most ``max_hops`` edges.

    Neighbours are visited in ascending concept id order, which makes the returned path
    deterministic. Traversal follows edge direction unless ``undirected`` is set.

    :return: The concept ids along the path (``[source_id]`` when source equals destination),
        or None when there is no such path
    :raises UnknownConceptError: if either endpoint is not in the store
    :raises ValueError: if ``max_hops`` < 1
    """
    if max_hops < 1:
        raise ValueError(f"max_hops must be >= 1, got {max_hops}")
    for endpoint in (source_id, destination_id):
        if not store.has_node(endpoint):
            raise UnknownConceptError(endpoint)
    if source_id == destination_id:
        return [source_id]
    allowed = set(type_filter) if type_filter is not None else None

    def neighbours(concept_id: int) -> List[int]:
        found = {
            e.destination_id
            for e in store.out_edges(concept_id)
            if allowed is None or e.type_id in allowed
        }
        if undirected:
            found.update(
                e.source_id
                for e in store.in_edges(concept_id)
                if allowed is None or e.type_id in allowed
            )
        return sorted(found)

    parents = {source_id: None}
    frontier = [source_id]
    for _ in range(max_hops):
        next_frontier = []
        for concept_id in frontier:
            for neighbour in neighbours(concept_id):
                if neighbour in parents:
                    continue
                parents[neighbour] = concept_id
                if neighbour == destination_id:
                    path = [neighbour]
                    while parents[path[-1]] is not None:
                        path.append(parents[path[-1]])
                    return path[::-1]
                next_frontier.append(neighbour)
        frontier = next_frontier
        if not frontier:
            break
    return None


def validate(
    store: GraphStore,
    pairs: Sequence[Tuple[int, int]] = (),
    max_hops: int = 3,
    strict: bool = False,
    eliminate: bool = False,
    aliases: Optional[AliasTable] = None,
    type_filter: Optional[Iterable[int]] = None,
) -> ValidationReport:
    """Runs all three checks. Pairs whose endpoints are unknown count as unreachable."""
    report = ValidationReport()
    report.id_inconsistencies = check_id_consistency(store, strict=strict, aliases=aliases)
    report.redundant_edges = detect_redundant_edges(store, eliminate=eliminate)
    type_filter = list(type_filter) if type_filter is not None else None
    for source_id, destination_id in pairs:
        try:
            path = verify_multi_hop(store, source_id, destination_id, max_hops, type_filter)
        except UnknownConceptError:
            path = None
        if path is None:
            report.unreachable_pairs.append((source_id, destination_id, max_hops))
    return report
