import abc
import dataclasses
import logging
from typing import TYPE_CHECKING, Literal, Optional

from sctkg.core import serde
from sctkg.core.composite import NO_CATEGORY
from sctkg.core.rf2 import validate_sctid

if TYPE_CHECKING:
    from sctkg.graph.store import GraphData

logger = logging.getLogger(__name__)

UpsertOutcome = Literal["created", "updated"]


@dataclasses.dataclass
class NodeRecord:
    concept_id: int
    name: str
    category: str
    synonyms: list[str] = dataclasses.field(default_factory=list)
    placeholder: bool = False

    @classmethod
    def make_placeholder(cls, concept_id: int) -> "NodeRecord":
        return cls(concept_id, str(concept_id), NO_CATEGORY, [], True)

    def copy(self) -> "NodeRecord":
        return dataclasses.replace(self, synonyms=list(self.synonyms))


@dataclasses.dataclass
class EdgeRecord:
    relationship_id: int
    source_id: int
    destination_id: int
    type_id: int
    type_name: str
    relationship_group: int = 0

    @property
    def triple(self) -> tuple[int, int, int]:
        return self.source_id, self.type_id, self.destination_id

    def copy(self) -> "EdgeRecord":
        return dataclasses.replace(self)


def merge_nodes(existing: Optional[NodeRecord], incoming: NodeRecord) -> NodeRecord:
    """Upsert merge rule. Synonyms are unioned (kept sorted so the result does not depend on
    arrival order); name and category come from real data, never from a placeholder."""
    synonyms = set(incoming.synonyms)
    if existing is None:
        return dataclasses.replace(incoming, synonyms=sorted(synonyms))
    synonyms.update(existing.synonyms)
    if incoming.placeholder:
        return dataclasses.replace(existing, synonyms=sorted(synonyms))
    return NodeRecord(
        concept_id=existing.concept_id,
        name=incoming.name,
        category=incoming.category,
        synonyms=sorted(synonyms),
        placeholder=False,
    )


class GraphDelta(abc.ABC):
    """One mutation of the graph. A committed batch is a list of deltas, and the journal stores
    batches as their serialized deltas so that replay re-applies the very same operations."""

    @classmethod
    @abc.abstractmethod
    def name(cls) -> str:
        """Unique name of this operation for ser/deser"""
        pass

    def serialize(self) -> dict:
        """Converts the delta to a JSON object"""
        return {serde.KEY: self.name(), **serde.serialize(self)}

    @classmethod
    @abc.abstractmethod
    def deserialize(cls, json_dict: dict) -> "GraphDelta":
        """Converts a JSON object to a delta"""
        pass

    def validate(self):
        """Checks the delta before any batch containing it is attempted. No-op by default."""
        pass

    @abc.abstractmethod
    def apply_mutate(self, graph: "GraphData"):
        """Applies the delta. Every write goes through ``graph`` so that it can be undone."""
        pass


@dataclasses.dataclass
class UpsertNode(GraphDelta):
    node: NodeRecord

    @classmethod
    def name(cls) -> str:
        return "upsert_node"

    @classmethod
    def deserialize(cls, json_dict: dict) -> "UpsertNode":
        return cls(NodeRecord(**json_dict["node"]))

    def validate(self):
        validate_sctid(self.node.concept_id, "concept_id")

    def apply_mutate(self, graph: "GraphData") -> UpsertOutcome:
        existing = graph.nodes.get(self.node.concept_id)
        graph.put_node(merge_nodes(existing, self.node))
        return "created" if existing is None else "updated"


@dataclasses.dataclass
class EnsurePlaceholder(GraphDelta):
    concept_id: int

    @classmethod
    def name(cls) -> str:
        return "ensure_placeholder"

    @classmethod
    def deserialize(cls, json_dict: dict) -> "EnsurePlaceholder":
        return cls(json_dict["concept_id"])

    def validate(self):
        validate_sctid(self.concept_id, "concept_id")

    def apply_mutate(self, graph: "GraphData") -> NodeRecord:
        existing = graph.nodes.get(self.concept_id)
        if existing is not None:
            return existing
        node = NodeRecord.make_placeholder(self.concept_id)
        graph.put_node(node)
        return node


@dataclasses.dataclass
class AddEdge(GraphDelta):
    """Adds an edge, creating placeholder endpoints as needed.

    When the store deduplicates, an edge repeating a stored ``(source, type, destination)``
    triple is resolved in favour of the larger relationship id and the loser is noted as
    redundant. The outcome is the same in whichever order the two edges arrive."""

    edge: EdgeRecord

    @classmethod
    def name(cls) -> str:
        return "add_edge"

    @classmethod
    def deserialize(cls, json_dict: dict) -> "AddEdge":
        return cls(EdgeRecord(**json_dict["edge"]))

    def validate(self):
        validate_sctid(self.edge.relationship_id, "relationship_id")
        validate_sctid(self.edge.source_id, "source_id")
        validate_sctid(self.edge.destination_id, "destination_id")
        validate_sctid(self.edge.type_id, "type_id")
        if self.edge.source_id == self.edge.destination_id:
            raise ValueError(
                f"Relationship {self.edge.relationship_id} is a self-loop on {self.edge.source_id}."
            )
        if self.edge.relationship_group < 0:
            raise ValueError(
                f"relationship_group must be >= 0, got {self.edge.relationship_group}."
            )

    def apply_mutate(self, graph: "GraphData") -> EdgeRecord:
        edge = self.edge
        for endpoint in (edge.source_id, edge.destination_id):
            EnsurePlaceholder(endpoint).apply_mutate(graph)
        if graph.dedupe:
            same_triple = [
                rid for rid in graph.triples.get(edge.triple, ()) if rid != edge.relationship_id
            ]
            if same_triple:
                kept = max(same_triple)
                if kept > edge.relationship_id:
                    graph.note_redundancy(kept, edge.relationship_id)
                    return graph.edges[kept]
                graph.drop_edge(kept)
                graph.note_redundancy(edge.relationship_id, kept)
        graph.put_edge(edge.copy())
        return edge


@dataclasses.dataclass
class RemoveEdge(GraphDelta):
    relationship_id: int

    @classmethod
    def name(cls) -> str:
        return "remove_edge"

    @classmethod
    def deserialize(cls, json_dict: dict) -> "RemoveEdge":
        return cls(json_dict["relationship_id"])

    def apply_mutate(self, graph: "GraphData"):
        if self.relationship_id in graph.edges:
            graph.drop_edge(self.relationship_id)


DELTA_TYPES = {cls.name(): cls for cls in (UpsertNode, EnsurePlaceholder, AddEdge, RemoveEdge)}


def _register_delta_deserializer(delta_type: type[GraphDelta]):
    @serde.deserializer.register(delta_type.name())
    def _deserialize(value: dict, **kwargs) -> GraphDelta:
        return delta_type.deserialize({k: v for k, v in value.items() if k != serde.KEY})


for _delta_type in DELTA_TYPES.values():
    _register_delta_deserializer(_delta_type)
