"""Bulk CSV interchange in the node/relationship layout property-graph importers expect.

``nodes.csv``: ``conceptId:ID,name,category:LABEL,synonyms,placeholder:boolean``
``edges.csv``: ``:START_ID,:END_ID,:TYPE,relationshipId,typeId,relationshipGroup``

UTF-8, LF line endings, minimal double-quote quoting with embedded quotes doubled. Synonyms are
joined with ``|``; a literal ``|`` or ``\\`` inside a synonym is escaped with a backslash.
``:TYPE`` is the edge type name with spaces replaced by ``_``.
"""
import csv
import logging
import os
import pathlib
import re
from typing import Optional, Union

from sctkg.graph.aliases import AliasTable
from sctkg.graph.records import EdgeRecord, NodeRecord
from sctkg.graph.store import GraphStore

logger = logging.getLogger(__name__)

NODE_HEADER = ["conceptId:ID", "name", "category:LABEL", "synonyms", "placeholder:boolean"]
EDGE_HEADER = [":START_ID", ":END_ID", ":TYPE", "relationshipId", "typeId", "relationshipGroup"]
NODES_FILE = "nodes.csv"
EDGES_FILE = "edges.csv"

SYNONYM_SEPARATOR = "|"
_SYNONYM_SPLIT = re.compile(r"(?<!\\)((?:\\\\)*)\|")


def _escape_synonym(synonym: str) -> str:
    return synonym.replace("\\", "\\\\").replace("|", "\\|")


def _unescape_synonym(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text)


def join_synonyms(synonyms: list[str]) -> str:
    return SYNONYM_SEPARATOR.join(_escape_synonym(s) for s in synonyms)


def split_synonyms(field: str) -> list[str]:
    if not field:
        return []
    parts, start = [], 0
    for match in _SYNONYM_SPLIT.finditer(field):
        parts.append(field[start : match.end(1)])
        start = match.end()
    parts.append(field[start:])
    return [_unescape_synonym(p) for p in parts]


def type_label(type_name: str) -> str:
    return type_name.replace(" ", "_")


def _writer(handle):
    return csv.writer(
        handle, delimiter=",", quotechar='"', quoting=csv.QUOTE_MINIMAL, lineterminator="\n"
    )


def export_bulk_csv(
    store: GraphStore, out_dir: Union[str, os.PathLike]
) -> tuple[pathlib.Path, pathlib.Path]:
    """Writes the store as ``nodes.csv`` and ``edges.csv`` (nodes by concept id, edges by
    relationship id, so equal graphs give byte-identical files).

    :return: Paths of the nodes file and the edges file
    """
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    nodes, edges = store.canonical()
    nodes_path, edges_path = out / NODES_FILE, out / EDGES_FILE
    with open(nodes_path, "w", encoding="utf-8", newline="") as f:
        writer = _writer(f)
        writer.writerow(NODE_HEADER)
        for node in nodes:
            writer.writerow(
                [
                    node.concept_id,
                    node.name,
                    node.category,
                    join_synonyms(node.synonyms),
                    "true" if node.placeholder else "false",
                ]
            )
    with open(edges_path, "w", encoding="utf-8", newline="") as f:
        writer = _writer(f)
        writer.writerow(EDGE_HEADER)
        for edge in edges:
            writer.writerow(
                [
                    edge.source_id,
                    edge.destination_id,
                    type_label(edge.type_name),
                    edge.relationship_id,
                    edge.type_id,
                    edge.relationship_group,
                ]
            )
    logger.info("Exported %d nodes and %d edges to %s", len(nodes), len(edges), out)
    return nodes_path, edges_path


def _boolean(value: str) -> bool:
    if value == "true":
        return True
    if value == "false":
        return False
    raise ValueError(f"bad boolean {value!r}")


def _read_rows(path: pathlib.Path, header: list[str]) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        found = next(reader, None)
        if found != header:
            raise ValueError(f"{path}: header mismatch: expected {header}, got {found}")
        return [row for row in reader]


def import_bulk_csv(
    in_dir: Union[str, os.PathLike],
    store: Optional[GraphStore] = None,
    aliases: Optional[AliasTable] = None,
) -> GraphStore:
    """Rebuilds a store from an export.

    ``:TYPE`` loses the spaces of the type name, so the name is recovered from the type concept's
    node when its name matches the label, else from the alias table, else by turning ``_`` back
    into spaces.

    :param in_dir: Directory holding ``nodes.csv`` and ``edges.csv``
    :param store: Store to load into. A new in-memory store by default.
    :param aliases: Alias table used for type name recovery
    """
    root = pathlib.Path(in_dir)
    aliases = aliases if aliases is not None else AliasTable()
    store = store if store is not None else GraphStore()
    nodes = []
    for line_number, row in enumerate(_read_rows(root / NODES_FILE, NODE_HEADER), start=2):
        if len(row) != len(NODE_HEADER):
            raise ValueError(
                f"{root / NODES_FILE}:{line_number}: expected 5 fields, got {len(row)}"
            )
        concept_id, name, category, synonyms, placeholder = row
        nodes.append(
            NodeRecord(
                int(concept_id), name, category, split_synonyms(synonyms), _boolean(placeholder)
            )
        )
    names = {node.concept_id: node.name for node in nodes if not node.placeholder}
    edges = []
    for line_number, row in enumerate(_read_rows(root / EDGES_FILE, EDGE_HEADER), start=2):
        if len(row) != len(EDGE_HEADER):
            raise ValueError(
                f"{root / EDGES_FILE}:{line_number}: expected 6 fields, got {len(row)}"
            )
        start, end, label, relationship_id, type_id, group = row
        type_id = int(type_id)
        if type_id in names and type_label(names[type_id]) == label:
            type_name = names[type_id]
        elif aliases.get(type_id) is not None and type_label(aliases.get(type_id)) == label:
            type_name = aliases.get(type_id)
        else:
            type_name = label.replace("_", " ")
        edges.append(
            EdgeRecord(
                int(relationship_id), int(start), int(end), type_id, type_name, int(group)
            )
        )
    if nodes or edges:
        store.submit_batch(nodes, edges, batch_id="bulk-import")
    logger.info("Imported %d nodes and %d edges from %s", len(nodes), len(edges), root)
    return store
