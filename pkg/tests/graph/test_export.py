import pytest

from sctkg.graph.export import (
    EDGES_FILE,
    NODES_FILE,
    export_bulk_csv,
    import_bulk_csv,
    join_synonyms,
    split_synonyms,
    type_label,
)
from sctkg.graph.records import EdgeRecord, NodeRecord
from sctkg.graph.store import GraphStore
from sctkg.pipeline import build_graph


@pytest.mark.parametrize(
    "synonyms",
    [
        [],
        ["Sore throat"],
        ["a|b", "c\\d", "e\\|f", "trailing\\"],
        ['Type "2"', "commas, inside", "ü Ω"],
    ],
)
def test_synonym_escaping(synonyms):
    assert split_synonyms(join_synonyms(synonyms)) == synonyms


def test_type_label():
    assert type_label("requires test") == "requires_test"


def test_export_layout(tmp_path):
    store = GraphStore()
    store.upsert_node(
        NodeRecord(73211009, "Diabetes mellitus", "disorder", ["DM, type 2", 'The "sugar" one'])
    )
    store.add_edge_record(EdgeRecord(111111021, 73211009, 113331007, 363698007, "Finding site", 1))
    nodes_path, edges_path = export_bulk_csv(store, tmp_path)
    assert nodes_path.name == NODES_FILE and edges_path.name == EDGES_FILE
    assert nodes_path.read_text(encoding="utf-8").splitlines() == [
        "conceptId:ID,name,category:LABEL,synonyms,placeholder:boolean",
        '73211009,Diabetes mellitus,disorder,"DM, type 2|The ""sugar"" one",false',
        "113331007,113331007,(none),,true",
    ]
    assert edges_path.read_text(encoding="utf-8") == (
        ":START_ID,:END_ID,:TYPE,relationshipId,typeId,relationshipGroup\n"
        "73211009,113331007,Finding_site,111111021,363698007,1\n"
    )


def test_export_import_preserves_the_graph(ingested, tmp_path):
    store, _ = build_graph(ingested.composites)
    export_bulk_csv(store, tmp_path / "first")
    imported = import_bulk_csv(tmp_path / "first")
    assert imported.canonical() == store.canonical()
    export_bulk_csv(imported, tmp_path / "second")
    for name in (NODES_FILE, EDGES_FILE):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_import_recovers_type_names_without_type_nodes(tmp_path):
    store = GraphStore()
    store.add_edge_record(
        EdgeRecord(50000002, 405737000, 119971000119104, 9990002, "requires test")
    )
    store.add_edge_record(EdgeRecord(50000010, 43878008, 405737000, 246075003, "caused by"))
    export_bulk_csv(store, tmp_path)
    names = {e.relationship_id: e.type_name for e in import_bulk_csv(tmp_path).edges()}
    assert names == {50000002: "requires test", 50000010: "caused by"}


def test_import_rejects_bad_header(tmp_path):
    (tmp_path / NODES_FILE).write_text("id,name\n", encoding="utf-8")
    (tmp_path / EDGES_FILE).write_text("", encoding="utf-8")
    with pytest.raises(ValueError, match="header mismatch"):
        import_bulk_csv(tmp_path)
