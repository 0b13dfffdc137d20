import pytest

from sctkg.graph.aliases import AliasTable
from sctkg.graph.records import EdgeRecord, NodeRecord
from sctkg.graph.store import GraphStore
from sctkg.paths import (
    KnowledgePath,
    build_knowledge_vector,
    find_paths,
    match_seeds,
    parse_rendered_path,
    render_path,
)
from sctkg.testing import synthetic


@pytest.fixture
def store(built_store):
    return built_store


def test_infection_chain_with_relations(store):
    paths = find_paths(store, [synthetic.STREP_INFECTION_ID])
    assert len(paths) == 1
    assert paths[0].concept_ids == synthetic.INFECTION_CHAIN
    assert paths[0].type_ids == (
        synthetic.CAUSES_TYPE_ID,
        synthetic.REQUIRES_TEST_TYPE_ID,
        synthetic.TREATED_BY_TYPE_ID,
    )
    assert render_path(paths[0], "with-relations") == synthetic.INFECTION_CHAIN_TEXT


def test_respiratory_chain_concepts_only(store):
    (path,) = find_paths(store, [synthetic.COUGH_ID])
    assert render_path(path) == synthetic.RESPIRATORY_CHAIN_TEXT
    assert render_path(path, "concepts-only") == "cough → pneumonia → chest X-ray → antibiotics"


def test_max_depth_cuts_paths(store):
    (path,) = find_paths(store, [synthetic.COUGH_ID], max_depth=2)
    assert render_path(path) == "cough → pneumonia → chest X-ray"


def test_paths_ordered_by_seed_then_length(store):
    paths = find_paths(store, [synthetic.DIABETES_ID, synthetic.COUGH_ID], max_paths=10)
    assert [p.concept_ids for p in paths] == [
        (synthetic.DIABETES_ID, synthetic.ENDOCRINE_DISORDER_ID, synthetic.ROOT_ID),
        (
            synthetic.DIABETES_ID,
            synthetic.ENDOCRINE_STRUCTURE_ID,
            synthetic.BODY_STRUCTURE_ID,
            synthetic.ROOT_ID,
        ),
        synthetic.RESPIRATORY_CHAIN,
    ]
    assert len(find_paths(store, [synthetic.DIABETES_ID, synthetic.COUGH_ID])) == 3
    assert len(find_paths(store, [synthetic.DIABETES_ID, synthetic.COUGH_ID], max_paths=1)) == 1


def test_type_filter(store):
    paths = find_paths(
        store, [synthetic.DIABETES_ID], type_filter=[synthetic.FINDING_SITE_TYPE_ID]
    )
    assert [p.concept_ids for p in paths] == [
        (synthetic.DIABETES_ID, synthetic.ENDOCRINE_STRUCTURE_ID)
    ]
    assert render_path(paths[0], "with-relations") == (
        "Diabetes mellitus → Finding site → Structure of endocrine system"
    )


def test_unknown_and_repeated_seeds(store):
    assert find_paths(store, [1234567]) == []
    assert len(find_paths(store, [synthetic.COUGH_ID, synthetic.COUGH_ID], max_paths=5)) == 1


def test_seed_without_successors_yields_nothing(store):
    assert find_paths(store, [synthetic.PENICILLIN_ID]) == []


def test_invalid_limits(store):
    with pytest.raises(ValueError):
        find_paths(store, [synthetic.COUGH_ID], max_depth=0)
    with pytest.raises(ValueError):
        find_paths(store, [synthetic.COUGH_ID], max_paths=0)


def test_aliases_rename_links(store):
    aliases = AliasTable({synthetic.CAUSES_TYPE_ID: "leads to"})
    (path,) = find_paths(store, [synthetic.STREP_INFECTION_ID], aliases=aliases)
    assert render_path(path, "with-relations").startswith(
        "Streptococcal infection → leads to → Pharyngitis"
    )


def test_match_seeds_longest_match_and_synonyms(store):
    text = "Strep infection last week, now a sore throat and Coughing."
    assert match_seeds(store, text) == [
        ("Strep infection", synthetic.STREP_INFECTION_ID),
        ("sore throat", synthetic.PHARYNGITIS_ID),
        ("Coughing", synthetic.COUGH_ID),
    ]


def test_match_seeds_whole_words_only(store):
    assert match_seeds(store, "coughs and pneumonias") == []


def test_match_seeds_rejects_empty_text(store):
    with pytest.raises(ValueError):
        match_seeds(store, "   ")


def test_overlapping_terms_prefer_the_longer():
    store = GraphStore()
    store.upsert_node(NodeRecord(29857009, "Chest pain", "finding", []))
    store.upsert_node(NodeRecord(22253000, "Pain", "finding", []))
    assert match_seeds(store, "Patient reports chest pain") == [("chest pain", 29857009)]
    assert match_seeds(store, "pain in the leg") == [("pain", 22253000)]


def test_knowledge_vector(store):
    vector = build_knowledge_vector(store, "Persistent cough, suspected pneumonia.", max_paths=2)
    assert vector.seed_terms == ("cough", "pneumonia")
    assert vector.render() == [
        "cough → pneumonia → chest X-ray → antibiotics",
        "pneumonia → chest X-ray → antibiotics",
    ]


def test_parse_rendered_path(store):
    path = parse_rendered_path(store, synthetic.INFECTION_CHAIN_TEXT)
    assert path.concept_ids == synthetic.INFECTION_CHAIN
    assert render_path(path, "with-relations") == synthetic.INFECTION_CHAIN_TEXT
    with pytest.raises(ValueError):
        parse_rendered_path(store, "Pharyngitis → causes → Streptococcal infection")
    with pytest.raises(ValueError):
        parse_rendered_path(store, "Pharyngitis → causes")


def test_parse_rendered_path_tries_ambiguous_names_in_id_order():
    store = GraphStore()
    for concept_id, name in ((200001, "Cold"), (200002, "Cold"), (200003, "Rhinitis")):
        store.upsert_node(NodeRecord(concept_id, name, "disorder", []))
    store.upsert_node(NodeRecord(9990001, "causes", "attribute", []))
    store.add_edge_record(EdgeRecord(300001, 200002, 200003, 9990001, "causes"))
    path = parse_rendered_path(store, "Cold → causes → Rhinitis")
    assert path.concept_ids == (200002, 200003)


def test_path_dict_and_shape():
    path = KnowledgePath(((1, "a"), (2, "b")), ((9, "to"),))
    assert path.to_dict() == {
        "concepts": [{"concept_id": 1, "name": "a"}, {"concept_id": 2, "name": "b"}],
        "relations": [{"type_id": 9, "alias": "to"}],
        "rendered": "a → to → b",
    }
    with pytest.raises(ValueError):
        KnowledgePath(((1, "a"), (2, "b")), ())
    with pytest.raises(ValueError):
        render_path(path, "graph")
