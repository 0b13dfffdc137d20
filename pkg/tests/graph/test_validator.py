import dataclasses
import random

import pytest

from sctkg.common.types import UnknownConceptError
from sctkg.graph.loader import GraphLoader
from sctkg.graph.records import EdgeRecord, NodeRecord
from sctkg.graph.store import GraphStore
from sctkg.graph.validator import (
    check_id_consistency,
    detect_redundant_edges,
    validate,
    verify_multi_hop,
)
from sctkg.pipeline import build_graph
from sctkg.testing import synthetic


@pytest.fixture
def chain_store(ingested):
    store, _ = build_graph(ingested.composites)
    return store


def _redundant_store():
    store = GraphStore(dedupe_on_insert=False)
    for rid in (50000001, 50000011, 50000021):
        store.add_edge_record(EdgeRecord(rid, 43878008, 405737000, 9990001, "causes"))
    store.add_edge_record(
        EdgeRecord(50000002, 405737000, 119971000119104, 9990002, "requires test")
    )
    return store


def test_clean_graph_validates(chain_store):
    report = validate(
        chain_store,
        pairs=[(synthetic.STREP_INFECTION_ID, synthetic.PENICILLIN_ID)],
        max_hops=3,
        strict=True,
    )
    assert report.clean
    assert report.to_dict() == {
        "clean": True,
        "id_inconsistencies": [],
        "redundant_edges": [],
        "unreachable_pairs": [],
    }


def test_redundant_edges_detected_and_eliminated():
    store = _redundant_store()
    assert detect_redundant_edges(store) == [(50000021, 50000001), (50000021, 50000011)]
    assert store.edge_count == 4
    assert detect_redundant_edges(store, eliminate=True) == [
        (50000021, 50000001),
        (50000021, 50000011),
    ]
    assert [e.relationship_id for e in store.edges()] == [50000002, 50000021]
    assert detect_redundant_edges(store) == []


def test_mismatched_index_is_an_id_inconsistency():
    store = GraphStore()
    store.upsert_node(NodeRecord(404684003, "Clinical finding", "finding"))
    store.add_edge_record(EdgeRecord(50000001, 43878008, 405737000, 9990001, "causes"))
    # corrupt the stored record behind the indexes' back
    store._data.edges[50000001].destination_id = 404684003
    problems = check_id_consistency(store)
    assert [rid for rid, _ in problems] == [50000001]
    assert "destination_id 404684003" in problems[0][1]


def test_strict_mode_flags_unknown_types():
    store = GraphStore()
    store.add_edge_record(EdgeRecord(50000001, 43878008, 405737000, 9990001, "causes"))
    store.add_edge_record(EdgeRecord(50000002, 43878008, 764146007, 116680003, "Is a"))
    assert check_id_consistency(store) == []
    assert check_id_consistency(store, strict=True) == [
        (50000001, "type_id 9990001 has no node or alias")
    ]


def test_multi_hop(chain_store):
    path = verify_multi_hop(
        chain_store, synthetic.STREP_INFECTION_ID, synthetic.PENICILLIN_ID, max_hops=3
    )
    assert path == list(synthetic.INFECTION_CHAIN)
    assert verify_multi_hop(
        chain_store, synthetic.STREP_INFECTION_ID, synthetic.PENICILLIN_ID, max_hops=2
    ) is None
    assert verify_multi_hop(
        chain_store, synthetic.PENICILLIN_ID, synthetic.STREP_INFECTION_ID, max_hops=3
    ) is None
    assert verify_multi_hop(
        chain_store,
        synthetic.PENICILLIN_ID,
        synthetic.STREP_INFECTION_ID,
        max_hops=3,
        undirected=True,
    ) == list(reversed(synthetic.INFECTION_CHAIN))


def test_multi_hop_type_filter(chain_store):
    assert verify_multi_hop(
        chain_store,
        synthetic.STREP_INFECTION_ID,
        synthetic.PENICILLIN_ID,
        max_hops=3,
        type_filter=[synthetic.CAUSES_TYPE_ID, synthetic.REQUIRES_TEST_TYPE_ID],
    ) is None


def test_multi_hop_same_endpoint_and_errors(chain_store):
    assert verify_multi_hop(chain_store, synthetic.COUGH_ID, synthetic.COUGH_ID, 1) == [
        synthetic.COUGH_ID
    ]
    with pytest.raises(UnknownConceptError):
        verify_multi_hop(chain_store, synthetic.COUGH_ID, 999999999, 3)
    with pytest.raises(ValueError):
        verify_multi_hop(chain_store, synthetic.COUGH_ID, synthetic.PNEUMONIA_ID, 0)


def test_validate_reports_everything():
    store = _redundant_store()
    report = validate(store, pairs=[(43878008, 119971000119104), (43878008, 999999999)], max_hops=1)
    assert not report.clean
    assert report.unreachable_pairs == [(43878008, 119971000119104, 1), (43878008, 999999999, 1)]
    assert len(report.redundant_edges) == 2
    assert report.to_dict()["redundant_edges"][0] == {"kept": 50000021, "removed": 50000001}


@pytest.mark.parametrize("seed", range(5))
def test_seeded_corruptions_are_all_found(ingested, seed):
    rng = random.Random(seed)
    store = GraphStore(dedupe_on_insert=False)
    GraphLoader(store).load(ingested.composites)
    assert validate(store).clean

    edges = store.edges()
    node_ids = [node.concept_id for node in store.nodes()]
    triples = {edge.triple for edge in edges}
    chosen = rng.sample(edges, rng.randint(1, 50) + rng.randint(1, 50))
    corrupt, duplicate = chosen[: len(chosen) // 2], chosen[len(chosen) // 2 :]

    corrupted = set()
    for edge in corrupt:
        destination = rng.choice(node_ids)
        if destination == edge.destination_id or (edge.source_id, edge.type_id, destination) in (
            triples
        ):
            continue
        store._data.edges[edge.relationship_id].destination_id = destination
        triples.add((edge.source_id, edge.type_id, destination))
        corrupted.add(edge.relationship_id)
    duplicated = set()
    for offset, edge in enumerate(duplicate):
        copy = dataclasses.replace(edge, relationship_id=90_000_000 + offset)
        store.add_edge_record(copy)
        duplicated.add(frozenset((edge.relationship_id, copy.relationship_id)))

    report = validate(store)
    assert {rid for rid, _ in report.id_inconsistencies} == corrupted
    assert {frozenset(pair) for pair in report.redundant_edges} == duplicated
