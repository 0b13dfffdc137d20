import concurrent.futures
import dataclasses

import pytest

from sctkg.common.types import UnknownConceptError
from sctkg.core.rf2 import RelationshipRow
from sctkg.graph.aliases import AliasTable
from sctkg.graph.records import EdgeRecord, NodeRecord
from sctkg.graph.store import BatchCommitError, GraphStore, RetryPolicy, StorageFault
from sctkg.lifecycle import PostCommitBatchHook
from sctkg.testing.faults import FaultInjector

DIABETES = 73211009
ENDOCRINE_DISORDER = 362969004
ENDOCRINE_STRUCTURE = 113331007
FINDING_SITE = 363698007
IS_A = 116680003

NO_WAIT = RetryPolicy(max_attempts=3, base_delay=0.0)


def _node(concept_id, name="x", category="disorder", synonyms=()):
    return NodeRecord(concept_id, name, category, list(synonyms))


def _edge(relationship_id, source, destination, type_id=IS_A, type_name="Is a", group=0):
    return EdgeRecord(relationship_id, source, destination, type_id, type_name, group)


class RecordingHook(PostCommitBatchHook):
    def __init__(self):
        self.calls = []

    def post_commit_batch(self, *, batch_id, attempts, nodes, edges, exception, **future_kwargs):
        self.calls.append((batch_id, attempts, len(nodes), len(edges), exception))


def test_upsert_creates_then_updates():
    store = GraphStore()
    assert store.upsert_node(_node(DIABETES, "Diabetes mellitus", synonyms=["DM"])) == "created"
    assert store.upsert_node(_node(DIABETES, "Diabetes mellitus", synonyms=["Diabetes"])) == (
        "updated"
    )
    node = store.get_node(DIABETES)
    assert node.synonyms == ["DM", "Diabetes"]
    assert store.node_count == 1


def test_edge_to_unknown_concept_creates_placeholder():
    store = GraphStore()
    store.upsert_node(_node(DIABETES, "Diabetes mellitus"))
    store.add_edge_record(_edge(222222021, DIABETES, ENDOCRINE_DISORDER))
    placeholder = store.get_node(ENDOCRINE_DISORDER)
    assert placeholder.placeholder
    assert placeholder.name == str(ENDOCRINE_DISORDER)

    store.upsert_node(_node(ENDOCRINE_DISORDER, "Disorder of endocrine system"))
    filled = store.get_node(ENDOCRINE_DISORDER)
    assert not filled.placeholder
    assert filled.name == "Disorder of endocrine system"
    assert [e.relationship_id for e in store.in_edges(ENDOCRINE_DISORDER)] == [222222021]


def test_placeholder_never_overwrites_real_data():
    store = GraphStore()
    store.upsert_node(_node(DIABETES, "Diabetes mellitus", synonyms=["DM"]))
    store.upsert_node(NodeRecord.make_placeholder(DIABETES))
    node = store.get_node(DIABETES)
    assert (node.name, node.placeholder, node.synonyms) == ("Diabetes mellitus", False, ["DM"])
    assert store.ensure_placeholder(DIABETES).name == "Diabetes mellitus"


def test_add_edge_from_relationship_row():
    store = GraphStore()
    row = RelationshipRow(
        111111021, 20240131, True, 900000000000207008, DIABETES, ENDOCRINE_STRUCTURE, 1,
        FINDING_SITE, 900000000000011006, 900000000000451002,
    )
    edge = store.add_edge(row, AliasTable().resolver(store))
    assert edge.type_name == "Finding site"
    assert edge.relationship_group == 1
    inactive = dataclasses.replace(row, active=False)
    with pytest.raises(ValueError, match="inactive"):
        store.add_edge(inactive, AliasTable().resolver(store))


def test_add_edge_with_repeated_triple_leaves_one_edge():
    store = GraphStore()
    row = RelationshipRow(
        111111021, 20240131, True, 900000000000207008, DIABETES, ENDOCRINE_STRUCTURE, 1,
        FINDING_SITE, 900000000000011006, 900000000000451002,
    )
    store.add_edge(row, AliasTable().resolver(store))
    smaller = store.add_edge(dataclasses.replace(row, id=100000021), AliasTable().resolver(store))
    assert smaller.relationship_id == 111111021
    larger = store.add_edge(dataclasses.replace(row, id=222222021), AliasTable().resolver(store))
    assert larger.relationship_id == 222222021
    assert [e.relationship_id for e in store.edges()] == [222222021]
    assert store.redundancy_notes == [(111111021, 100000021), (222222021, 111111021)]


@pytest.mark.parametrize(
    "edge,message",
    [
        (_edge(222222021, DIABETES, DIABETES), "self-loop"),
        (_edge(123, DIABETES, ENDOCRINE_DISORDER), "relationship_id"),
        (_edge(222222021, DIABETES, 42), "destination_id"),
        (_edge(222222021, DIABETES, ENDOCRINE_DISORDER, group=-1), "relationship_group"),
    ],
)
def test_invalid_edges_rejected(edge, message):
    store = GraphStore()
    with pytest.raises(ValueError, match=message):
        store.add_edge_record(edge)
    assert store.node_count == 0


def test_get_unknown_node():
    with pytest.raises(UnknownConceptError) as e:
        GraphStore().get_node(DIABETES)
    assert e.value.concept_id == DIABETES


@pytest.mark.parametrize("first,second", [(222222021, 333333021), (333333021, 222222021)])
def test_repeated_triple_keeps_larger_id(first, second):
    store = GraphStore()
    store.add_edge_record(_edge(first, DIABETES, ENDOCRINE_DISORDER))
    kept = store.add_edge_record(_edge(second, DIABETES, ENDOCRINE_DISORDER))
    assert kept.relationship_id == 333333021
    assert [e.relationship_id for e in store.edges()] == [333333021]
    assert store.redundancy_notes == [(333333021, 222222021)]


def test_repeated_triple_kept_without_dedupe():
    store = GraphStore(dedupe_on_insert=False)
    store.add_edge_record(_edge(222222021, DIABETES, ENDOCRINE_DISORDER))
    store.add_edge_record(_edge(333333021, DIABETES, ENDOCRINE_DISORDER))
    assert store.edge_count == 2


def test_submit_batch_is_atomic_on_permanent_failure():
    hook = RecordingHook()
    store = GraphStore(
        hooks=[FaultInjector(permanent=["doomed"]), hook], retry_policy=NO_WAIT
    )
    store.upsert_node(_node(DIABETES, "Diabetes mellitus"))
    before = store.canonical()
    with pytest.raises(BatchCommitError) as e:
        store.submit_batch(
            [_node(ENDOCRINE_DISORDER, "Disorder of endocrine system"), _node(DIABETES, "Renamed")],
            [_edge(222222021, DIABETES, ENDOCRINE_DISORDER)],
            batch_id="doomed",
        )
    assert e.value.batch_id == "doomed"
    assert e.value.attempts == 3
    assert store.canonical() == before
    assert store.commit_report.batches_failed == 1
    assert hook.calls[-1][0] == "doomed"
    assert isinstance(hook.calls[-1][-1], StorageFault)


def test_transient_failures_are_retried():
    faults = FaultInjector(scripted={"flaky": 2})
    store = GraphStore(hooks=[faults], retry_policy=NO_WAIT)
    report = store.submit_batch(
        [_node(DIABETES, "Diabetes mellitus")],
        [_edge(222222021, DIABETES, ENDOCRINE_DISORDER)],
        batch_id="flaky",
    )
    assert (report.batches_committed, report.batches_retried, report.nodes_written) == (1, 1, 1)
    assert faults.injected == [("flaky", 1), ("flaky", 2)]
    retried = [(batch, attempt) for batch, attempt, _ in store.retry_log]
    assert retried == [("flaky", 1), ("flaky", 2)]
    assert store.edge_count == 1


def test_retry_budget_respected():
    store = GraphStore(
        hooks=[FaultInjector(scripted={"flaky": 2})],
        retry_policy=RetryPolicy(max_attempts=2, base_delay=0.0),
    )
    with pytest.raises(BatchCommitError):
        store.submit_batch([_node(DIABETES, "Diabetes mellitus")], [], batch_id="flaky")
    assert store.node_count == 0


def test_invalid_element_fails_before_any_attempt():
    faults = FaultInjector()
    store = GraphStore(hooks=[faults])
    with pytest.raises(ValueError):
        store.submit_batch([_node(DIABETES)], [_edge(222222021, DIABETES, DIABETES)])
    with pytest.raises(ValueError, match="empty"):
        store.submit_batch([], [])
    assert store.node_count == 0


def test_retry_policy_validation():
    with pytest.raises(ValueError):
        RetryPolicy(max_attempts=0)
    with pytest.raises(ValueError):
        RetryPolicy(multiplier=0.5)


def test_reads_are_copies():
    store = GraphStore()
    store.upsert_node(_node(DIABETES, "Diabetes mellitus", synonyms=["DM"]))
    store.get_node(DIABETES).synonyms.append("mutated")
    assert store.get_node(DIABETES).synonyms == ["DM"]


def test_concurrent_batches_are_all_visible():
    store = GraphStore(hooks=[FaultInjector(rate=0.3, seed=5)], retry_policy=NO_WAIT)
    batches = [
        (
            [_node(10_000_000 + i, f"n{i}")],
            [_edge(20_000_000 + i, 10_000_000 + i, 10_000_000 + i + 1)],
        )
        for i in range(50)
    ]
    with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(lambda batch: store.submit_batch(*batch), batches))
    assert store.edge_count == 50
    # 50 real nodes plus the placeholder at the end of the chain
    assert store.node_count == 51
    assert store.commit_report.batches_committed == 50


def test_stats():
    store = GraphStore()
    store.upsert_node(_node(DIABETES, "Diabetes mellitus", "disorder"))
    store.upsert_node(_node(ENDOCRINE_STRUCTURE, "Endocrine structure", "body structure"))
    store.add_edge_record(
        _edge(111111021, DIABETES, ENDOCRINE_STRUCTURE, FINDING_SITE, "Finding site")
    )
    assert store.stats().to_dict() == {
        "categories": {"body structure": 1, "disorder": 1},
        "relationship_types": {"Finding site": 1},
    }


def _chain_batches(count):
    base = 10_000_000
    for i in range(count):
        edges = [_edge(20_000_000 + i, base + i, base + i - 1)] if i else []
        yield f"batch-{i:04d}", [_node(base + i, f"concept {i}", "finding")], edges


def test_visible_graph_is_whole_batches_under_random_faults():
    faults = FaultInjector(rate=0.3, seed=7, max_random_faults=2)
    store = GraphStore(hooks=[faults], retry_policy=RetryPolicy(max_attempts=2, base_delay=0.0))
    expected = GraphStore()
    committed = failed = 0
    for batch_id, nodes, edges in _chain_batches(1000):
        try:
            store.submit_batch(nodes, edges, batch_id=batch_id)
        except BatchCommitError:
            failed += 1
        else:
            committed += 1
            expected.submit_batch(nodes, edges, batch_id=batch_id)
        assert store.edge_count == expected.edge_count
        assert store.node_count == expected.node_count
    assert committed and failed
    assert store.canonical() == expected.canonical()


def test_retried_faults_end_in_the_fault_free_graph():
    faults = FaultInjector(rate=0.3, seed=7, max_random_faults=3)
    store = GraphStore(hooks=[faults], retry_policy=RetryPolicy(max_attempts=4, base_delay=0.0))
    expected = GraphStore()
    for batch_id, nodes, edges in _chain_batches(1000):
        store.submit_batch(nodes, edges, batch_id=batch_id)
        expected.submit_batch(nodes, edges, batch_id=batch_id)
    assert faults.injected
    assert store.commit_report.batches_failed == 0
    assert store.canonical() == expected.canonical()
