import pytest

from sctkg.graph.buffer import (
    AdaptiveFlushPolicy,
    BufferSlice,
    StaticFlushPolicy,
    SubgraphBuffer,
    shard,
)
from sctkg.graph.records import EdgeRecord, NodeRecord


def _slice(node_ids, edges=()):
    return BufferSlice(
        [NodeRecord(cid, str(cid), "finding") for cid in node_ids],
        [EdgeRecord(rid, s, d, 116680003, "Is a") for rid, s, d in edges],
    )


def test_buffer_flush_threshold():
    buffer = SubgraphBuffer(flush_threshold=2)
    buffer.add_node(NodeRecord(10000001, "a", "finding"))
    assert not buffer.should_flush()
    buffer.add_node(NodeRecord(10000002, "b", "finding"))
    assert buffer.should_flush()
    drained = buffer.drain()
    assert len(drained) == 2
    assert buffer.is_empty()
    assert buffer.peak_pending_nodes == 2


def test_buffer_rejects_zero_threshold():
    with pytest.raises(ValueError):
        SubgraphBuffer(0)


def test_shard_partitions_everything():
    pending = _slice(
        [10000003, 10000001, 10000002, 10000004, 10000005],
        [
            (20000001, 10000001, 10000002),
            (20000002, 10000005, 10000001),
            (20000003, 99999999, 10000001),
        ],
    )
    slices = shard(pending, 3)
    assert len(slices) == 3
    assert sorted(len(s.nodes) for s in slices) == [1, 2, 2]
    assert sorted(n.concept_id for s in slices for n in s.nodes) == sorted(
        n.concept_id for n in pending.nodes
    )
    edge_ids = sorted(e.relationship_id for s in slices for e in s.edges)
    assert edge_ids == [20000001, 20000002, 20000003]
    for piece in slices:
        node_ids = {n.concept_id for n in piece.nodes}
        for edge in piece.edges:
            if edge.source_id != 99999999:
                assert edge.source_id in node_ids
    assert any(e.relationship_id == 20000003 for e in slices[99999999 % 3].edges)


def test_shard_keeps_empty_slices():
    assert [len(s) for s in shard(_slice([10000001]), 4)] == [1, 0, 0, 0]


def test_shard_rejects_zero():
    with pytest.raises(ValueError):
        shard(_slice([]), 0)


def test_static_policy():
    assert StaticFlushPolicy(50).threshold == 50
    with pytest.raises(ValueError):
        StaticFlushPolicy(0)


def test_adaptive_policy_halves_and_doubles_within_bounds():
    policy = AdaptiveFlushPolicy(initial=400, minimum=100, maximum=800, target_latency=1.0)
    policy.post_flush(pending_nodes=400, pending_edges=0, latency=5.0)
    assert policy.threshold == 200
    policy.post_flush(pending_nodes=200, pending_edges=0, latency=5.0)
    policy.post_flush(pending_nodes=100, pending_edges=0, latency=5.0)
    assert policy.threshold == 100
    policy.post_flush(pending_nodes=100, pending_edges=0, latency=0.01)
    policy.post_flush(pending_nodes=200, pending_edges=0, latency=0.01)
    policy.post_flush(pending_nodes=400, pending_edges=0, latency=0.01)
    policy.post_flush(pending_nodes=800, pending_edges=0, latency=0.01)
    assert policy.threshold == 800
    assert policy.history == [400, 200, 100, 200, 400, 800]


def test_adaptive_policy_ignores_partial_and_on_target_flushes():
    policy = AdaptiveFlushPolicy(initial=400, minimum=100, maximum=800, target_latency=1.0)
    policy.post_flush(pending_nodes=10, pending_edges=0, latency=10.0)
    policy.post_flush(pending_nodes=400, pending_edges=0, latency=1.5)
    assert policy.history == [400]


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(initial=50, minimum=100, maximum=800),
        dict(initial=400, minimum=100, maximum=200),
        dict(initial=400, target_latency=0),
        dict(initial=400, tolerance=1.0),
    ],
)
def test_adaptive_policy_validation(kwargs):
    with pytest.raises(ValueError):
        AdaptiveFlushPolicy(**kwargs)
