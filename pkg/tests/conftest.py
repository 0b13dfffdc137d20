import pytest

from sctkg.pipeline import build_graph, ingest_release
from sctkg.testing.synthetic import generate_release

# small enough to build in well under a second, large enough to exercise sharding and flushes
FILLER_CONCEPTS = 200


@pytest.fixture(scope="session")
def synthetic_release(tmp_path_factory):
    return generate_release(tmp_path_factory.mktemp("release"), concepts=FILLER_CONCEPTS, seed=0)


@pytest.fixture(scope="session")
def history_release(tmp_path_factory):
    return generate_release(
        tmp_path_factory.mktemp("history"),
        concepts=FILLER_CONCEPTS,
        seed=1,
        history=True,
        retired=0.1,
    )


@pytest.fixture(scope="session")
def ingested(synthetic_release):
    """Treat as read-only, it is shared by the whole session."""
    return ingest_release(synthetic_release.root, workers=2)


@pytest.fixture(scope="session")
def built_store(ingested):
    """Graph of the synthetic release. Read-only, like ``ingested``."""
    store, _ = build_graph(ingested.composites)
    return store
