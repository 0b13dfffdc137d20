import pytest

from sctkg.common.types import UnknownConceptError
from sctkg.integrations.snowstorm import (
    ServerConfig,
    SnowstormClient,
    SnowstormError,
    fetch_all,
    fetch_concept_bundle,
    write_fixture,
)
from sctkg.integrations.snowstorm.client import ConceptPayload, RelationshipPayload
from sctkg.testing import synthetic

pytest.importorskip("fastapi")
pytest.importorskip("uvicorn")

from sctkg.integrations.snowstorm.stub import StubServer, create_app  # noqa: E402

DIABETES = synthetic.DIABETES_ID
MISSING = 22253000


@pytest.fixture(scope="module")
def rows():
    return synthetic.embedded_rows()


@pytest.fixture(scope="module")
def fixture_dir(rows, tmp_path_factory):
    directory = tmp_path_factory.mktemp("snowstorm")
    write_fixture(rows, directory)
    return directory


@pytest.fixture(scope="module")
def server(fixture_dir):
    with StubServer(create_app(fixture_dir)) as running:
        yield running


def _config(server, **kwargs):
    return ServerConfig(base_url=server.url, backoff_base=0.0, **kwargs)


def test_write_fixture_one_file_per_concept(rows, fixture_dir):
    assert sorted(p.name for p in fixture_dir.iterdir()) == sorted(
        f"{c.id}.json" for c in rows.concepts
    )


def test_fetch_bundle_maps_rows(server, rows):
    concept, descriptions, relationships = fetch_concept_bundle(_config(server), DIABETES)
    assert concept == next(c for c in rows.concepts if c.id == DIABETES)
    assert descriptions == [d for d in rows.descriptions if d.concept_id == DIABETES]
    assert relationships == [r for r in rows.relationships if r.source_id == DIABETES]
    assert {r.id for r in relationships} == {
        synthetic.FINDING_SITE_RELATIONSHIP_ID,
        synthetic.DIABETES_IS_A_RELATIONSHIP_ID,
    }


def test_fetch_bundle_follows_pages(server, rows):
    _, descriptions, relationships = fetch_concept_bundle(_config(server, page_size=1), DIABETES)
    assert len(descriptions) == 2
    assert len(relationships) == 2


def test_unknown_concept_is_not_retried(server):
    client = SnowstormClient(_config(server))
    with pytest.raises(UnknownConceptError):
        client.fetch_concept_bundle(MISSING)
    assert client.retry_log == []


def test_invalid_id_is_rejected_before_any_request(server):
    with pytest.raises(ValueError):
        fetch_concept_bundle(_config(server), 123)


def test_transient_errors_are_retried(fixture_dir):
    app = create_app(fixture_dir, failures={DIABETES: [500, 503]})
    with StubServer(app) as flaky:
        client = SnowstormClient(_config(flaky, max_retries=3))
        concept, _, _ = client.fetch_concept_bundle(DIABETES)
    assert concept.id == DIABETES
    assert [(attempt, error) for _, attempt, error, _ in client.retry_log] == [
        (1, "HTTP 500"),
        (2, "HTTP 503"),
    ]


def test_retry_budget(fixture_dir):
    app = create_app(fixture_dir, permanent_failures={DIABETES: 503})
    with StubServer(app) as down:
        with pytest.raises(SnowstormError, match="after 3 attempts"):
            fetch_concept_bundle(_config(down, max_retries=2), DIABETES)
    assert app.state.stub.hits[DIABETES] == 3


def test_fetch_all_isolates_failures(server, rows):
    ids = [DIABETES, MISSING, synthetic.COUGH_ID, DIABETES]
    fetched, report = fetch_all(_config(server), ids, concurrency=3)
    assert report.requested == 3
    assert report.fetched == 2
    assert [cid for cid, _ in report.failed] == [MISSING]
    assert [c.id for c in fetched.concepts] == sorted([DIABETES, synthetic.COUGH_ID])
    assert report.to_dict()["failed"][0]["concept_id"] == MISSING


def test_fetch_all_isolates_transport_errors(fixture_dir):
    app = create_app(fixture_dir, redirect_loops={synthetic.COUGH_ID})
    with StubServer(app) as looping:
        ids = [DIABETES, synthetic.COUGH_ID, synthetic.PNEUMONIA_ID]
        fetched, report = fetch_all(_config(looping), ids, concurrency=2)
    (failure,) = report.failed
    assert failure[0] == synthetic.COUGH_ID
    assert "TooManyRedirects" in failure[1]
    assert [c.id for c in fetched.concepts] == sorted([DIABETES, synthetic.PNEUMONIA_ID])


def test_transport_error_is_not_retried(fixture_dir):
    app = create_app(fixture_dir, redirect_loops={DIABETES})
    with StubServer(app) as looping:
        client = SnowstormClient(_config(looping))
        with pytest.raises(SnowstormError, match="TooManyRedirects"):
            client.fetch_concept_bundle(DIABETES)
    assert client.retry_log == []


def test_fetch_all_is_independent_of_concurrency(server, rows):
    ids = [c.id for c in rows.concepts]
    serial, _ = fetch_all(_config(server), ids, concurrency=1)
    parallel, report = fetch_all(_config(server), ids, concurrency=8)
    assert report.failed == []
    assert serial.concepts == parallel.concepts == sorted(rows.concepts, key=lambda c: c.id)
    assert serial.descriptions == parallel.descriptions
    assert serial.relationships == parallel.relationships


def test_checkpoint_resumes(fixture_dir, tmp_path):
    ids = [DIABETES, synthetic.COUGH_ID, synthetic.PNEUMONIA_ID]
    checkpoint = tmp_path / "done.txt"
    app = create_app(fixture_dir, permanent_failures={synthetic.PNEUMONIA_ID: 500})
    with StubServer(app) as partial:
        _, first = fetch_all(_config(partial, max_retries=0), ids, checkpoint=checkpoint)
    assert [cid for cid, _ in first.failed] == [synthetic.PNEUMONIA_ID]
    assert sorted(int(line) for line in checkpoint.read_text().split()) == sorted(
        [DIABETES, synthetic.COUGH_ID]
    )

    with StubServer(create_app(fixture_dir)) as healthy:
        resumed, second = fetch_all(_config(healthy), ids, checkpoint=checkpoint)
    assert second.skipped_from_checkpoint == 2
    assert (second.fetched, second.failed) == (3, [])
    assert [c.id for c in resumed.concepts] == [synthetic.PNEUMONIA_ID]


def test_fetch_all_rejects_bad_concurrency():
    with pytest.raises(ValueError):
        fetch_all(ServerConfig(), [DIABETES], concurrency=0)


def test_server_field_names_and_enums():
    concept = ConceptPayload.model_validate(
        {
            "conceptId": "73211009",
            "effectiveTime": "20240131",
            "active": True,
            "moduleId": "900000000000207008",
            "definitionStatus": "FULLY_DEFINED",
            "fsn": {"term": "ignored"},
        }
    ).to_row()
    assert (concept.id, concept.definition_status_id) == (73211009, 900000000000073002)
    relationship = RelationshipPayload.model_validate(
        {
            "relationshipId": "111111021",
            "effectiveTime": 20240131,
            "active": True,
            "moduleId": 900000000000207008,
            "sourceId": "73211009",
            "destinationId": "113331007",
            "groupId": 1,
            "typeId": "363698007",
            "characteristicType": "INFERRED_RELATIONSHIP",
            "modifier": "UNIVERSAL",
        }
    ).to_row()
    assert relationship.relationship_group == 1
    assert relationship.characteristic_type_id == 900000000000011006
    assert relationship.modifier_id == 900000000000450001
