import pytest
import requests

from sctkg.datasets.backends import (
    BackendError,
    HttpBackend,
    MockBackend,
    case_context,
    load_template,
    make_backend,
    render_prompt,
)
from sctkg.datasets.cases import merge_cases
from sctkg.testing.synthetic import synthetic_case_tables


class FakeResponse:
    def __init__(self, status_code, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


class FakeSession:
    def __init__(self, *responses):
        self.responses = list(responses)
        self.requests = []

    def post(self, url, json, timeout):
        self.requests.append((url, json))
        response = self.responses.pop(0)
        if isinstance(response, Exception):
            raise response
        return response


@pytest.fixture(scope="module")
def case():
    return merge_cases(*synthetic_case_tables(count=1))[0]


def _backend(*responses, max_retries=2):
    session = FakeSession(*responses)
    backend = HttpBackend(
        "http://llm.local/generate",
        "clinical-7b",
        max_retries=max_retries,
        backoff_base=0.0,
        session=session,
    )
    return backend, session


def test_case_context_fills_every_narrative_key(case):
    context = case_context(case)
    assert context["chief_complaint"] == "Sore throat and fever for two days."
    assert context["diagnosis_codes"] == "J02.900"
    assert context["visit_id"] == "1000"


def test_prompt_templates_format(case):
    prompt = render_prompt("output", case)
    assert "Diagnoses: Pharyngitis" in prompt
    assert "{" not in prompt
    with pytest.raises(ValueError):
        load_template("summary")


def test_http_backend_posts_model_and_prompt():
    backend, session = _backend(FakeResponse(200, {"text": " Diagnosis: pharyngitis "}))
    assert backend.generate("Summarize") == " Diagnosis: pharyngitis "
    assert session.requests == [
        ("http://llm.local/generate", {"model": "clinical-7b", "prompt": "Summarize"})
    ]


def test_http_backend_accepts_response_key():
    backend, _ = _backend(FakeResponse(200, {"response": "ok"}))
    assert backend.generate("x") == "ok"


def test_http_backend_retries_throttling_and_server_errors():
    backend, session = _backend(
        FakeResponse(429),
        requests.ConnectionError("reset"),
        FakeResponse(200, {"text": "ok"}),
    )
    assert backend.generate("x") == "ok"
    assert len(session.requests) == 3


def test_http_backend_gives_up_after_retry_budget():
    backend, session = _backend(*[FakeResponse(503)] * 3, max_retries=2)
    with pytest.raises(BackendError, match="after 3 attempts"):
        backend.generate("x")
    assert len(session.requests) == 3


@pytest.mark.parametrize(
    "response",
    [FakeResponse(400, text="bad request"), FakeResponse(200), FakeResponse(200, {"text": 1})],
    ids=["client-error", "not-json", "no-text"],
)
def test_http_backend_fails_fast(response):
    backend, session = _backend(response)
    with pytest.raises(BackendError):
        backend.generate("x")
    assert len(session.requests) == 1


def test_make_backend():
    mock = make_backend("mock")
    assert isinstance(mock, MockBackend)
    assert mock.describe() == {"backend": "mock", "template_version": "v1"}
    http = make_backend("http", url="http://llm.local", model="m")
    assert http.describe() == {"backend": "http", "url": "http://llm.local", "model": "m"}
    with pytest.raises(ValueError):
        make_backend("http", url="http://llm.local")
    with pytest.raises(ValueError):
        make_backend("openai")
    with pytest.raises(ValueError):
        HttpBackend("http://llm.local", "m", max_retries=11)
