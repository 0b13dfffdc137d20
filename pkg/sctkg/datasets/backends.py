"""Text-generation backends. A backend only ever writes field *content*; the record structure and
key names are assembled by :py:func:`sctkg.datasets.generate.gen_platypus`.

Prompt templates are versioned text files under ``sctkg/datasets/templates/<version>/``:
``<field>.prompt.txt`` is what a live backend is sent, ``<field>.mock.txt`` is what the mock
backend fills in. Both are formatted with :py:func:`case_context`.
"""
import abc
import functools
import importlib.resources
import logging
import threading
from typing import Any, Optional

import requests
from tenacity import (
    RetryError,
    Retrying,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from sctkg.datasets.cases import MergedCase

logger = logging.getLogger(__name__)

TEMPLATE_VERSION = "v1"
FIELDS = ("input", "output", "instruction")
TEMPLATE_KINDS = ("prompt", "mock")


class BackendError(RuntimeError):
    """Raised when a backend cannot produce text for a field."""


@functools.lru_cache(maxsize=None)
def load_template(field: str, kind: str = "prompt", version: str = TEMPLATE_VERSION) -> str:
    if field not in FIELDS or kind not in TEMPLATE_KINDS:
        raise ValueError(f"No template for field {field!r} of kind {kind!r}.")
    resource = importlib.resources.files("sctkg.datasets") / "templates" / version
    return (resource / f"{field}.{kind}.txt").read_text(encoding="utf-8").rstrip("\n")


def _key(name: str) -> str:
    return name.lower().replace(" ", "_")


def case_context(case: MergedCase) -> dict[str, str]:
    """Template values for a case. Narrative fields are keyed by their condition type in snake
    case (``Chief Complaint`` -> ``chief_complaint``); absent fields format as empty strings."""
    context = {
        "visit_id": str(case.visit_id),
        "gender": case.gender,
        "age": str(case.age),
        "age_unit": case.age_unit,
        "visit_time": case.visit_time,
        "department": case.department,
        "clinic_type": case.clinic_type,
        "record_type": case.record_type,
        "diagnosis_names": case.diagnosis_names,
        "diagnosis_codes": ", ".join(case.diagnosis_codes),
        "chief_complaint": "",
        "history_of_present_illness": "",
        "past_medical_history": "",
        "physical_examination": "",
        "collateral_tests": "",
        "treatment_plan": "",
    }
    for name, value in case.narrative_fields.items():
        context[_key(name)] = value.replace("\n", " ")
    return context


def render_prompt(field: str, case: MergedCase, version: str = TEMPLATE_VERSION) -> str:
    return load_template(field, "prompt", version).format(**case_context(case))


class GenBackend(abc.ABC):
    """Something that turns a prompt into text. ``context`` carries the field being generated
    (``field``) and the source case (``case``); live backends ignore it."""

    name: str = "abstract"

    @abc.abstractmethod
    def generate(self, prompt: str, **context: Any) -> str:
        pass

    def describe(self) -> dict:
        return {"backend": self.name}


class MockBackend(GenBackend):
    """Deterministic offline backend: fills the ``<field>.mock.txt`` template from the case."""

    name = "mock"

    def __init__(self, version: str = TEMPLATE_VERSION):
        self.version = version
        self.calls = 0
        self._lock = threading.Lock()

    def generate(self, prompt: str, **context: Any) -> str:
        field, case = context.get("field"), context.get("case")
        if field is None or case is None:
            raise BackendError("mock backend needs the field and case it is generating for")
        with self._lock:
            self.calls += 1
        return load_template(field, "mock", self.version).format(**case_context(case))

    def describe(self) -> dict:
        return {"backend": self.name, "template_version": self.version}


class _Retryable(Exception):
    pass


class HttpBackend(GenBackend):
    """Generic HTTP text-completion backend.

    Request: ``POST <url>`` with JSON ``{"model": <model>, "prompt": <prompt>}``.
    Response: JSON with the generated text under ``"text"`` (or ``"response"``).
    429 and 5xx answers and connection errors are retried with exponential backoff.
    """

    name = "http"

    def __init__(
        self,
        url: str,
        model: str,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        if max_retries < 0 or max_retries > 10:
            raise ValueError(f"max_retries must be in [0, 10], got {max_retries}")
        self.url = url
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.session = session if session is not None else requests.Session()

    def _post(self, prompt: str) -> str:
        try:
            response = self.session.post(
                self.url, json={"model": self.model, "prompt": prompt}, timeout=self.timeout
            )
        except (requests.ConnectionError, requests.Timeout) as e:
            raise _Retryable(str(e)) from e
        if response.status_code == 429 or response.status_code >= 500:
            raise _Retryable(f"HTTP {response.status_code} from {self.url}")
        if response.status_code != 200:
            detail = response.text[:200]
            raise BackendError(f"HTTP {response.status_code} from {self.url}: {detail}")
        try:
            payload = response.json()
        except ValueError as e:
            raise BackendError(f"non-JSON response from {self.url}") from e
        text = payload.get("text", payload.get("response")) if isinstance(payload, dict) else None
        if not isinstance(text, str):
            raise BackendError(f"response from {self.url} has no 'text' or 'response' string")
        return text

    def generate(self, prompt: str, **context: Any) -> str:
        retrying = Retrying(
            stop=stop_after_attempt(self.max_retries + 1),
            wait=wait_exponential(multiplier=self.backoff_base, max=30),
            retry=retry_if_exception_type(_Retryable),
            before_sleep=lambda state: logger.warning(
                "Backend call failed (attempt %d): %s",
                state.attempt_number,
                state.outcome.exception(),
            ),
        )
        try:
            return retrying(self._post, prompt)
        except RetryError as e:
            raise BackendError(
                f"{self.url} failed after {self.max_retries + 1} attempts: "
                f"{e.last_attempt.exception()}"
            ) from e

    def describe(self) -> dict:
        return {"backend": self.name, "url": self.url, "model": self.model}


def make_backend(
    name: str,
    url: Optional[str] = None,
    model: Optional[str] = None,
    **kwargs: Any,
) -> GenBackend:
    if name == "mock":
        return MockBackend(**kwargs)
    if name == "http":
        if not url or not model:
            raise ValueError("the http backend needs both a url and a model name")
        return HttpBackend(url, model, **kwargs)
    raise ValueError(f"Unknown backend {name!r}. Expected 'mock' or 'http'.")
