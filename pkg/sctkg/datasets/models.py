"""The three locked dataset schemas. Key names are part of the format; models forbid extra keys
and are strict about value types."""
from typing import List, Literal, Optional

import pydantic

PROMPT_SUFFIX = "\nSummary:\n\nAssistant:"
SUMMARY_CUE = "\nSummary:"
USER_PREFIX = "Summary of the Doctor-Patient Dialogue: "
PATIENT_MARKER = "[Patient]"
DOCTOR_MARKER = "[Doctor]"
KNOWLEDGE_MARKER = "[Knowledge]"

_LOCKED = pydantic.ConfigDict(extra="forbid", strict=True)


def char_count(text: str) -> int:
    """Length fields count Unicode scalar values, which is what ``len`` of a str gives."""
    return len(text)


class PlatypusRecord(pydantic.BaseModel):
    """Open-Platypus instruction record."""

    model_config = _LOCKED

    input: str
    output: str
    instruction: str
    data_source: str

    @pydantic.field_validator("input")
    @classmethod
    def check_dialogue_markers(cls, value: str) -> str:
        missing = [m for m in (PATIENT_MARKER, DOCTOR_MARKER) if m not in value]
        if missing:
            raise ValueError(f"dialogue lacks role marker(s) {', '.join(missing)}")
        if "\n" not in value:
            raise ValueError("dialogue has no turn separators")
        return value

    @pydantic.field_validator("output", "instruction", "data_source")
    @classmethod
    def check_non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("must not be empty")
        return value


class Message(pydantic.BaseModel):
    model_config = _LOCKED

    role: Literal["user", "assistant"]
    content: str


class EsftTrainRecord(pydantic.BaseModel):
    model_config = _LOCKED

    id: int
    dataset: str
    messages: List[Message]
    length: int
    expert_tags: Optional[List[str]] = None

    @pydantic.field_validator("messages")
    @classmethod
    def check_one_exchange(cls, value: List[Message]) -> List[Message]:
        roles = [m.role for m in value]
        if roles != ["user", "assistant"]:
            raise ValueError(f"roles must be ['user', 'assistant'], got {roles}")
        return value

    @pydantic.model_validator(mode="after")
    def check_length(self) -> "EsftTrainRecord":
        expected = char_count(self.messages[1].content)
        if self.length != expected:
            raise ValueError(f"length {self.length} != character count {expected} of the reply")
        return self


class EsftValRecord(pydantic.BaseModel):
    model_config = _LOCKED

    idx: int
    prompt: str
    raw_answers: List[str] = pydantic.Field(min_length=1)
    answers: List[str] = pydantic.Field(min_length=1)
    length: int

    @pydantic.field_validator("prompt")
    @classmethod
    def check_prompt_suffix(cls, value: str) -> str:
        if not value.endswith(PROMPT_SUFFIX):
            raise ValueError(f"prompt must end with {PROMPT_SUFFIX!r}")
        return value

    @pydantic.model_validator(mode="after")
    def check_length(self) -> "EsftValRecord":
        expected = char_count(self.answers[0])
        if self.length != expected:
            raise ValueError(f"length {self.length} != character count {expected} of the answer")
        return self


SCHEMAS = {
    "platypus": PlatypusRecord,
    "esft_train": EsftTrainRecord,
    "esft_val": EsftValRecord,
}
DatasetRecord = pydantic.BaseModel


def schema_model(schema: str) -> type[pydantic.BaseModel]:
    if schema not in SCHEMAS:
        raise ValueError(f"Unknown schema {schema!r}. Expected one of {sorted(SCHEMAS)}.")
    return SCHEMAS[schema]


def record_to_json(record: pydantic.BaseModel) -> str:
    """One-line JSON in schema key order. Unset optional keys are left out."""
    return record.model_dump_json(exclude_none=True)
