import json
import random

import pytest

from sctkg.datasets.models import PROMPT_SUFFIX, USER_PREFIX, record_to_json, schema_model
from sctkg.datasets.validate import MALFORMED_JSON, validate_record

DIALOGUE = "[Patient]Doctor, my throat hurts.\n[Doctor]Since when?\nSummary:"


def _platypus(**changes):
    record = {
        "input": DIALOGUE,
        "output": "Diagnosis: Pharyngitis.",
        "instruction": "Summarize the consultation.",
        "data_source": "2024/11/4 16:00:29",
    }
    record.update(changes)
    return record


def _train(**changes):
    record = {
        "id": 1,
        "dataset": "2024/11/4 16:00:29",
        "messages": [
            {"role": "user", "content": USER_PREFIX + DIALOGUE},
            {"role": "assistant", "content": "Pharyngitis"},
        ],
        "length": 11,
        "expert_tags": ["ent"],
    }
    record.update(changes)
    return record


def _val(**changes):
    record = {
        "idx": 3,
        "prompt": f"User: {USER_PREFIX}[Patient]Hi\n[Doctor]Hello{PROMPT_SUFFIX}",
        "raw_answers": ["Diagnosis: pharyngitis"],
        "answers": ["Pharyngitis"],
        "length": 11,
    }
    record.update(changes)
    return record


def _violations(record, schema):
    return validate_record(json.dumps(record, ensure_ascii=False), schema)


@pytest.mark.parametrize(
    "record,schema",
    [(_platypus(), "platypus"), (_train(), "esft_train"), (_val(), "esft_val")],
    ids=["platypus", "esft_train", "esft_val"],
)
def test_valid_records(record, schema):
    assert _violations(record, schema) == []


def test_renamed_key_is_unknown_and_missing():
    record = _platypus()
    record["data_源"] = record.pop("data_source")
    assert _violations(record, "platypus") == ["unknown key data_源", "missing key data_source"]


def test_text_instead_of_input():
    record = _platypus()
    record["text"] = record.pop("input")
    assert _violations(record, "platypus") == ["unknown key text", "missing key input"]


def test_dialogue_needs_both_roles():
    assert _violations(_platypus(input="[Patient]Hi\nThanks"), "platypus") == [
        "input: dialogue lacks role marker(s) [Doctor]"
    ]


def test_empty_instruction():
    assert _violations(_platypus(instruction="  "), "platypus") == [
        "instruction: must not be empty"
    ]


def test_length_must_match_reply():
    assert _violations(_train(length=12), "esft_train") == [
        "length 12 != character count 11 of the reply"
    ]


def test_length_counts_characters_not_bytes():
    record = _train(
        messages=[
            {"role": "user", "content": "咽痛"},
            {"role": "assistant", "content": "急性咽炎"},
        ],
        length=4,
    )
    assert _violations(record, "esft_train") == []


def test_types_are_strict():
    violations = _violations(_train(length="11"), "esft_train")
    assert len(violations) == 1
    assert violations[0].startswith("length: ")


def test_roles_must_be_one_exchange():
    messages = [{"role": "assistant", "content": "x"}, {"role": "user", "content": "y"}]
    (violation,) = _violations(_train(messages=messages, length=1), "esft_train")
    assert violation.startswith("messages: roles must be")


def test_unknown_role():
    messages = [{"role": "system", "content": "x"}, {"role": "assistant", "content": "y"}]
    (violation,) = _violations(_train(messages=messages, length=1), "esft_train")
    assert violation.startswith("messages.0.role: ")


def test_expert_tags_optional():
    record = _train()
    del record["expert_tags"]
    assert _violations(record, "esft_train") == []


def test_val_prompt_suffix_and_answers():
    (violation,) = _violations(_val(prompt="User: hello"), "esft_val")
    assert violation.startswith("prompt: prompt must end with")
    (violation,) = _violations(_val(raw_answers=[]), "esft_val")
    assert violation.startswith("raw_answers: ")


def test_malformed_json():
    assert validate_record('{"input": ', "platypus") == [MALFORMED_JSON]


def test_unknown_schema():
    with pytest.raises(ValueError):
        validate_record("{}", "alpaca")
    with pytest.raises(ValueError):
        schema_model("alpaca")


def test_record_to_json_keeps_key_order_and_drops_unset_tags():
    record = _train()
    del record["expert_tags"]
    model = schema_model("esft_train").model_validate_json(json.dumps(record))
    assert list(json.loads(record_to_json(model))) == ["id", "dataset", "messages", "length"]
    assert list(json.loads(record_to_json(schema_model("platypus")(**_platypus())))) == [
        "input",
        "output",
        "instruction",
        "data_source",
    ]


WORDS = ["throat", "fever", "咽痛", "cough", "三天", "rash", "x-ray", "痰"]
REQUIRED = {
    "platypus": ["input", "output", "instruction", "data_source"],
    "esft_train": ["id", "dataset", "messages", "length"],
    "esft_val": ["idx", "prompt", "raw_answers", "answers", "length"],
}


def _random_record(rng, schema):
    def text():
        return " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 6)))

    dialogue = f"[Patient]{text()}\n[Doctor]{text()}\nSummary:"
    if schema == "platypus":
        return _platypus(input=dialogue, output=text(), data_source=f"2024/1/{rng.randint(1, 28)}")
    reply = text()
    if schema == "esft_train":
        messages = [
            {"role": "user", "content": USER_PREFIX + dialogue},
            {"role": "assistant", "content": reply},
        ]
        return _train(id=rng.randint(1, 10**6), messages=messages, length=len(reply))
    return _val(idx=rng.randint(1, 10**6), answers=[reply], length=len(reply))


def _flip(value):
    if isinstance(value, str):
        return 7
    if isinstance(value, int):
        return str(value)
    return "flipped"


def _mutants(rng, record, schema):
    key = rng.choice(REQUIRED[schema])
    renamed = dict(record)
    renamed["data_源" if key == "data_source" else f"{key}_源"] = renamed.pop(key)
    deleted = dict(record)
    del deleted[key]
    added = dict(record, text=record.get("input", "extra"))
    flipped = dict(record, **{key: _flip(record[key])})
    mutants = [renamed, deleted, added, flipped]
    if "length" in record:
        mutants.append(dict(record, length=record["length"] + rng.choice([-1, 1])))
    return mutants


@pytest.mark.parametrize("schema", ["platypus", "esft_train", "esft_val"])
def test_mutation_suite(schema):
    rng = random.Random(schema)
    for _ in range(500):
        record = _random_record(rng, schema)
        assert _violations(record, schema) == []
        for mutant in _mutants(rng, record, schema):
            assert _violations(mutant, schema), mutant
