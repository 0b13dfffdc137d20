import json
import logging
from typing import List, Union

import pydantic

from sctkg.datasets.models import schema_model

logger = logging.getLogger(__name__)

MALFORMED_JSON = "malformed JSON"
NOT_UTF8 = "not valid UTF-8"


def _path(loc: tuple) -> str:
    return ".".join(str(part) for part in loc)


def _message(error: dict) -> str:
    msg = error["msg"]
    # pydantic prefixes messages raised from validators
    return msg[len("Value error, ") :] if msg.startswith("Value error, ") else msg


def violations_from_error(error: pydantic.ValidationError) -> List[str]:
    """Turns a pydantic error into violation strings: unknown keys first, then missing keys,
    then everything else in pydantic's order."""
    unknown, missing, other = [], [], []
    for item in error.errors():
        path = _path(item["loc"])
        if item["type"] == "extra_forbidden":
            unknown.append(f"unknown key {path}")
        elif item["type"] == "missing":
            missing.append(f"missing key {path}")
        elif path:
            other.append(f"{path}: {_message(item)}")
        else:
            other.append(_message(item))
    return unknown + missing + other


def validate_record(raw_json: Union[str, bytes], schema: str) -> List[str]:
    """Checks one serialized record against a locked schema.

    .. code-block:: python

        validate_record('{"input": "...", "output": "...", "instruction": "...", '
                        '"data_源": "2024/11/4 16:00:29"}', "platypus")
        # ["unknown key data_源", "missing key data_source"]

    :param raw_json: The record as JSON text
    :param schema: One of ``platypus``, ``esft_train``, ``esft_val``
    :return: Violations naming the offending key or path; empty when the record is valid
    """
    model = schema_model(schema)
    try:
        json.loads(raw_json)
    except (json.JSONDecodeError, UnicodeDecodeError):
        return [MALFORMED_JSON]
    try:
        # JSON mode: strict models still accept objects for nested models
        model.model_validate_json(raw_json)
    except pydantic.ValidationError as e:
        return violations_from_error(e)
    return []
