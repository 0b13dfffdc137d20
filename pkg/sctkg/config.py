"""Pipeline configuration.

The config file is INI, one section per block below, e.g.::

    [graph]
    flush_threshold = 1000
    shards = 4

    [path_search]
    max_depth = 3

Values are resolved in this order, first hit wins: command-line flag, environment variable
``SCTKG_<SECTION>_<KEY>`` (e.g. ``SCTKG_GRAPH_SHARDS=4``), config file, default.
"""
import configparser
import logging
import os
from typing import Any, Dict, List, Literal, Mapping, Optional

import pydantic

from sctkg.integrations.snowstorm.client import ServerConfig

logger = logging.getLogger(__name__)

ENV_PREFIX = "SCTKG"


class _Section(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid")


def _int_list(value: Any) -> Any:
    if isinstance(value, str):
        return [int(part) for part in value.replace(",", " ").split()]
    return value


def _str_list(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


class PathsConfig(_Section):
    release_dir: Optional[str] = None
    store_dir: Optional[str] = None
    output_dir: Optional[str] = None


class GraphConfig(_Section):
    flush_threshold: int = pydantic.Field(default=1000, ge=1)
    adaptive_flush: bool = False
    shards: int = pydantic.Field(default=1, ge=1, le=256)
    workers: int = pydantic.Field(default=1, ge=1, le=256)
    retries: int = pydantic.Field(default=3, ge=1, le=10)
    retry_base_delay: float = pydantic.Field(default=0.05, ge=0)
    dedupe_on_insert: bool = True
    fsync: bool = False
    include_axioms: bool = True
    alias_file: Optional[str] = None


class PathSearchConfig(_Section):
    max_depth: int = pydantic.Field(default=4, ge=1, le=16)
    max_paths: int = pydantic.Field(default=3, ge=1, le=1000)
    render_mode: Literal["concepts-only", "with-relations"] = "concepts-only"
    type_filter: Optional[List[int]] = None

    @pydantic.field_validator("type_filter", mode="before")
    @classmethod
    def split_type_filter(cls, value: Any) -> Any:
        return _int_list(value)


class ValidationConfig(_Section):
    max_hops: int = pydantic.Field(default=3, ge=1, le=16)
    strict: bool = False
    eliminate_redundant: bool = False
    pairs_file: Optional[str] = None


class DatasetConfig(_Section):
    schema_name: Literal["platypus", "esft_train", "esft_val"] = pydantic.Field(
        default="platypus", alias="schema"
    )
    backend: Literal["mock", "http"] = "mock"
    backend_url: Optional[str] = None
    backend_model: Optional[str] = None
    backend_retries: int = pydantic.Field(default=3, ge=0, le=10)
    template_version: str = "v1"
    knowledge: bool = False
    expert_tag_file: Optional[str] = None
    workers: int = pydantic.Field(default=1, ge=1, le=64)

    model_config = pydantic.ConfigDict(extra="forbid", populate_by_name=True)


class EvaluationConfig(_Section):
    strategy: Literal["weighted", "vote"] = "weighted"
    w_moe: float = pydantic.Field(default=0.6, ge=0, le=1)
    w_esft: float = pydantic.Field(default=0.4, ge=0, le=1)
    sweep_step: float = pydantic.Field(default=0.1, gt=0, le=1)
    lowercase: bool = False
    metrics: List[str] = ["bleu", "rouge_l", "cosine"]

    @pydantic.field_validator("metrics", mode="before")
    @classmethod
    def split_metrics(cls, value: Any) -> Any:
        return _str_list(value)

    @pydantic.model_validator(mode="after")
    def check_weights(self) -> "EvaluationConfig":
        if abs(self.w_moe + self.w_esft - 1.0) > 1e-9:
            raise ValueError(f"w_moe + w_esft must be 1, got {self.w_moe} + {self.w_esft}")
        return self


class PipelineConfig(_Section):
    paths: PathsConfig = PathsConfig()
    graph: GraphConfig = GraphConfig()
    path_search: PathSearchConfig = PathSearchConfig()
    validation: ValidationConfig = ValidationConfig()
    dataset: DatasetConfig = DatasetConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    snowstorm: ServerConfig = ServerConfig()


SECTIONS = tuple(PipelineConfig.model_fields)


def _read_file(path: str) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as f:
        parser.read_file(f)
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ValueError(f"{path}: unknown config sections {unknown}. Expected {list(SECTIONS)}.")
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _read_env(environ: Mapping[str, str]) -> Dict[str, Dict[str, str]]:
    found: Dict[str, Dict[str, str]] = {}
    for section in SECTIONS:
        prefix = f"{ENV_PREFIX}_{section.upper()}_"
        for key, value in environ.items():
            if key.startswith(prefix):
                found.setdefault(section, {})[key[len(prefix) :].lower()] = value
    return found


def load_config(
    path: Optional[str] = None,
    overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> PipelineConfig:
    """Builds the effective configuration.

    :param path: INI file, optional
    :param overrides: ``{section: {key: value}}`` from command-line flags; None values are ignored
    :param environ: Environment to read ``SCTKG_*`` variables from, ``os.environ`` by default
    :raises ValueError: on unknown sections or keys, or values out of range
    """
    merged: Dict[str, Dict[str, Any]] = {}
    layers = [
        _read_file(path) if path else {},
        _read_env(os.environ if environ is None else environ),
        overrides or {},
    ]
    for layer in layers:
        for section, values in layer.items():
            if section not in SECTIONS:
                raise ValueError(f"Unknown config section {section!r}. Expected {list(SECTIONS)}.")
            merged.setdefault(section, {}).update(
                {key: value for key, value in values.items() if value is not None}
            )
    try:
        return PipelineConfig.model_validate(merged)
    except pydantic.ValidationError as e:
        raise ValueError(f"Invalid configuration: {e}") from e
