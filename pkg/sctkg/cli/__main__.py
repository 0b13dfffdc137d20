import functools
import json
import logging
import os
import pathlib
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from sctkg.integrations.base import require_plugin

try:
    import click
    import requests
    from loguru import logger
except ImportError as e:
    require_plugin(
        e,
        ["click", "requests", "loguru"],
        "cli",
    )

from sctkg import pipeline
from sctkg.common.types import UnknownConceptError
from sctkg.config import PipelineConfig, load_config
from sctkg.core.composite import category_counts
from sctkg.datasets import (
    BackendError,
    ExpertTagMap,
    MergeReport,
    RecordRejected,
    generate_dataset,
    knowledge_from_store,
    load_case_tables,
    make_backend,
    parquet_to_jsonl,
    write_jsonl,
)
from sctkg.evaluation import (
    DiagnosisDistribution,
    FusionConfig,
    evaluate_corpus,
    fuse,
    tokenize,
    weight_sweep,
)
from sctkg.graph import BatchCommitError, StorageFault, export_bulk_csv, validate
from sctkg.integrations.snowstorm.client import SnowstormError, fetch_all, write_fixture
from sctkg.lifecycle import CommitLogger
from sctkg.parsing import OWLParseError, RF2FormatError
from sctkg.parsing.rf2_files import write_release
from sctkg.paths import find_paths, match_seeds

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4
EXIT_BACKEND = 5


class DataError(ValueError):
    """The inputs were readable but their content is unusable."""


class InterceptHandler(logging.Handler):
    """Routes standard logging records into loguru."""

    def emit(self, record: logging.LogRecord):
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno
        frame, depth = logging.currentframe(), 2
        while frame is not None and frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1
        logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())


def _setup_logging(level: str):
    logger.remove()
    logger.add(sys.stderr, level=level.upper())
    logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, click.UsageError):
        return EXIT_USAGE
    if isinstance(error, (SnowstormError, BackendError, requests.RequestException)):
        return EXIT_BACKEND
    if isinstance(error, (BatchCommitError, StorageFault)):
        return EXIT_IO
    if isinstance(error, (RF2FormatError, OWLParseError, RecordRejected, UnknownConceptError)):
        return EXIT_DATA
    if isinstance(error, OSError):
        return EXIT_IO
    if isinstance(error, (ValueError, LookupError)):
        return EXIT_DATA
    return 1


def _emit_error(error: BaseException, exit_code: int):
    click.echo(
        json.dumps(
            {"error": type(error).__name__, "message": str(error), "exit_code": exit_code},
            ensure_ascii=False,
        ),
        err=True,
    )


class _PipelineGroup(click.Group):
    """Turns every failure into one JSON line on stderr and an exit code from the table in
    :py:func:`exit_code_for`."""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            result = super().main(*args, **kwargs)
        except click.exceptions.Exit as e:
            sys.exit(e.exit_code)
        except click.Abort:
            _emit_error(KeyboardInterrupt("aborted"), 1)
            sys.exit(1)
        except Exception as e:
            code = exit_code_for(e)
            if code == 1:
                logger.opt(exception=e).error("Unexpected failure")
            _emit_error(e, code)
            sys.exit(code)
        sys.exit(result if isinstance(result, int) else EXIT_OK)


def _write_json(data: Any, out: Optional[str]):
    text = json.dumps(data, indent=2, ensure_ascii=False, sort_keys=False)
    if out:
        pathlib.Path(out).write_text(text + "\n", encoding="utf-8")
        logger.info("Wrote {}", out)
    else:
        click.echo(text)


def _config(ctx: click.Context, config_path: Optional[str], **overrides) -> PipelineConfig:
    """Loads the config named on the subcommand, else on the group, with flag overrides given as
    ``section__key=value``."""
    # ctx.obj is unset when a command runs as its own script
    path = config_path or (ctx.obj or {}).get("config_path")
    sections: Dict[str, Dict[str, Any]] = {}
    for name, value in overrides.items():
        section, key = name.split("__")
        sections.setdefault(section, {})[key] = value
    try:
        return load_config(path, sections)
    except (ValueError, OSError) as e:
        raise click.UsageError(f"invalid configuration: {e}") from e


def config_option(fn: Callable) -> Callable:
    return click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False),
        default=None,
        help="INI config file; overrides the one given before the subcommand.",
    )(fn)


def _require(value: Optional[str], flag: str, section: str, key: str) -> str:
    if not value:
        raise click.UsageError(f"{flag} is required (or set [{section}] {key} in the config)")
    return value


def _graph(
    config: PipelineConfig, store_dir: Optional[str], release_dir: Optional[str]
) -> "pipeline.GraphStore":
    """Replays a stored graph, or builds one in memory from a release when no store is given."""
    store_dir = store_dir or config.paths.store_dir
    release_dir = release_dir or config.paths.release_dir
    if store_dir:
        return pipeline.open_store(store_dir, config.graph)
    if release_dir:
        ingested = pipeline.ingest_release(
            release_dir, workers=config.graph.workers, include_axioms=config.graph.include_axioms
        )
        store, _ = pipeline.build_graph(ingested.composites, config.graph)
        return store
    raise click.UsageError("either --store or --release is required")


@click.group(cls=_PipelineGroup)
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="INI config file. Environment variables SCTKG_<SECTION>_<KEY> override it.",
)
@click.option(
    "--log-level",
    default="INFO",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    help="Logs go to stderr.",
)
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], log_level: str):
    """SNOMED CT release to knowledge graph to instruction datasets."""
    _setup_logging(log_level)
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@cli.command(help="Parse a release and report what resolves into composites.")
@config_option
@click.option("--release", "release_dir", default=None, help="Release directory")
@click.option("--workers", type=int, default=None, help="Parsing threads")
@click.option("--no-axioms", is_flag=True, help="Ignore the OWL axiom refset")
@click.option("--out", default=None, help="Write the summary here instead of stdout")
@click.pass_context
def ingest(ctx, config_path, release_dir, workers, no_axioms, out):
    config = _config(
        ctx,
        config_path,
        paths__release_dir=release_dir,
        graph__workers=workers,
        graph__include_axioms=False if no_axioms else None,
    )
    release_dir = _require(config.paths.release_dir, "--release", "paths", "release_dir")
    ingested = pipeline.ingest_release(
        release_dir, workers=config.graph.workers, include_axioms=config.graph.include_axioms
    )
    _write_json(ingested.summary(), out)


def _read_ids(ids: Optional[str], ids_file: Optional[str]) -> List[int]:
    raw: List[str] = []
    if ids:
        raw.extend(part for part in ids.replace(",", " ").split())
    if ids_file:
        with open(ids_file, encoding="utf-8") as f:
            raw.extend(line.strip() for line in f if line.strip())
    if not raw:
        raise click.UsageError("give concept ids with --ids or --ids-file")
    try:
        return [int(value) for value in raw]
    except ValueError as e:
        raise click.BadParameter(f"concept ids must be integers: {e}") from e


@cli.command(help="Fetch concepts from a terminology server into an RF2 release directory.")
@config_option
@click.option("--ids", default=None, help="Comma-separated concept ids")
@click.option("--ids-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", "out_dir", required=True, help="Release directory to write")
@click.option("--base-url", default=None, help="Server base URL")
@click.option("--branch", default=None, help="Terminology branch, e.g. MAIN")
@click.option("--concurrency", type=int, default=1, show_default=True)
@click.option("--checkpoint", default=None, help="File of completed ids for resuming")
@click.pass_context
def fetch(ctx, config_path, ids, ids_file, out_dir, base_url, branch, concurrency, checkpoint):
    config = _config(ctx, config_path, snowstorm__base_url=base_url, snowstorm__branch=branch)
    wanted = _read_ids(ids, ids_file)
    rows, report = fetch_all(
        config.snowstorm, wanted, concurrency=concurrency, checkpoint=checkpoint
    )
    write_release(rows, out_dir)
    _write_json(report.to_dict(), None)
    if report.failed:
        raise SnowstormError(
            f"{len(report.failed)} of {report.requested} concepts were not fetched"
        )


@cli.command(name="build-graph", help="Build the graph store from a release.")
@config_option
@click.option("--release", "release_dir", default=None, help="Release directory")
@click.option("--store", "store_dir", default=None, help="Directory for the graph journal")
@click.option("--flush-threshold", type=int, default=None, help="Buffered records per flush")
@click.option("--adaptive-flush", is_flag=True, help="Adjust the threshold")
@click.option("--shards", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--retries", type=int, default=None, help="Commit attempts per batch")
@click.option("--alias-file", default=None, help="JSON map of type id to alias")
@click.option("--export", "export_dir", default=None, help="Also write bulk-import CSV here")
@click.option("--commit-log", default=None, help="JSONL file of batch outcomes")
@click.pass_context
def build_graph(
    ctx,
    config_path,
    release_dir,
    store_dir,
    flush_threshold,
    adaptive_flush,
    shards,
    workers,
    retries,
    alias_file,
    export_dir,
    commit_log,
):
    config = _config(
        ctx,
        config_path,
        paths__release_dir=release_dir,
        paths__store_dir=store_dir,
        graph__flush_threshold=flush_threshold,
        graph__adaptive_flush=adaptive_flush or None,
        graph__shards=shards,
        graph__workers=workers,
        graph__retries=retries,
        graph__alias_file=alias_file,
    )
    release_dir = _require(config.paths.release_dir, "--release", "paths", "release_dir")
    ingested = pipeline.ingest_release(
        release_dir, workers=config.graph.workers, include_axioms=config.graph.include_axioms
    )
    hooks = [CommitLogger(commit_log, mode="w")] if commit_log else []
    try:
        store, report = pipeline.build_graph(
            ingested.composites, config.graph, store_dir=config.paths.store_dir, hooks=hooks
        )
    finally:
        for hook in hooks:
            hook.close()
    if export_dir:
        export_bulk_csv(store, export_dir)
    store.close()
    _write_json(
        {
            "ingest": ingested.summary(),
            "commit": {
                "batches_committed": report.batches_committed,
                "batches_retried": report.batches_retried,
                "batches_failed": report.batches_failed,
                "nodes_written": report.nodes_written,
                "edges_written": report.edges_written,
            },
            "graph": {"nodes": store.node_count, "edges": store.edge_count},
            "stats": store.stats().to_dict(),
        },
        None,
    )


def _read_pairs(path: str) -> List[Tuple[int, int]]:
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, list) or not all(
        isinstance(pair, list) and len(pair) == 2 for pair in raw
    ):
        raise DataError(f"{path}: expected a JSON list of [source_id, destination_id] pairs")
    return [(int(source), int(destination)) for source, destination in raw]


@cli.command(name="validate", help="Check id consistency, redundant triples and reachability.")
@config_option
@click.option("--store", "store_dir", default=None)
@click.option("--release", "release_dir", default=None, help="Build in memory from a release")
@click.option("--pairs", "pairs_file", default=None, help="JSON list of concept id pairs")
@click.option("--max-hops", type=int, default=None)
@click.option("--strict", is_flag=True, help="Also flag unknown relation types")
@click.option("--eliminate-redundant", is_flag=True)
@click.option("--out", default=None)
@click.pass_context
def validate_command(
    ctx, config_path, store_dir, release_dir, pairs_file, max_hops, strict, eliminate_redundant, out
):
    config = _config(
        ctx,
        config_path,
        validation__max_hops=max_hops,
        validation__strict=strict or None,
        validation__eliminate_redundant=eliminate_redundant or None,
        validation__pairs_file=pairs_file,
    )
    store = _graph(config, store_dir, release_dir)
    pairs = _read_pairs(config.validation.pairs_file) if config.validation.pairs_file else []
    report = validate(
        store,
        pairs=pairs,
        max_hops=config.validation.max_hops,
        strict=config.validation.strict,
        eliminate=config.validation.eliminate_redundant,
        aliases=pipeline.load_aliases(config.graph),
    )
    store.close()
    _write_json(report.to_dict(), out)
    # eliminated duplicates are fixed, not failures
    unresolved = report.id_inconsistencies or report.unreachable_pairs or (
        report.redundant_edges and not config.validation.eliminate_redundant
    )
    if unresolved:
        raise DataError(
            f"graph validation failed: {len(report.id_inconsistencies)} id inconsistencies, "
            f"{len(report.redundant_edges)} redundant edges, "
            f"{len(report.unreachable_pairs)} unreachable pairs"
        )


@cli.command(name="query-path", help="Multi-hop paths from the concepts named in a text.")
@config_option
@click.option("--seed", "seed_text", default=None, help="Text to match seed concepts in")
@click.option("--seed-id", "seed_ids", type=int, multiple=True, help="Seed concept id")
@click.option("--store", "store_dir", default=None)
@click.option("--release", "release_dir", default=None, help="Build in memory from a release")
@click.option("--max-depth", type=int, default=None)
@click.option("--max-paths", type=int, default=None)
@click.option("--mode", type=click.Choice(["concepts-only", "with-relations"]), default=None)
@click.option("--type-filter", default=None, help="Comma-separated relation type ids")
@click.pass_context
def query_path(
    ctx,
    config_path,
    seed_text,
    seed_ids,
    store_dir,
    release_dir,
    max_depth,
    max_paths,
    mode,
    type_filter,
):
    config = _config(
        ctx,
        config_path,
        path_search__max_depth=max_depth,
        path_search__max_paths=max_paths,
        path_search__render_mode=mode,
        path_search__type_filter=type_filter,
    )
    if not seed_text and not seed_ids:
        raise click.UsageError("give --seed text or at least one --seed-id")
    store = _graph(config, store_dir, release_dir)
    seeds = [{"text": None, "concept_id": cid} for cid in seed_ids]
    if seed_text:
        seeds.extend(
            {"text": span, "concept_id": cid} for span, cid in match_seeds(store, seed_text)
        )
    if not seeds:
        raise DataError(f"no concept in the graph matches {seed_text!r}")
    options = config.path_search
    paths = find_paths(
        store,
        [seed["concept_id"] for seed in seeds],
        type_filter=options.type_filter,
        max_depth=options.max_depth,
        max_paths=options.max_paths,
        aliases=pipeline.load_aliases(config.graph),
    )
    store.close()
    _write_json(
        {
            "seeds": seeds,
            "mode": options.render_mode,
            "paths": [path.to_dict(options.render_mode) for path in paths],
        },
        None,
    )


@cli.command(name="gen-dataset", help="Generate an instruction dataset from outpatient cases.")
@config_option
@click.option("--diagnoses", "diagnosis_path", required=True, help="Diagnosis table (csv/tsv)")
@click.option("--records", "record_path", required=True, help="Medical record table (csv/tsv)")
@click.option("--out", required=True, help="JSONL file to write")
@click.option(
    "--schema", type=click.Choice(["platypus", "esft_train", "esft_val"]), default=None
)
@click.option("--backend", type=click.Choice(["mock", "http"]), default=None)
@click.option("--backend-url", default=None)
@click.option("--backend-model", default=None)
@click.option("--knowledge", is_flag=True, help="Inject graph paths")
@click.option("--store", "store_dir", default=None, help="Graph to draw knowledge from")
@click.option("--release", "release_dir", default=None, help="Build the graph in memory")
@click.option("--expert-tags", "expert_tag_file", default=None, help="JSON clinic type -> tags")
@click.option("--workers", type=int, default=None)
@click.pass_context
def gen_dataset(
    ctx,
    config_path,
    diagnosis_path,
    record_path,
    out,
    schema,
    backend,
    backend_url,
    backend_model,
    knowledge,
    store_dir,
    release_dir,
    expert_tag_file,
    workers,
):
    config = _config(
        ctx,
        config_path,
        dataset__schema=schema,
        dataset__backend=backend,
        dataset__backend_url=backend_url,
        dataset__backend_model=backend_model,
        dataset__knowledge=knowledge or None,
        dataset__expert_tag_file=expert_tag_file,
        dataset__workers=workers,
    )
    options = config.dataset
    merge_report = MergeReport()
    cases = load_case_tables(diagnosis_path, record_path, merge_report)
    if not cases:
        raise DataError("no case could be assembled from the two tables")
    if options.backend == "mock":
        generator = make_backend("mock", version=options.template_version)
    else:
        generator = make_backend(
            "http",
            options.backend_url,
            options.backend_model,
            max_retries=options.backend_retries,
        )
    source = None
    if options.knowledge:
        store = _graph(config, store_dir, release_dir)
        source = knowledge_from_store(
            store,
            max_paths=config.path_search.max_paths,
            max_depth=config.path_search.max_depth,
            aliases=pipeline.load_aliases(config.graph),
        )
    expert_tags = (
        ExpertTagMap.from_file(options.expert_tag_file) if options.expert_tag_file else None
    )
    result = generate_dataset(
        cases,
        generator,
        schema=options.schema_name,
        knowledge=source,
        expert_tags=expert_tags,
        render_mode=config.path_search.render_mode,
        workers=options.workers,
    )
    written = write_jsonl(result.records, out)
    _write_json(
        {
            "schema": options.schema_name,
            "backend": generator.describe(),
            "cases": len(cases),
            "written": written,
            "failures": [{"visit_id": vid, "error": error} for vid, error in result.failures],
            "merge": {
                "orphan_records": merge_report.orphan_records,
                "orphan_diagnoses": merge_report.orphan_diagnoses,
                "errors": [
                    {"line": error.line_number, "reason": error.reason}
                    for error in merge_report.errors
                ],
            },
        },
        None,
    )
    if not written:
        raise DataError(f"all {len(result.failures)} records failed generation")


@cli.command(help="Convert a parquet (or csv/tsv) dataset to JSONL.")
@config_option
@click.option("--in", "source", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True)
@click.option(
    "--schema",
    type=click.Choice(["platypus", "esft_train", "esft_val"]),
    default=None,
    help="Validate rows against this schema and drop the failures",
)
@click.pass_context
def convert(ctx, config_path, source, out, schema):
    _config(ctx, config_path)
    report = parquet_to_jsonl(source, out, schema=schema)
    _write_json(
        {
            "rows_read": report.rows_read,
            "rows_written": report.rows_written,
            "rejected": [{"row": row, "violations": v} for row, v in report.rejected],
        },
        None,
    )


def record_text(record: dict) -> str:
    """The generated text of a dataset record in any of the three schemas, or a plain
    ``{"text": ...}`` record."""
    if "output" in record:
        return record["output"]
    if "messages" in record:
        return record["messages"][-1]["content"]
    if "answers" in record:
        return record["answers"][0]
    if "text" in record:
        return record["text"]
    raise DataError(f"record has none of output, messages, answers, text: {sorted(record)}")


def _read_texts(path: str) -> Dict[str, str]:
    texts = {}
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{line_number}: malformed JSON ({e})") from e
            key = str(record.get("id", record.get("idx", line_number)))
            texts[key] = record_text(record)
    return texts


METRIC_PREFIXES = {"bleu": "bleu_", "rouge_l": "rouge_l_", "cosine": "cosine"}


def _select_metrics(scores: dict, metrics: Sequence[str]) -> dict:
    prefixes = tuple(METRIC_PREFIXES[m] for m in metrics)
    return {key: value for key, value in scores.items() if key == "id" or key.startswith(prefixes)}


@cli.command(help="Score candidate texts against references (BLEU, ROUGE-L, cosine).")
@config_option
@click.option("--candidates", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--references", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--lowercase", is_flag=True)
@click.option("--metrics", default=None, help="Comma-separated subset of bleu,rouge_l,cosine")
@click.option("--out", default=None)
@click.pass_context
def evaluate(ctx, config_path, candidates, references, lowercase, metrics, out):
    config = _config(
        ctx, config_path, evaluation__lowercase=lowercase or None, evaluation__metrics=metrics
    )
    unknown = [m for m in config.evaluation.metrics if m not in METRIC_PREFIXES]
    if unknown:
        raise click.BadParameter(f"unknown metrics {unknown}; expected {sorted(METRIC_PREFIXES)}")
    candidate_texts, reference_texts = _read_texts(candidates), _read_texts(references)
    missing = sorted(set(candidate_texts) - set(reference_texts))
    if missing:
        raise DataError(f"{len(missing)} candidates have no reference, e.g. id {missing[0]}")
    pairs = [(key, text, reference_texts[key]) for key, text in candidate_texts.items()]
    tokenizer = functools.partial(tokenize, lowercase=config.evaluation.lowercase)
    result = evaluate_corpus(pairs, tokenizer=tokenizer)
    selected = config.evaluation.metrics
    result["records"] = [_select_metrics(r, selected) for r in result["records"]]
    result["corpus"] = _select_metrics(result["corpus"], selected)
    _write_json(result, out)


def _distribution(value: str) -> DiagnosisDistribution:
    """A JSON object of label -> probability, inline or in a file."""
    if os.path.isfile(value):
        text = pathlib.Path(value).read_text(encoding="utf-8")
    else:
        text = value
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise click.BadParameter(f"not a JSON object or a file holding one: {value!r}") from e
    if not isinstance(raw, dict):
        raise click.BadParameter(f"expected a JSON object of label -> probability: {value!r}")
    return DiagnosisDistribution({str(k): float(v) for k, v in raw.items()})


@cli.command(name="fuse", help="Fuse the diagnosis distributions of the MoE and ESFT models.")
@config_option
@click.option("--moe", required=True, help="Distribution JSON, inline or a file")
@click.option("--esft", required=True, help="Distribution JSON, inline or a file")
@click.option("--strategy", type=click.Choice(["weighted", "vote"]), default=None)
@click.option("--w-moe", type=float, default=None)
@click.option("--w-esft", type=float, default=None)
@click.option("--sweep", is_flag=True, help="Fuse across w_moe = 0, step, ..., 1 instead")
@click.option("--step", type=float, default=None, help="Sweep step")
@click.pass_context
def fuse_command(ctx, config_path, moe, esft, strategy, w_moe, w_esft, sweep, step):
    if (w_moe is None) != (w_esft is None):
        if w_moe is not None:
            w_esft = round(1.0 - w_moe, 12)
        else:
            w_moe = round(1.0 - w_esft, 12)
    config = _config(
        ctx,
        config_path,
        evaluation__strategy=strategy,
        evaluation__w_moe=w_moe,
        evaluation__w_esft=w_esft,
        evaluation__sweep_step=step,
    )
    p_moe, p_esft = _distribution(moe), _distribution(esft)
    options = config.evaluation
    if sweep:
        _write_json({"sweep": weight_sweep(p_moe, p_esft, step=options.sweep_step)}, None)
        return
    result = fuse(p_moe, p_esft, FusionConfig(options.strategy, options.w_moe, options.w_esft))
    _write_json(result.to_dict(), None)


@cli.command(help="Category and relation type distributions of a graph or a release.")
@config_option
@click.option("--store", "store_dir", default=None)
@click.option("--release", "release_dir", default=None)
@click.option("--out", default=None)
@click.pass_context
def stats(ctx, config_path, store_dir, release_dir, out):
    config = _config(ctx, config_path)
    result: Dict[str, Any] = {}
    release_dir = release_dir or config.paths.release_dir
    if release_dir and not (store_dir or config.paths.store_dir):
        ingested = pipeline.ingest_release(
            release_dir, workers=config.graph.workers, include_axioms=config.graph.include_axioms
        )
        counts = category_counts(ingested.rows.concepts, ingested.rows.descriptions)
        result["release"] = {
            category: {
                "raw_rows": count.raw_rows,
                "distinct_ids": count.distinct_ids,
                "active": count.active,
            }
            for category, count in sorted(counts.items())
        }
        store, _ = pipeline.build_graph(ingested.composites, config.graph)
    else:
        store = _graph(config, store_dir, release_dir)
    result["graph"] = {"nodes": store.node_count, "edges": store.edge_count}
    result.update(store.stats().to_dict())
    store.close()
    _write_json(result, out)


@cli.command(name="gen-fixture", help="Write a synthetic RF2 release for tests and demos.")
@config_option
@click.option("--out", "out_dir", default=None, help="Release directory to write")
@click.option("--concepts", type=int, default=1000, show_default=True, help="Filler concepts")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--history", is_flag=True, help="Also write superseded row versions")
@click.option("--retired", type=float, default=0.0, help="Fraction of retired filler concepts")
@click.option("--cases", "case_dir", default=None, help="Also write outpatient case tables here")
@click.option("--case-count", type=int, default=20, show_default=True)
@click.option("--server-fixture", default=None, help="Also write stub server bundles here")
@click.pass_context
def gen_fixture(
    ctx,
    config_path,
    out_dir,
    concepts,
    seed,
    history,
    retired,
    case_dir,
    case_count,
    server_fixture,
):
    from sctkg.testing.synthetic import generate_release, write_case_tables

    config = _config(ctx, config_path)
    out_dir = _require(out_dir or config.paths.release_dir, "--out", "paths", "release_dir")
    release = generate_release(
        out_dir, concepts=concepts, seed=seed, history=history, retired=retired
    )
    result = release.summary()
    if case_dir:
        diagnosis_path, record_path = write_case_tables(case_dir, case_count, seed)
        result["cases"] = {"diagnoses": str(diagnosis_path), "records": str(record_path)}
    if server_fixture:
        result["server_fixture"] = {
            "directory": server_fixture,
            "bundles": len(write_fixture(release.rows, server_fixture)),
        }
    _write_json(result, None)


# quick trick to expose every subcommand as a variable
# will create a command called `cli_{command}` for every command we have
for key, command in cli.commands.items():
    globals()[f'cli_{key.replace("-", "_")}'] = command

if __name__ == "__main__":
    cli()
