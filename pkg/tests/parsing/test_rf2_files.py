import pathlib

import pytest

from sctkg.core.rf2 import ConceptRow, DescriptionRow
from sctkg.parsing.rf2_files import (
    ReleaseRows,
    RF2FormatError,
    discover_release,
    parallel_parse,
    parse_concept_file,
    parse_description_file,
    parse_file,
    parse_line,
    stream_release,
    write_release,
)
from sctkg.testing.synthetic import embedded_rows

CONCEPT_HEADER = "id\teffectiveTime\tactive\tmoduleId\tdefinitionStatusId"
DESCRIPTION_HEADER = (
    "id\teffectiveTime\tactive\tmoduleId\tconceptId\tlanguageCode\ttypeId\tterm\tcaseSignificanceId"
)


def _write(path: pathlib.Path, *lines: str, terminator: str = "\r\n") -> pathlib.Path:
    path.write_text("".join(line + terminator for line in lines), encoding="utf-8")
    return path


def test_parse_concept_file(tmp_path):
    path = _write(
        tmp_path / "sct2_Concept_Snapshot_INT_20240131.txt",
        CONCEPT_HEADER,
        "73211009\t20020131\t1\t900000000000207008\t900000000000074008",
        "138875005\t20020131\t0\t900000000000207008\t900000000000074008",
    )
    rows, report = parse_concept_file(path)
    assert list(rows) == [
        ConceptRow(73211009, 20020131, True, 900000000000207008, 900000000000074008),
        ConceptRow(138875005, 20020131, False, 900000000000207008, 900000000000074008),
    ]
    assert (report.rows_ok, report.rows_skipped, report.ok) == (2, 0, True)


def test_lf_terminators_accepted(tmp_path):
    path = _write(
        tmp_path / "concepts.txt",
        CONCEPT_HEADER,
        "73211009\t20020131\t1\t900000000000207008\t900000000000074008",
        terminator="\n",
    )
    rows, report = parse_file(path, "concept")
    assert len(list(rows)) == 1


def test_bad_lines_are_skipped_with_line_numbers(tmp_path):
    path = _write(
        tmp_path / "concepts.txt",
        CONCEPT_HEADER,
        "73211009\t20020131\t1\t900000000000207008\t900000000000074008",
        "12345\t20020131\t1\t900000000000207008\t900000000000074008",
        "138875005\t20021341\t1\t900000000000207008\t900000000000074008",
        "404684003\t20020131\tyes\t900000000000207008\t900000000000074008",
        "404684003\t20020131\t1\t900000000000207008",
        "404684003\t20020131\t1\t900000000000207008\t900000000000074008",
    )
    rows, report = parse_file(path, "concept")
    assert [r.id for r in rows] == [73211009, 404684003]
    assert report.rows_ok + report.rows_skipped == 6
    assert [e.line_number for e in report.errors] == [3, 4, 5, 6]
    assert report.errors[0].reason.startswith("id:")
    assert "effectiveTime" in report.errors[1].reason
    assert "active" in report.errors[2].reason
    assert "expected 5 fields" in report.errors[3].reason
    assert not report.ok


def test_description_term_kept_verbatim(tmp_path):
    path = _write(
        tmp_path / "descriptions.txt",
        DESCRIPTION_HEADER,
        "121589010\t20020131\t1\t900000000000207008\t73211009\ten\t900000000000013009"
        "\tDM - Diabetes mellitus, type \"2\"\t900000000000448009",
    )
    rows, _ = parse_description_file(path)
    (row,) = list(rows)
    assert isinstance(row, DescriptionRow)
    assert row.term == 'DM - Diabetes mellitus, type "2"'


def test_header_mismatch_fails_eagerly(tmp_path):
    path = _write(tmp_path / "concepts.txt", "id\teffectiveTime\tactive", "73211009\t20020131\t1")
    with pytest.raises(RF2FormatError, match="header mismatch"):
        parse_file(path, "concept")


def test_non_utf8_header(tmp_path):
    path = tmp_path / "concepts.txt"
    path.write_bytes(b"\xff\xfeid\teffectiveTime\r\n")
    with pytest.raises(RF2FormatError, match="UTF-8"):
        parse_file(path, "concept")


def _concepts_then_bad_bytes(path: pathlib.Path) -> pathlib.Path:
    valid = "73211009\t20020131\t1\t900000000000207008\t900000000000074008\r\n" * 400
    path.write_bytes((CONCEPT_HEADER + "\r\n" + valid).encode("utf-8") + b"\xff\xfe bad\r\n")
    return path


def test_non_utf8_past_the_first_chunk_is_a_file_error(tmp_path):
    rows, report = parse_file(_concepts_then_bad_bytes(tmp_path / "concepts.txt"), "concept")
    assert len(list(rows)) <= 400
    assert "not valid UTF-8" in report.file_error
    assert not report.ok


def test_parallel_parse_reports_undecodable_file_and_keeps_going(tmp_path):
    files = write_release(embedded_rows(), tmp_path)
    _concepts_then_bad_bytes(files["concept"])
    parsed = parallel_parse(tmp_path, worker_count=2)
    (broken,) = parsed.file_errors
    assert broken.file == str(files["concept"])
    assert "not valid UTF-8" in broken.file_error
    assert parsed.concepts == []
    assert len(parsed.descriptions) == len(embedded_rows().descriptions)


def test_stream_release_reports_undecodable_file(tmp_path):
    files = write_release(embedded_rows(), tmp_path)
    _concepts_then_bad_bytes(files["concept"])
    reports = []
    kinds = [kind for kind, _ in stream_release(tmp_path, worker_count=2, reports=reports)]
    assert kinds.count("description") == len(embedded_rows().descriptions)
    assert [report.file for report in reports if report.file_error] == [str(files["concept"])]


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        parse_file("/does/not/exist.txt", "concept")


def test_unknown_kind(tmp_path):
    with pytest.raises(ValueError, match="Unknown RF2 file kind"):
        parse_file(tmp_path / "x.txt", "refset")


def test_empty_owl_expression_only_allowed_when_inactive():
    line = (
        "00000000-0000-4000-8000-000000000001\t20240131\t{}\t900000000000207008"
        "\t733073007\t73211009\t"
    )
    assert parse_line("axiom", line.format("0")).owl_expression == ""
    with pytest.raises(ValueError, match="owlExpression"):
        parse_line("axiom", line.format("1"))


def test_discover_release_nested(tmp_path):
    written = write_release(embedded_rows(), tmp_path)
    found = discover_release(tmp_path)
    assert {kind: paths[0] for kind, paths in found.items()} == written


def test_discover_release_missing_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        discover_release(tmp_path / "nope")


def test_write_release_picks_release_kind(tmp_path):
    rows = embedded_rows()
    assert "Snapshot" in write_release(rows, tmp_path / "a")["concept"].parts
    rows.concepts.append(rows.concepts[0])
    assert "Full" in write_release(rows, tmp_path / "b")["concept"].parts
    with pytest.raises(ValueError):
        write_release(rows, tmp_path / "c", release_kind="Delta")


def test_write_release_uses_crlf(tmp_path):
    path = write_release(embedded_rows(), tmp_path)["concept"]
    content = path.read_bytes()
    assert content.count(b"\r\n") == len(embedded_rows().concepts) + 1


def test_parallel_parse_reads_back_what_was_written(tmp_path):
    rows = embedded_rows()
    write_release(rows, tmp_path)
    parsed = parallel_parse(tmp_path, worker_count=2)
    assert parsed.concepts == rows.concepts
    assert parsed.descriptions == rows.descriptions
    assert parsed.relationships == rows.relationships
    assert parsed.axioms == rows.axioms
    assert parsed.file_errors == []


def test_parallel_parse_independent_of_worker_count(synthetic_release):
    one = parallel_parse(synthetic_release.root, worker_count=1)
    many = parallel_parse(synthetic_release.root, worker_count=8)
    for kind in ("concept", "description", "relationship", "axiom"):
        assert one.rows_of(kind) == many.rows_of(kind)


def test_parallel_parse_reports_missing_and_broken_files(tmp_path):
    files = write_release(embedded_rows(), tmp_path)
    files["axiom"].unlink()
    files["relationship"].write_text("not\ta\theader\r\n", encoding="utf-8")
    parsed = parallel_parse(tmp_path, worker_count=2)
    errors = {report.file_error for report in parsed.file_errors}
    assert "missing axiom file" in errors
    assert any("header mismatch" in error for error in errors)
    assert parsed.relationships == []
    assert len(parsed.concepts) == len(embedded_rows().concepts)


def test_parallel_parse_rejects_zero_workers(tmp_path):
    with pytest.raises(ValueError):
        parallel_parse(tmp_path, worker_count=0)


def test_stream_release_yields_every_row(synthetic_release):
    reports = []
    streamed = ReleaseRows()
    stream = stream_release(synthetic_release.root, worker_count=3, queue_size=16, reports=reports)
    for kind, row in stream:
        streamed.rows_of(kind).append(row)
    for kind in ("concept", "description", "relationship", "axiom"):
        assert sorted(map(repr, streamed.rows_of(kind))) == sorted(
            map(repr, synthetic_release.rows.rows_of(kind))
        )
    assert len(reports) == 4


def test_stream_release_can_stop_early(synthetic_release):
    stream = stream_release(synthetic_release.root, worker_count=2, queue_size=4)
    first = [next(stream) for _ in range(10)]
    stream.close()
    assert len(first) == 10
