from __future__ import annotations

import copy
import json
import multiprocessing
import threading
import warnings

import pytest
import yaml
from _records import any_record
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from personagen.errors import ColumnNotFound, MalformedRecord, ParseError, ValidationError
from personagen.labels import GENERATION_EMOTIONS
from personagen.persona import ProbabilityNormalizationWarning
from personagen.store import (
    GoldenIngestSpec,
    GoldenRecord,
    append_records,
    config_from_dict,
    decode,
    default_config_text,
    encode,
    ingest_golden,
    load_config,
    read_records,
    read_report,
    write_records,
    write_report,
    write_table,
)
from personagen.store.config import parse_yaml


@pytest.fixture
def raw_config():
    return yaml.safe_load(default_config_text())


# --- configuration -------------------------------------------------------------


def test_default_config_loads_cleanly():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cfg = load_config()
    assert cfg.emotion_set == GENERATION_EMOTIONS
    assert cfg.samples_per_emotion == 500
    assert cfg.backend == "mock"
    assert len(cfg.persona.rules.blocked_pairs) == 19


def test_load_from_file(tmp_path, raw_config):
    raw_config["seed"] = 9
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(raw_config), encoding="utf-8")
    cfg = load_config(path)
    assert cfg.seed == 9 and cfg.source == str(path)


def test_unnormalized_distribution_warns(raw_config):
    raw_config["persona"]["base"]["gender"] = {"Male": 0.45, "Female": 0.45}
    with pytest.warns(ProbabilityNormalizationWarning):
        cfg = config_from_dict(raw_config)
    assert cfg.persona.base["gender"].probability("Male") == pytest.approx(0.5)


def test_bad_condition_key_named(raw_config):
    raw_config["persona"]["background"]["income"]["condition_key"] = "shoe_size"
    with pytest.raises(ValidationError) as info:
        config_from_dict(raw_config)
    assert "shoe_size" in str(info.value)


def test_problems_are_aggregated(raw_config):
    raw_config["seed"] = "abc"
    raw_config["metrics"]["k_bins"] = 0
    raw_config["surprise_key"] = 1
    raw_config["persona"]["rules"]["blocked"].append({"age": "Toddlers", "occupation": "Lawyer"})
    with pytest.raises(ValidationError) as info:
        config_from_dict(raw_config)
    assert len(info.value.problems) >= 4
    text = str(info.value)
    for fragment in ("seed", "k_bins", "surprise_key", "Toddlers"):
        assert fragment in text


def test_label_map_target_outside_golden_set(raw_config):
    raw_config["golden"]["label_map"] = {"happy": "ecstasy"}
    with pytest.raises(ValidationError, match="ecstasy"):
        config_from_dict(raw_config)


def test_yaml_syntax_error_reports_line():
    with pytest.raises(ParseError) as info:
        parse_yaml("seed: 1\nllm:\n  base_url: [unclosed\nmetrics: {}\n", "broken.yaml")
    assert info.value.line is not None and info.value.line >= 3
    assert "broken.yaml" in str(info.value)


# --- record files ----------------------------------------------------------------


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(any_record)
def test_encode_decode_round_trip(record):
    kind = record.to_dict()["kind"]
    back = decode(encode(record), kind)
    assert back == record
    assert encode(back) == encode(record)


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
@given(st.lists(any_record, min_size=1, max_size=30, unique_by=lambda r: r.id))
def test_file_round_trip(tmp_path, records):
    path = tmp_path / "records.jsonl"
    write_records(path, records)
    decoded = [decode(json.dumps(d), d["kind"]) for d in read_records(path).records]
    assert decoded == records


def _golden(i):
    return GoldenRecord(f"g{i}", f"text {i}", "joy", "joy")


def test_corrupted_line_skipped_and_reported(tmp_path):
    path = tmp_path / "g.jsonl"
    write_records(path, [_golden(i) for i in range(100)])
    lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    lines[0] = lines[0][: len(lines[0]) // 2] + "\n"
    path.write_text("".join(lines), encoding="utf-8")
    result = read_records(path, "golden")
    assert len(result.records) == 99
    assert [n for n, _ in result.malformed] == [1]
    with pytest.raises(MalformedRecord) as info:
        read_records(path, "golden", strict=True)
    assert info.value.line_no == 1


def test_duplicate_ids_and_wrong_kind(tmp_path):
    path = tmp_path / "d.jsonl"
    write_records(path, [_golden(1), _golden(1)])
    assert len(read_records(path).malformed) == 1
    with pytest.raises(MalformedRecord):
        read_records(path, "persona", strict=True)


def test_blank_lines_ignored(tmp_path):
    path = tmp_path / "b.jsonl"
    path.write_text("\n" + encode(_golden(0)) + "\n\n", encoding="utf-8")
    result = read_records(path)
    assert len(result) == 1 and not result.malformed


def test_output_is_canonical(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    rec = GoldenRecord("x", "héllo", "joy", "joy", {"zeta": 1, "alpha": 2})
    write_records(a, [rec])
    write_records(b, [copy.deepcopy(rec)])
    assert a.read_bytes() == b.read_bytes()
    assert "héllo" in a.read_text(encoding="utf-8")


def _append_worker(path, start):
    append_records(path, [_golden(i) for i in range(start, start + 200)])


def test_concurrent_appends_from_processes(tmp_path):
    path = str(tmp_path / "shared.jsonl")
    ctx = multiprocessing.get_context("spawn")
    procs = [ctx.Process(target=_append_worker, args=(path, k * 1000)) for k in range(4)]
    for p in procs:
        p.start()
    for p in procs:
        p.join(60)
        assert p.exitcode == 0
    result = read_records(path, "golden", strict=True)
    assert len(result) == 800


def test_concurrent_appends_from_threads(tmp_path):
    path = tmp_path / "threads.jsonl"
    threads = [threading.Thread(target=_append_worker, args=(path, k * 1000)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(read_records(path, "golden", strict=True)) == 1600


# --- golden ingestion -----------------------------------------------------------


def _csv(tmp_path, text, name="golden.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_ingest_three_rows(tmp_path):
    path = _csv(tmp_path, "text,label\nI won!,joy\nGo away,anger\nby myself again,sadness\n")
    records, summary = ingest_golden(GoldenIngestSpec(path))
    assert [r.label for r in records] == ["joy", "anger", "sadness"]
    assert summary.to_dict() == {"rows_in": 3, "records_out": 3, "skipped": 0, "skipped_labels": {}}


def test_unmapped_label_skipped_and_counted(tmp_path):
    path = _csv(tmp_path, "text,label\nugh,disgust\nyay,happy\nwow,surprise\n")
    spec = GoldenIngestSpec(path, label_map={"happy": "joy", "surprise": "surprise"})
    records, summary = ingest_golden(spec)
    assert [(r.label, r.source_label) for r in records] == [("joy", "happy"), ("surprise", "surprise")]
    assert summary.skipped_labels == {"disgust": 1}


def test_delimiter_equivalence(tmp_path):
    body = [("quoted, text", "joy"), ("plain", "fear")]
    comma = _csv(tmp_path, "text,label\n" + "".join(f'"{t}",{l}\n' for t, l in body), "c.csv")
    semi = _csv(tmp_path, "text;label\n" + "".join(f"{t};{l}\n" for t, l in body), "s.csv")
    a, _ = ingest_golden(GoldenIngestSpec(comma))
    b, _ = ingest_golden(GoldenIngestSpec(semi, delimiter=";"))
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_missing_column(tmp_path):
    path = _csv(tmp_path, "sentence,label\nhi,joy\n")
    with pytest.raises(ColumnNotFound):
        ingest_golden(GoldenIngestSpec(path))


def test_empty_file(tmp_path):
    with pytest.raises(ParseError):
        ingest_golden(GoldenIngestSpec(_csv(tmp_path, "")))


def test_ingest_options_validated(tmp_path):
    with pytest.raises(ValueError):
        GoldenIngestSpec(tmp_path, delimiter=";;")
    with pytest.raises(ValueError):
        GoldenIngestSpec(tmp_path, label_map={"a": "boredom"})


@settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(st.tuples(st.sampled_from(["x y", "hello", ""]), st.sampled_from(["joy", "love", "disgust", "?"])), max_size=30))
def test_ingest_conserves_rows(tmp_path, rows):
    path = _csv(tmp_path, "text,label\n" + "".join(f"{t},{l}\n" for t, l in rows), "p.csv")
    records, summary = ingest_golden(GoldenIngestSpec(path))
    assert summary.rows_in == summary.records_out + summary.skipped
    assert summary.records_out == len(records)
    assert len({r.id for r in records}) == len(records)


# --- reports --------------------------------------------------------------------


def test_report_and_table(tmp_path):
    import numpy as np

    write_report(tmp_path / "r.json", {"b": np.float64(1.5), "a": [np.int64(2)], "bad": float("nan")})
    assert read_report(tmp_path / "r.json") == {"a": [2], "b": 1.5, "bad": None}
    write_table(tmp_path / "t.csv", [{"x": 1, "y": "a"}], ["x", "y"])
    assert (tmp_path / "t.csv").read_text() == "x,y\n1,a\n"
