import json
import os

import pytest
from hypothesis import given
from hypothesis import strategies as st

from audioeval.config import AggregationSpec
from audioeval.report import (
    SCHEMA_VERSION,
    MetricValue,
    RunReport,
    SampleResult,
    aggregate,
    read_results,
    render_summary,
    write_outputs,
)


def res(sid, value=None, model="m", task="t", metric="llm_judge_binary", error=None, category="SpeechRecognition"):
    r = SampleResult(sid, model, task, category, latency_s=0.1, error=error)
    if value is not None:
        r.metric_values = [MetricValue(metric, value, "percent")]
    if error:
        r.metric_errors = {metric: "prediction failed"}
    return r


def only(groups):
    assert len(groups) == 1
    return groups[0]


def test_mean_example():
    g = only(aggregate([res("a", 0), res("b", 100)], AggregationSpec(("task",), "mean")))
    assert g["value"] == 50 and g["sample_count"] == 2 and g["errors"] == 0


def test_weighted_mean_example():
    results = [res("a", 100, model="m1")] + [res(f"b{k}", 0, model="m2") for k in range(3)]
    g = only(aggregate(results, AggregationSpec(("task",), "weighted_mean_by_sample_count")))
    assert g["value"] == 25 and g["sample_count"] == 4


def test_all_errored():
    results = [res("a", error="boom"), res("b", error="boom")]
    g = only(aggregate(results, AggregationSpec(("task", "metric"), "mean")))
    assert g["value"] is None and g["errors"] == 2 and g["sample_count"] == 0


def test_errors_excluded_but_counted():
    results = [res("a", 100), res("b", error="x")]
    g = only(aggregate(results, AggregationSpec(("model",), "mean")))
    assert g["value"] == 100 and g["errors"] == 1 and g["sample_count"] == 1


def test_grouping_dimensions():
    results = [res("a", 10, model="x"), res("a", 30, model="y"), res("b", 50, model="x")]
    groups = aggregate(results, AggregationSpec(("model", "metric"), "mean"))
    assert [(g["dimensions"]["model"], g["value"]) for g in groups] == [("x", 30), ("y", 30)]
    assert list(groups[0]["dimensions"]) == ["model", "metric"]


values = st.lists(
    st.tuples(st.sampled_from(["m1", "m2"]), st.sampled_from(["t1", "t2"]),
              st.floats(0, 100), st.booleans()),
    min_size=1, max_size=30,
)
specs = st.builds(
    AggregationSpec,
    st.permutations(["task", "category", "model", "metric"]).flatmap(
        lambda p: st.integers(1, 4).map(lambda k: tuple(p[:k]))),
    st.sampled_from(["mean", "weighted_mean_by_sample_count"]),
)


def build(rows):
    return [res(f"s{k}", None if err else v, model=m, task=t, error="e" if err else None)
            for k, (m, t, v, err) in enumerate(rows)]


@given(values, specs, st.randoms())
def test_aggregation_permutation_invariant(rows, spec, rnd):
    results = build(rows)
    shuffled = results[:]
    rnd.shuffle(shuffled)
    a, b = aggregate(results, spec), aggregate(shuffled, spec)
    assert [(g["dimensions"], g["sample_count"], g["errors"]) for g in a] == \
        [(g["dimensions"], g["sample_count"], g["errors"]) for g in b]
    for x, y in zip(a, b):
        assert (x["value"] is None) == (y["value"] is None)
        if x["value"] is not None:
            assert x["value"] == pytest.approx(y["value"], rel=1e-12, abs=1e-12)


@given(values, specs)
def test_percent_aggregate_bounded_and_counts_consistent(rows, spec):
    results = build(rows)
    groups = aggregate(results, spec)
    assert sum(g["sample_count"] for g in groups) == sum(1 for r in results if not r.error)
    assert sum(g["errors"] for g in groups) == sum(1 for r in results if r.error)
    for g in groups:
        if g["value"] is not None:
            assert -1e-9 <= g["value"] <= 100 + 1e-9


@given(values)
def test_reducers_agree(rows):
    results = build(rows)
    for dims in [("task",), ("model",), ("task", "model", "metric")]:
        a = aggregate(results, AggregationSpec(dims, "mean"))
        b = aggregate(results, AggregationSpec(dims, "weighted_mean_by_sample_count"))
        for x, y in zip(a, b):
            if x["value"] is not None:
                assert x["value"] == pytest.approx(y["value"], abs=1e-9)


def report(n=4):
    results = [res(f"s{k}", 100.0 * (k % 2)) for k in range(n)]
    aggs = [{"dimensions": ["task"], "reducer": "mean",
             "groups": aggregate(results, AggregationSpec(("task",), "mean"))}]
    return RunReport(results, aggs, {"t/m": {"rtf": 0.5, "samples_per_second": 2.0,
                                            "wall_clock_s": 1.0, "total_audio_s": 2.0}},
                     {"sequential": 1.0, "parallel": 1.0}, {"t": 1.0}, "abc", 7, "v1")


def test_write_outputs(tmp_path):
    paths = write_outputs(report(), tmp_path / "a")
    assert sorted(paths) == ["report.json", "results.jsonl", "summary.md", "timing.json"]
    assert len((tmp_path / "a" / "results.jsonl").read_text().splitlines()) == 4
    doc = json.loads((tmp_path / "a" / "report.json").read_text())
    assert doc["schema_version"] == SCHEMA_VERSION and doc["seed"] == 7
    assert doc["judge_template_version"] == "v1"
    assert "latency_s" not in (tmp_path / "a" / "results.jsonl").read_text()
    timing = json.loads((tmp_path / "a" / "timing.json").read_text())
    assert timing["latency_s"]["t/s0/m/"] == 0.1


def test_writes_are_byte_stable(tmp_path):
    write_outputs(report(), tmp_path / "a")
    write_outputs(report(), tmp_path / "b")
    for name in ("results.jsonl", "report.json", "timing.json", "summary.md"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_results_round_trip(tmp_path):
    write_outputs(report(), tmp_path)
    back = read_results(tmp_path / "results.jsonl")
    assert [r.to_record() for r in back] == [r.to_record() for r in report().per_sample]


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_directory_permissions(tmp_path):
    d = tmp_path / "ro"
    d.mkdir()
    d.chmod(0o500)
    try:
        with pytest.raises(OSError, match=str(d)):
            write_outputs(report(), d)
    finally:
        d.chmod(0o700)


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    with pytest.raises(OSError, match=str(blocker / "out")):
        write_outputs(report(), blocker / "out")


def test_summary_mentions_every_group():
    text = render_summary(report())
    assert "| t | m | llm_judge_binary | 50.0000 | percent | 4 | 0 |" in text
    assert "Sequential runtime" in text
