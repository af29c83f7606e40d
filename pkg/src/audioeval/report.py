"""Per-sample results, multi-dimensional aggregation and run output files.

Output files (fixed names, stable key order):

``results.jsonl``
    one SampleResult per line, sorted by (task, sample, model, endpoint)
``report.json``
    aggregates, config fingerprint, seed and template versions
``timing.json``
    measured quantities: per-sample latency, efficiency, runtime scenarios
``summary.md``
    human-readable tables

Everything measured with a clock lives in ``timing.json`` so that
``results.jsonl`` and ``report.json`` are byte-identical across repeated runs
that receive identical responses.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .config import AggregationSpec

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MetricValue:
    metric_name: str
    value: float
    scale: str
    sample_count: int = 1


@dataclass
class SampleResult:
    sample_id: str
    model_name: str
    task_name: str
    category: str
    metric_values: list[MetricValue] = field(default_factory=list)
    latency_s: float = 0.0
    audio_duration_s: float = 0.0
    error: str | None = None
    endpoint_name: str = ""
    attempts: int = 1
    turn_outputs: list[str] = field(default_factory=list)
    reference_kind: str = "plain_text"
    reference: str = ""
    question: str = ""
    metric_errors: dict[str, str] = field(default_factory=dict)

    def sort_key(self) -> tuple:
        return (self.task_name, self.sample_id, self.model_name, self.endpoint_name)

    def to_record(self) -> dict:
        """JSON record for results.jsonl (latency excluded, see timing.json)."""
        d = asdict(self)
        d.pop("latency_s")
        d["metric_values"] = [
            {"metric_name": m.metric_name, "value": m.value, "scale": m.scale}
            for m in self.metric_values
        ]
        d["metric_errors"] = dict(sorted(self.metric_errors.items()))
        return d

    @classmethod
    def from_record(cls, d: dict) -> "SampleResult":
        d = dict(d)
        d["metric_values"] = [
            MetricValue(m["metric_name"], m["value"], m["scale"]) for m in d.get("metric_values") or []
        ]
        return cls(**d)


@dataclass
class RunReport:
    per_sample: list[SampleResult]
    aggregates: list[dict]
    efficiency: dict[str, dict] = field(default_factory=dict)
    scenario: dict[str, float] | None = None
    task_walls: dict[str, float] = field(default_factory=dict)
    config_fingerprint: str = ""
    seed: int = 0
    judge_template_version: str = ""

    def deterministic_part(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config_fingerprint": self.config_fingerprint,
            "seed": self.seed,
            "judge_template_version": self.judge_template_version,
            "counts": _counts(self.per_sample),
            "aggregates": self.aggregates,
        }

    def timing_part(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "efficiency": self.efficiency,
            "scenario": self.scenario,
            "task_walls": self.task_walls,
            "latency_s": {
                "/".join(r.sort_key()): r.latency_s
                for r in sorted(self.per_sample, key=SampleResult.sort_key)
            },
        }


def _counts(results) -> dict:
    total = len(results)
    errors = sum(1 for r in results if r.error)
    return {"predictions": total, "errored": errors, "succeeded": total - errors}


def _dim_value(r: SampleResult, dim: str, metric: str) -> str:
    return {"task": r.task_name, "category": r.category, "model": r.model_name, "metric": metric}[dim]


def aggregate(results, spec: AggregationSpec) -> list[dict]:
    """Group metric values by ``spec.dimensions`` and reduce.

    Errored samples and per-sample metric failures are left out of the value
    but tallied in ``errors``. Results are sorted by group key.
    """
    values: dict[tuple, list] = defaultdict(list)
    scales: dict[tuple, set] = defaultdict(set)
    errors: dict[tuple, int] = defaultdict(int)
    # finest-level subgroups, used by the weighted reducer
    fine: dict[tuple, dict[tuple, list]] = defaultdict(lambda: defaultdict(list))

    for r in results:
        for m in r.metric_values:
            key = tuple(_dim_value(r, d, m.metric_name) for d in spec.dimensions)
            values[key].append(m.value)
            scales[key].add(m.scale)
            fine[key][(r.task_name, r.category, r.model_name, m.metric_name)].append(m.value)
        for metric in r.metric_errors:
            key = tuple(_dim_value(r, d, metric) for d in spec.dimensions)
            errors[key] += 1
            values.setdefault(key, [])

    out = []
    for key in sorted(values):
        vals = values[key]
        if not vals:
            value = None
        elif spec.reducer == "mean":
            value = math.fsum(vals) / len(vals)
        else:
            groups = fine[key].values()
            value = math.fsum(len(g) * (math.fsum(g) / len(g)) for g in groups) / sum(len(g) for g in groups)
        sc = scales.get(key, set())
        out.append({
            "dimensions": dict(zip(spec.dimensions, key)),
            "reducer": spec.reducer,
            "value": value,
            "scale": sc.pop() if len(sc) == 1 else ("mixed" if sc else None),
            "sample_count": len(vals),
            "errors": errors.get(key, 0),
        })
    return out


def aggregate_all(results, specs) -> list[dict]:
    return [
        {"dimensions": list(spec.dimensions), "reducer": spec.reducer, "groups": aggregate(results, spec)}
        for spec in specs
    ]


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _fmt(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def render_summary(report: RunReport) -> str:
    lines = ["# Evaluation summary", ""]
    c = _counts(report.per_sample)
    lines.append(f"Predictions: {c['predictions']} ({c['errored']} errored). "
                 f"Seed {report.seed}. Config `{report.config_fingerprint[:12]}`.")
    lines += ["", "| task | model | metric | value | scale | samples | errors |",
              "|---|---|---|---|---|---|---|"]
    table = aggregate(report.per_sample, AggregationSpec(("task", "model", "metric"), "mean"))
    for row in table:
        d = row["dimensions"]
        lines.append(f"| {d['task']} | {d['model']} | {d['metric']} | {_fmt(row['value'])} | "
                     f"{row['scale'] or ''} | {row['sample_count']} | {row['errors']} |")
    if report.efficiency:
        lines += ["", "## Efficiency", "", "| task/model | RTF | samples/s | wall (s) | audio (s) |",
                  "|---|---|---|---|---|"]
        for key in sorted(report.efficiency):
            e = report.efficiency[key]
            lines.append(f"| {key} | {_fmt(e.get('rtf'))} | {_fmt(e.get('samples_per_second'))} | "
                         f"{_fmt(e.get('wall_clock_s'))} | {_fmt(e.get('total_audio_s'))} |")
    if report.scenario:
        lines += ["", f"Sequential runtime: {report.scenario['sequential']:.3f} s; "
                      f"parallel runtime: {report.scenario['parallel']:.3f} s."]
    return "\n".join(lines) + "\n"


def write_outputs(report: RunReport, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror}") from exc
    ordered = sorted(report.per_sample, key=SampleResult.sort_key)
    contents = {
        "results.jsonl": "".join(
            json.dumps(r.to_record(), sort_keys=True, ensure_ascii=False) + "\n" for r in ordered
        ),
        "report.json": _dumps(report.deterministic_part()),
        "timing.json": _dumps(report.timing_part()),
        "summary.md": render_summary(report),
    }
    paths = {}
    for name, text in contents.items():
        path = out_dir / name
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        paths[name] = path
    return paths


def read_results(path) -> list[SampleResult]:
    with open(path, encoding="utf-8") as fh:
        return [SampleResult.from_record(json.loads(line)) for line in fh if line.strip()]
