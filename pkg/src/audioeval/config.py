"""Run configuration: schema, parsing, validation and setting resolution.

Configurations are YAML documents (JSON documents parse too, since JSON is a
subset of YAML). The full schema is documented in ``docs/config.md``.
"""

from __future__ import annotations

import hashlib
import json
import re
import string
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigSyntaxError, InvariantError, SchemaError

CATEGORIES = (
    "SpeechRecognition",
    "Paralinguistics",
    "AudioUnderstanding",
    "SpokenLanguageUnderstanding",
    "SpokenLanguageReasoning",
    "SafetySecurity",
)
JUDGE_MODES = ("binary", "detailed")
AGG_DIMENSIONS = ("task", "category", "model", "metric")
REDUCERS = ("mean", "weighted_mean_by_sample_count")

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 1024

_IDENT = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.\-]*$")


def canonical_category(value: str) -> str | None:
    """Match a category loosely: case, spaces, underscores and '&' are ignored."""
    key = re.sub(r"[^a-z0-9]", "", value.lower())
    for cat in CATEGORIES:
        if cat.lower() == key:
            return cat
    return None


@dataclass(frozen=True)
class EndpointSpec:
    name: str
    base_url: str
    model_id: str
    api_key_env: str | None = None
    capacity: int = 1
    retry_limit: int = 0
    timeout_s: float = 60.0
    audio_chunk_s: float | None = None
    temperature: float | None = None
    max_tokens: int | None = None


@dataclass(frozen=True)
class JudgeSpec:
    endpoint: EndpointSpec
    judge_mode: str = "binary"
    judge_concurrency: int = 1


@dataclass(frozen=True)
class TaskSpec:
    task_name: str
    category: str
    dataset_path: str
    metric_names: tuple[str, ...]
    temperature: float | None = None
    max_tokens: int | None = None
    prompt_template: str = "{text}"
    multi_turn: bool = False
    judge: JudgeSpec | None = None


@dataclass(frozen=True)
class FilterSpec:
    min_audio_s: float | None = None
    max_audio_s: float | None = None
    max_samples: int | None = None
    metadata_equals: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class AggregationSpec:
    dimensions: tuple[str, ...] = ("task", "model", "metric")
    reducer: str = "mean"


@dataclass(frozen=True)
class RunConfig:
    endpoints: tuple[EndpointSpec, ...]
    tasks: tuple[TaskSpec, ...]
    filters: dict[str, FilterSpec] = field(default_factory=dict)
    aggregations: tuple[AggregationSpec, ...] = (AggregationSpec(),)
    global_permit_limit: int = 8
    stagger_ms: float = 0.0
    output_dir: str = "results"
    seed: int = 0

    def endpoint(self, name: str) -> EndpointSpec:
        for ep in self.endpoints:
            if ep.name == name:
                return ep
        raise KeyError(name)

    def task(self, name: str) -> TaskSpec:
        for t in self.tasks:
            if t.task_name == name:
                return t
        raise KeyError(name)


@dataclass(frozen=True)
class EffectiveSettings:
    temperature: float
    max_tokens: int
    timeout_s: float
    retry_limit: int
    audio_chunk_s: float | None


def resolve_effective_settings(task: TaskSpec, endpoint: EndpointSpec) -> EffectiveSettings:
    """Endpoint values override task values, which override built-in defaults."""

    def pick(*values):
        return next(v for v in values if v is not None)

    return EffectiveSettings(
        temperature=pick(endpoint.temperature, task.temperature, DEFAULT_TEMPERATURE),
        max_tokens=pick(endpoint.max_tokens, task.max_tokens, DEFAULT_MAX_TOKENS),
        timeout_s=endpoint.timeout_s,
        retry_limit=endpoint.retry_limit,
        audio_chunk_s=endpoint.audio_chunk_s,
    )


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _type_name(value) -> str:
    return type(value).__name__


def _mapping(value, path: str, required: set[str], optional: set[str]) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(f"expected a mapping, got {_type_name(value)}", path)
    for key in value:
        if key not in required and key not in optional:
            raise SchemaError(f"unknown key {key!r}", f"{path}.{key}" if path else str(key))
    for key in sorted(required):
        if key not in value:
            raise SchemaError("missing required field", f"{path}.{key}" if path else key)
    return value


def _str(value, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"expected a string, got {_type_name(value)}", path)
    return value


def _ident(value, path: str) -> str:
    _str(value, path)
    if not _IDENT.match(value):
        raise SchemaError(f"invalid identifier {value!r}", path)
    return value


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"expected an integer, got {_type_name(value)}", path)
    return value


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {_type_name(value)}", path)
    return float(value)


def _bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise SchemaError(f"expected a boolean, got {_type_name(value)}", path)
    return value


def _opt(conv, raw: dict, key: str, path: str):
    value = raw.get(key)
    return None if value is None else conv(value, f"{path}.{key}")


def _parse_endpoint(raw, path: str) -> EndpointSpec:
    _mapping(
        raw,
        path,
        {"name", "base_url", "model_id"},
        {"api_key_env", "capacity", "retry_limit", "timeout_s", "audio_chunk_s",
         "temperature", "max_tokens"},
    )
    ep = EndpointSpec(
        name=_ident(raw["name"], f"{path}.name"),
        base_url=_str(raw["base_url"], f"{path}.base_url").rstrip("/"),
        model_id=_str(raw["model_id"], f"{path}.model_id"),
        api_key_env=_opt(_str, raw, "api_key_env", path),
        capacity=_int(raw.get("capacity", 1), f"{path}.capacity"),
        retry_limit=_int(raw.get("retry_limit", 0), f"{path}.retry_limit"),
        timeout_s=_num(raw.get("timeout_s", 60.0), f"{path}.timeout_s"),
        audio_chunk_s=_opt(_num, raw, "audio_chunk_s", path),
        temperature=_opt(_num, raw, "temperature", path),
        max_tokens=_opt(_int, raw, "max_tokens", path),
    )
    if not re.match(r"^https?://", ep.base_url):
        raise InvariantError("base_url must be an http(s) URL", f"{path}.base_url")
    if ep.capacity < 1:
        raise InvariantError("must be >= 1", f"{path}.capacity")
    if ep.retry_limit < 0:
        raise InvariantError("must be >= 0", f"{path}.retry_limit")
    if ep.timeout_s <= 0:
        raise InvariantError("must be > 0", f"{path}.timeout_s")
    if ep.audio_chunk_s is not None and ep.audio_chunk_s <= 0:
        raise InvariantError("must be > 0", f"{path}.audio_chunk_s")
    if ep.temperature is not None and not 0 <= ep.temperature <= 2:
        raise InvariantError("must be within [0, 2]", f"{path}.temperature")
    if ep.max_tokens is not None and ep.max_tokens < 1:
        raise InvariantError("must be >= 1", f"{path}.max_tokens")
    return ep


def template_fields(template: str) -> list[str]:
    """Placeholder names used by a prompt template."""
    names = []
    for _, name, spec, conv in string.Formatter().parse(template):
        if name is not None:
            names.append(name)
    return names


def _parse_judge(raw, path: str, endpoints: dict[str, EndpointSpec]) -> JudgeSpec:
    _mapping(raw, path, {"endpoint"}, {"judge_mode", "judge_concurrency"})
    ep_raw = raw["endpoint"]
    if isinstance(ep_raw, str):
        if ep_raw not in endpoints:
            raise SchemaError(f"unknown endpoint {ep_raw!r}", f"{path}.endpoint")
        endpoint = endpoints[ep_raw]
    else:
        endpoint = _parse_endpoint(ep_raw, f"{path}.endpoint")
    mode = _str(raw.get("judge_mode", "binary"), f"{path}.judge_mode")
    if mode not in JUDGE_MODES:
        raise SchemaError(f"judge_mode must be one of {list(JUDGE_MODES)}", f"{path}.judge_mode")
    concurrency = _int(raw.get("judge_concurrency", 1), f"{path}.judge_concurrency")
    if concurrency < 1:
        raise InvariantError("must be >= 1", f"{path}.judge_concurrency")
    return JudgeSpec(endpoint, mode, concurrency)


def _parse_task(raw, path: str, endpoints: dict[str, EndpointSpec]) -> TaskSpec:
    from .metrics.registry import JUDGE_METRICS, METRIC_NAMES

    _mapping(
        raw,
        path,
        {"task_name", "category", "dataset_path", "metric_names"},
        {"temperature", "max_tokens", "prompt_template", "multi_turn", "judge"},
    )
    category = canonical_category(_str(raw["category"], f"{path}.category"))
    if category is None:
        raise SchemaError(
            f"unknown category {raw['category']!r}; expected one of {list(CATEGORIES)}",
            f"{path}.category",
        )
    metrics = raw["metric_names"]
    if not isinstance(metrics, list) or not metrics:
        raise SchemaError("expected a non-empty list", f"{path}.metric_names")
    for k, m in enumerate(metrics):
        if _str(m, f"{path}.metric_names[{k}]") not in METRIC_NAMES:
            raise SchemaError(
                f"unregistered metric {m!r}; known: {sorted(METRIC_NAMES)}",
                f"{path}.metric_names[{k}]",
            )
    if len(set(metrics)) != len(metrics):
        raise SchemaError("duplicate metric", f"{path}.metric_names")
    template = _str(raw.get("prompt_template", "{text}"), f"{path}.prompt_template")
    try:
        names = template_fields(template)
    except ValueError as exc:
        raise SchemaError(f"malformed template: {exc}", f"{path}.prompt_template") from None
    for name in names:
        if not name.isidentifier():
            raise SchemaError(f"placeholder {{{name}}} is not a plain field name",
                              f"{path}.prompt_template")
    judge = None
    if raw.get("judge") is not None:
        judge = _parse_judge(raw["judge"], f"{path}.judge", endpoints)
    if judge is None and any(m in JUDGE_METRICS for m in metrics):
        raise InvariantError("judge metrics require a judge section", f"{path}.judge")
    task = TaskSpec(
        task_name=_ident(raw["task_name"], f"{path}.task_name"),
        category=category,
        dataset_path=_str(raw["dataset_path"], f"{path}.dataset_path"),
        metric_names=tuple(metrics),
        temperature=_opt(_num, raw, "temperature", path),
        max_tokens=_opt(_int, raw, "max_tokens", path),
        prompt_template=template,
        multi_turn=_bool(raw.get("multi_turn", False), f"{path}.multi_turn"),
        judge=judge,
    )
    if task.temperature is not None and not 0 <= task.temperature <= 2:
        raise InvariantError("must be within [0, 2]", f"{path}.temperature")
    if task.max_tokens is not None and task.max_tokens < 1:
        raise InvariantError("must be >= 1", f"{path}.max_tokens")
    return task


def _parse_filter(raw, path: str) -> FilterSpec:
    _mapping(raw, path, set(), {"min_audio_s", "max_audio_s", "max_samples", "metadata_equals"})
    meta = raw.get("metadata_equals") or {}
    if not isinstance(meta, dict):
        raise SchemaError("expected a mapping", f"{path}.metadata_equals")
    for k, v in meta.items():
        _str(k, f"{path}.metadata_equals")
        _str(v, f"{path}.metadata_equals.{k}")
    f = FilterSpec(
        min_audio_s=_opt(_num, raw, "min_audio_s", path),
        max_audio_s=_opt(_num, raw, "max_audio_s", path),
        max_samples=_opt(_int, raw, "max_samples", path),
        metadata_equals=dict(meta),
    )
    if f.min_audio_s is not None and f.max_audio_s is not None and f.min_audio_s > f.max_audio_s:
        raise InvariantError("min_audio_s exceeds max_audio_s", f"{path}.min_audio_s")
    if f.max_samples is not None and f.max_samples < 1:
        raise InvariantError("must be >= 1", f"{path}.max_samples")
    return f


def _parse_aggregation(raw, path: str) -> AggregationSpec:
    _mapping(raw, path, {"dimensions"}, {"reducer"})
    dims = raw["dimensions"]
    if not isinstance(dims, list) or not dims:
        raise InvariantError("dimensions must be a non-empty list", f"{path}.dimensions")
    for k, d in enumerate(dims):
        if d not in AGG_DIMENSIONS:
            raise SchemaError(f"dimension must be one of {list(AGG_DIMENSIONS)}",
                              f"{path}.dimensions[{k}]")
    if len(set(dims)) != len(dims):
        raise InvariantError("duplicate dimension", f"{path}.dimensions")
    reducer = _str(raw.get("reducer", "mean"), f"{path}.reducer")
    if reducer not in REDUCERS:
        raise SchemaError(f"reducer must be one of {list(REDUCERS)}", f"{path}.reducer")
    return AggregationSpec(tuple(dims), reducer)


def config_from_dict(doc: Any) -> RunConfig:
    _mapping(
        doc,
        "",
        {"endpoints", "tasks"},
        {"filters", "aggregations", "global_permit_limit", "stagger_ms", "output_dir", "seed"},
    )
    if not isinstance(doc["endpoints"], list) or not doc["endpoints"]:
        raise SchemaError("expected a non-empty list", "endpoints")
    endpoints = []
    by_name: dict[str, EndpointSpec] = {}
    for k, raw in enumerate(doc["endpoints"]):
        ep = _parse_endpoint(raw, f"endpoints[{k}]")
        if ep.name in by_name:
            raise SchemaError(f"duplicate endpoint name {ep.name!r}", f"endpoints[{k}].name")
        by_name[ep.name] = ep
        endpoints.append(ep)

    if not isinstance(doc["tasks"], list) or not doc["tasks"]:
        raise SchemaError("expected a non-empty list", "tasks")
    tasks = []
    seen = set()
    for k, raw in enumerate(doc["tasks"]):
        task = _parse_task(raw, f"tasks[{k}]", by_name)
        if task.task_name in seen:
            raise SchemaError(f"duplicate task name {task.task_name!r}", f"tasks[{k}].task_name")
        seen.add(task.task_name)
        tasks.append(task)

    filters_raw = doc.get("filters") or {}
    if not isinstance(filters_raw, dict):
        raise SchemaError("expected a mapping", "filters")
    filters = {}
    for name, raw in filters_raw.items():
        if name not in seen:
            raise InvariantError(f"filter for unknown task {name!r}", f"filters.{name}")
        filters[name] = _parse_filter(raw, f"filters.{name}")

    if "aggregations" in doc:
        aggs_raw = doc["aggregations"]
        if not isinstance(aggs_raw, list):
            raise SchemaError("expected a list", "aggregations")
        aggregations = tuple(_parse_aggregation(a, f"aggregations[{k}]") for k, a in enumerate(aggs_raw))
    else:
        aggregations = (AggregationSpec(),)

    limit = _int(doc.get("global_permit_limit", 8), "global_permit_limit")
    if limit < 1:
        raise InvariantError("must be >= 1", "global_permit_limit")
    stagger = _num(doc.get("stagger_ms", 0), "stagger_ms")
    if stagger < 0:
        raise InvariantError("must be >= 0", "stagger_ms")
    return RunConfig(
        endpoints=tuple(endpoints),
        tasks=tuple(tasks),
        filters=filters,
        aggregations=aggregations,
        global_permit_limit=limit,
        stagger_ms=stagger,
        output_dir=_str(doc.get("output_dir", "results"), "output_dir"),
        seed=_int(doc.get("seed", 0), "seed"),
    )


def parse_config(source: str) -> RunConfig:
    """Parse a YAML (or JSON) configuration document."""
    try:
        doc = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ConfigSyntaxError(str(exc)) from None
    return config_from_dict(doc)


def load_config(path) -> RunConfig:
    """Read a config file; relative dataset and output paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    cfg = parse_config(text)
    base = path.resolve().parent
    tasks = tuple(
        replace(t, dataset_path=str((base / t.dataset_path).resolve())) for t in cfg.tasks
    )
    return replace(cfg, tasks=tasks, output_dir=str((base / cfg.output_dir).resolve()))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _prune(value):
    if isinstance(value, dict):
        return {k: _prune(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_prune(v) for v in value]
    return value


def config_to_dict(cfg: RunConfig) -> dict:
    return _prune(asdict(cfg))


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, allow_unicode=True)


def config_fingerprint(cfg: RunConfig) -> str:
    """SHA-256 over the resolved configuration, excluding ``output_dir``."""
    doc = config_to_dict(cfg)
    doc.pop("output_dir", None)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
