"""Manifest ingestion, filtering and capacity-proportional sharding.

A manifest is a JSONL file, one sample per line::

    {"sample_id": "s1",
     "audio": [{"path": "clips/s1.wav", "duration_s": 2.0}],
     "turns": [{"role": "user", "text": "Transcribe.", "audio_index": 0}],
     "reference": {"kind": "plain_text", "value": "hello world"},
     "metadata": {"split": "test"}}

Audio paths are relative to the manifest's directory. Durations come from
the manifest; audio is never decoded here.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .config import EndpointSpec, FilterSpec
from .errors import DuplicateIdError, ManifestError, TemplateError

USER, ASSISTANT_REFERENCE = "user", "assistant-reference"
REFERENCE_KINDS = ("plain_text", "speaker_tagged", "structured")


@dataclass(frozen=True)
class AudioRef:
    path: str
    duration_s: float


@dataclass(frozen=True)
class Turn:
    role: str
    text: str | None = None
    audio_index: int | None = None


@dataclass(frozen=True)
class ReferenceTarget:
    kind: str
    value: str


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    audio: tuple[AudioRef, ...]
    turns: tuple[Turn, ...]
    reference: ReferenceTarget
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def audio_paths(self) -> list[str]:
        return [a.path for a in self.audio]

    @property
    def audio_duration_s(self) -> float:
        return sum(a.duration_s for a in self.audio)

    @property
    def user_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.role == USER]


@dataclass(frozen=True)
class Shard:
    endpoint_name: str
    samples: tuple[SampleRecord, ...]


def _need(obj: dict, key: str, line: int):
    if key not in obj:
        raise ManifestError(f"missing field {key}", line)
    return obj[key]


def parse_record(obj, line: int, base_dir: Path | None = None, check_audio: bool = False) -> SampleRecord:
    if not isinstance(obj, dict):
        raise ManifestError("record must be a JSON object", line)
    known = {"sample_id", "audio", "turns", "reference", "metadata"}
    extra = set(obj) - known
    if extra:
        raise ManifestError(f"unknown field {sorted(extra)[0]}", line)
    sample_id = _need(obj, "sample_id", line)
    if not isinstance(sample_id, str) or not sample_id:
        raise ManifestError("sample_id must be a non-empty string", line)

    audio = []
    for k, a in enumerate(obj.get("audio") or []):
        if not isinstance(a, dict) or "path" not in a or "duration_s" not in a:
            raise ManifestError(f"audio[{k}] needs path and duration_s", line)
        dur = a["duration_s"]
        if isinstance(dur, bool) or not isinstance(dur, (int, float)) or dur < 0:
            raise ManifestError(f"audio[{k}].duration_s must be a non-negative number", line)
        path = str(a["path"])
        if base_dir is not None and not Path(path).is_absolute():
            path = str(base_dir / path)
        if check_audio and not Path(path).is_file():
            raise ManifestError(f"audio file not found: {path}", line)
        audio.append(AudioRef(path, float(dur)))

    turns_raw = _need(obj, "turns", line)
    if not isinstance(turns_raw, list) or not turns_raw:
        raise ManifestError("turns must be a non-empty list", line)
    turns = []
    for k, t in enumerate(turns_raw):
        if not isinstance(t, dict):
            raise ManifestError(f"turns[{k}] must be an object", line)
        role = t.get("role")
        if role not in (USER, ASSISTANT_REFERENCE):
            raise ManifestError(f"turns[{k}].role must be user or assistant-reference", line)
        text, idx = t.get("text"), t.get("audio_index")
        if text is None and idx is None:
            raise ManifestError(f"turns[{k}] needs text or audio_index", line)
        if text is not None and not isinstance(text, str):
            raise ManifestError(f"turns[{k}].text must be a string", line)
        if idx is not None and (isinstance(idx, bool) or not isinstance(idx, int)
                                or not 0 <= idx < len(audio)):
            raise ManifestError(f"turns[{k}].audio_index out of range", line)
        turns.append(Turn(role, text, idx))
    if not any(t.role == USER for t in turns):
        raise ManifestError("at least one user turn is required", line)

    ref = _need(obj, "reference", line)
    if not isinstance(ref, dict) or ref.get("kind") not in REFERENCE_KINDS:
        raise ManifestError(f"reference.kind must be one of {list(REFERENCE_KINDS)}", line)
    if not isinstance(ref.get("value"), str):
        raise ManifestError("reference.value must be a string", line)

    meta = obj.get("metadata") or {}
    if not isinstance(meta, dict) or not all(isinstance(v, str) for v in meta.values()):
        raise ManifestError("metadata must be a flat string map", line)

    return SampleRecord(
        sample_id=sample_id,
        audio=tuple(audio),
        turns=tuple(turns),
        reference=ReferenceTarget(ref["kind"], ref["value"]),
        metadata=dict(meta),
    )


def load_manifest(path, check_audio: bool = True) -> list[SampleRecord]:
    """Read a JSONL manifest in file order. Blank lines are skipped."""
    path = Path(path)
    records: list[SampleRecord] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", lineno) from None
            rec = parse_record(obj, lineno, path.parent, check_audio)
            if rec.sample_id in seen:
                raise DuplicateIdError(
                    f"sample_id {rec.sample_id!r} already used on line {seen[rec.sample_id]}", lineno
                )
            seen[rec.sample_id] = lineno
            records.append(rec)
    return records


def apply_filters(samples, f: FilterSpec, seed: int = 0) -> list[SampleRecord]:
    kept = [
        s
        for s in samples
        if (f.min_audio_s is None or s.audio_duration_s >= f.min_audio_s)
        and (f.max_audio_s is None or s.audio_duration_s <= f.max_audio_s)
        and all(s.metadata.get(k) == v for k, v in f.metadata_equals.items())
    ]
    if f.max_samples is not None and len(kept) > f.max_samples:
        # Sort by id first so the draw is independent of manifest order.
        pool = sorted(kept, key=lambda s: s.sample_id)
        random.Random(seed).shuffle(pool)
        chosen = {s.sample_id for s in pool[: f.max_samples]}
        kept = [s for s in kept if s.sample_id in chosen]
    return kept


def apportion(total: int, weights) -> list[int]:
    """Largest-remainder (Hamilton) apportionment of ``total`` by ``weights``.

    Ties in the remainder go to the earlier weight.
    """
    weights = list(weights)
    if not weights or any(w <= 0 for w in weights):
        raise ValueError("weights must be non-empty and positive")
    wsum = sum(weights)
    quotas = [Fraction(total * w, wsum) for w in weights]
    sizes = [math.floor(q) for q in quotas]
    left = total - sum(sizes)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:left]:
        sizes[i] += 1
    return sizes


def shard_dataset(samples, endpoints: list[EndpointSpec]) -> list[Shard]:
    """Contiguous slices sized proportionally to endpoint capacity."""
    if not endpoints:
        raise ValueError("at least one endpoint is required")
    samples = tuple(samples)
    sizes = apportion(len(samples), [ep.capacity for ep in endpoints])
    shards, start = [], 0
    for ep, size in zip(endpoints, sizes):
        shards.append(Shard(ep.name, samples[start:start + size]))
        start += size
    return shards


def render_turn(template: str, sample: SampleRecord, turn: Turn, turn_index: int) -> str:
    """Fill a prompt template for one user turn.

    Available fields: ``text``, ``sample_id``, ``turn_index`` and every
    metadata key.
    """
    fields = dict(sample.metadata)
    fields.update(text=turn.text or "", sample_id=sample.sample_id, turn_index=turn_index)
    try:
        return template.format_map(fields)
    except KeyError as exc:
        raise TemplateError(f"unresolved placeholder {{{exc.args[0]}}} for sample {sample.sample_id}") from None
    except (ValueError, IndexError) as exc:
        raise TemplateError(f"bad template: {exc}") from None
