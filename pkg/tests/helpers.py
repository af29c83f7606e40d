"""Fixture builders shared by the test modules."""

from __future__ import annotations

import json
import wave
from pathlib import Path

import yaml

SAMPLE_RATE = 16000


def write_wav(path, seconds: float, channels: int = 1, rate: int = SAMPLE_RATE, width: int = 2,
              value: int = 0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = int(round(seconds * rate))
    frame = (value & 0xFFFF).to_bytes(2, "little") * channels if width == 2 else b"\x80" * channels
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(frame * n)
    return path


def record(sample_id: str, reference: str = "hello world", kind: str = "plain_text",
           audio: str | None = None, duration: float = 2.0, turns=None, metadata=None) -> dict:
    rec = {"sample_id": sample_id, "reference": {"kind": kind, "value": reference}}
    rec["audio"] = [{"path": audio, "duration_s": duration}] if audio else []
    if turns is None:
        turns = [{"role": "user", "text": "Transcribe.", **({"audio_index": 0} if audio else {})}]
    rec["turns"] = turns
    if metadata:
        rec["metadata"] = metadata
    return rec


def write_manifest(path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def audio_dataset(root, n: int, seconds: float = 2.0, prefix: str = "s", reference: str = "hello world"):
    """n samples sharing one clip of ``seconds`` length; returns the manifest path."""
    root = Path(root)
    write_wav(root / "clip.wav", seconds)
    recs = [record(f"{prefix}{i:04d}", reference, audio="clip.wav", duration=seconds) for i in range(n)]
    return write_manifest(root / "manifest.jsonl", recs)


def endpoint(name: str, url: str, model_id: str | None = None, **kw) -> dict:
    return {"name": name, "base_url": url, "model_id": model_id or name, **kw}


def write_config(path, endpoints, tasks, **top) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump({"endpoints": endpoints, "tasks": tasks, **top}, sort_keys=False))
    return path
