"""Chat-completions client carrying text and base64 WAV audio parts.

Long audio can be split into several ``input_audio`` parts of at most
``audio_chunk_s`` seconds each, all sent inside the same user message.
"""

from __future__ import annotations

import base64
import io
import json
import math
import os
import threading
import time
import wave
from dataclasses import dataclass
from typing import Sequence

import httpx

from .config import EffectiveSettings, EndpointSpec
from .dataset import SampleRecord, Turn, render_turn
from .errors import DecodeError, EndpointConnectionError, FormatError, HttpStatusError, RequestTimeout

SAMPLE_RATE = 16000
SAMPLE_WIDTH = 2
CHANNELS = 1

# Lets the mock server key scripted behaviour by sample; real endpoints ignore it.
SAMPLE_HEADER = "X-Sample-Id"


@dataclass(frozen=True)
class ContentPart:
    kind: str  # "text" | "input_audio"
    text: str | None = None
    audio_b64: str | None = None
    audio_format: str = "wav"

    def __post_init__(self):
        if self.kind == "text":
            if self.text is None or self.audio_b64 is not None:
                raise ValueError("text part needs text only")
        elif self.kind == "input_audio":
            if self.audio_b64 is None or self.text is not None:
                raise ValueError("input_audio part needs audio only")
        else:
            raise ValueError(f"unknown part kind {self.kind!r}")

    def to_wire(self) -> dict:
        if self.kind == "text":
            return {"type": "text", "text": self.text}
        return {"type": "input_audio", "input_audio": {"data": self.audio_b64, "format": self.audio_format}}


@dataclass(frozen=True)
class ChatMessage:
    role: str
    parts: tuple[ContentPart, ...]

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")
        if not self.parts:
            raise ValueError("message needs at least one part")

    @classmethod
    def text_message(cls, role: str, text: str) -> "ChatMessage":
        return cls(role, (ContentPart("text", text=text),))

    def to_wire(self) -> dict:
        if self.role == "user":
            return {"role": self.role, "content": [p.to_wire() for p in self.parts]}
        # Plain string content is the most widely accepted form for assistant/system.
        return {"role": self.role, "content": "".join(p.text or "" for p in self.parts)}


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str
    latency_s: float
    usage_tokens: dict | None = None


# ---------------------------------------------------------------------------
# audio
# ---------------------------------------------------------------------------


def read_pcm(path) -> tuple[bytes, int]:
    """Return (PCM payload, frame count) of a 16 kHz 16-bit mono WAV."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != CHANNELS:
                raise FormatError(f"{path}: expected mono, got {w.getnchannels()} channels")
            if w.getsampwidth() != SAMPLE_WIDTH:
                raise FormatError(f"{path}: expected 16-bit samples, got {8 * w.getsampwidth()}-bit")
            if w.getframerate() != SAMPLE_RATE:
                raise FormatError(f"{path}: expected {SAMPLE_RATE} Hz, got {w.getframerate()} Hz")
            n = w.getnframes()
            return w.readframes(n), n
    except wave.Error as exc:
        raise FormatError(f"{path}: not a PCM WAV file ({exc})") from None
    except EOFError:
        raise FormatError(f"{path}: truncated WAV file") from None


def wav_bytes(pcm: bytes) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(CHANNELS)
        w.setsampwidth(SAMPLE_WIDTH)
        w.setframerate(SAMPLE_RATE)
        w.writeframes(pcm)
    return buf.getvalue()


def chunk_pcm(pcm: bytes, nframes: int, chunk_s: float | None) -> list[bytes]:
    frame_bytes = SAMPLE_WIDTH * CHANNELS
    if chunk_s is None or nframes <= chunk_s * SAMPLE_RATE:
        return [pcm]
    per_chunk = max(1, int(round(chunk_s * SAMPLE_RATE)))
    count = math.ceil(nframes / per_chunk)
    step = per_chunk * frame_bytes
    return [pcm[k * step:(k + 1) * step] for k in range(count)]


def encode_audio_part(path, chunk_s: float | None = None) -> list[ContentPart]:
    """Base64 WAV parts for one file; split on sample boundaries when longer than ``chunk_s``."""
    pcm, nframes = read_pcm(path)
    return [
        ContentPart("input_audio", audio_b64=base64.b64encode(wav_bytes(chunk)).decode("ascii"))
        for chunk in chunk_pcm(pcm, nframes, chunk_s)
    ]


# ---------------------------------------------------------------------------
# requests
# ---------------------------------------------------------------------------


def user_message(
    sample: SampleRecord,
    turn: Turn,
    turn_index: int,
    template: str,
    chunk_s: float | None = None,
) -> ChatMessage:
    """Render one user turn: template text first, then its audio parts."""
    text = render_turn(template, sample, turn, turn_index)
    parts: list[ContentPart] = []
    if text:
        parts.append(ContentPart("text", text=text))
    if turn.audio_index is not None:
        parts.extend(encode_audio_part(sample.audio[turn.audio_index].path, chunk_s))
    if not parts:
        parts.append(ContentPart("text", text=""))
    return ChatMessage("user", tuple(parts))


def build_request(
    message: ChatMessage,
    history: Sequence[ChatMessage],
    settings: EffectiveSettings,
    model_id: str,
) -> dict:
    expected = "user"
    for m in history:
        if m.role == "system":
            continue
        if m.role != expected:
            raise ValueError("history must alternate user/assistant turns")
        expected = "assistant" if expected == "user" else "user"
    if expected != "user":
        raise ValueError("history must end with an assistant turn")
    return {
        "model": model_id,
        "messages": [m.to_wire() for m in (*history, message)],
        "temperature": settings.temperature,
        "max_tokens": settings.max_tokens,
    }


def encode_request(request: dict) -> bytes:
    return json.dumps(request, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


_http_lock = threading.Lock()
_http: httpx.Client | None = None


def _http_client() -> httpx.Client:
    global _http
    with _http_lock:
        if _http is None:
            _http = httpx.Client(
                limits=httpx.Limits(max_connections=None, max_keepalive_connections=64),
                trust_env=False,
            )
        return _http


def parse_response(payload: bytes, latency_s: float) -> ChatResponse:
    try:
        body = json.loads(payload)
        choice = body["choices"][0]
        content = choice["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise DecodeError(f"malformed completion body: {exc!r}") from None
    if isinstance(content, list):
        content = "".join(p.get("text", "") for p in content if isinstance(p, dict))
    if not isinstance(content, str):
        raise DecodeError("message content is not text")
    return ChatResponse(
        text=content,
        finish_reason=str(choice.get("finish_reason") or ""),
        latency_s=latency_s,
        usage_tokens=body.get("usage") if isinstance(body.get("usage"), dict) else None,
    )


def send_request(
    endpoint: EndpointSpec,
    request: dict,
    timeout_s: float,
    sample_key: str | None = None,
) -> ChatResponse:
    headers = {"Content-Type": "application/json"}
    if endpoint.api_key_env:
        key = os.environ.get(endpoint.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
    if sample_key is not None:
        headers[SAMPLE_HEADER] = sample_key
    url = f"{endpoint.base_url}/chat/completions"
    start = time.monotonic()
    try:
        resp = _http_client().post(url, content=encode_request(request), headers=headers, timeout=timeout_s)
    except httpx.TimeoutException:
        raise RequestTimeout(f"{url}: no response within {timeout_s}s") from None
    except httpx.TransportError as exc:
        raise EndpointConnectionError(f"{url}: {exc}") from None
    latency = time.monotonic() - start
    if not 200 <= resp.status_code < 300:
        raise HttpStatusError(resp.status_code, resp.text)
    return parse_response(resp.content, latency)
