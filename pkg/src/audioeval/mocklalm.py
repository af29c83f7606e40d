"""Local mock chat-completions endpoint with latency, fault injection and probes.

Routes:
    POST .../chat/completions   scripted or echo reply ("*" scripts every sample key)
    GET  /stats                 request counters and concurrency high-water mark
    POST /reset                 clear counters and per-sample failure state

Failure and latency draws are keyed by (seed, model, sample, request number),
so concurrent interleavings do not change which requests fail.
"""

from __future__ import annotations

import hashlib
import json
import random
import socket
import sys
import threading
import time
from dataclasses import asdict, dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .client import SAMPLE_HEADER


class BindError(OSError):
    pass


@dataclass(frozen=True)
class MockBehavior:
    latency_s: float | tuple[float, float] = 0.0
    fail_first_n: int = 0
    fail_prob: float = 0.0
    fail_status: int = 500
    response_script: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fail_prob <= 1.0:
            raise ValueError("fail_prob must be within [0, 1]")
        if self.fail_first_n < 0:
            raise ValueError("fail_first_n must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "MockBehavior":
        d = dict(d)
        lat = d.get("latency_s", 0.0)
        if isinstance(lat, dict):
            lat = tuple(lat["uniform"])
        elif isinstance(lat, list):
            lat = tuple(lat)
        d["latency_s"] = lat
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown behavior keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "MockBehavior":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class MockStats:
    requests_received: int = 0
    max_concurrent_observed: int = 0
    in_flight: int = 0
    failures: int = 0
    per_request_log: list = field(default_factory=list)


def _last_user_text(messages: list) -> str:
    for m in reversed(messages):
        if m.get("role") != "user":
            continue
        content = m.get("content")
        if isinstance(content, str):
            return content
        return " ".join(p.get("text", "") for p in content or [] if p.get("type") == "text")
    return ""


def _audio_bytes(messages: list) -> int:
    total = 0
    for m in messages:
        content = m.get("content")
        if isinstance(content, list):
            for p in content:
                if p.get("type") == "input_audio":
                    total += len(p.get("input_audio", {}).get("data", "")) * 3 // 4
    return total


class _QuietServer(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 512

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._conns: set = set()
        self._conns_lock = threading.Lock()

    def process_request(self, request, client_address):
        with self._conns_lock:
            self._conns.add(request)
        super().process_request(request, client_address)

    def shutdown_request(self, request):
        with self._conns_lock:
            self._conns.discard(request)
        super().shutdown_request(request)

    def drop_connections(self) -> None:
        # Keep-alive sockets would otherwise outlive the listener.
        with self._conns_lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass

    def handle_error(self, request, client_address):
        # Clients that time out hang up mid-reply; that is expected here.
        if not isinstance(sys.exc_info()[1], ConnectionError):
            super().handle_error(request, client_address)


class MockServer:
    def __init__(self, behavior: MockBehavior, host: str = "127.0.0.1", port: int = 0):
        self.behavior = behavior
        self._lock = threading.Lock()
        self._stats = MockStats()
        self._counts: dict[tuple[str, str], int] = {}
        self._t0 = time.monotonic()
        handler = _make_handler(self)
        try:
            self._httpd = _QuietServer((host, port), handler, bind_and_activate=False)
            self._httpd.server_bind()
            self._httpd.server_activate()
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
        self.host, self.port = self._httpd.server_address[:2]
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "MockServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, args=(0.05,), daemon=True, name="mocklalm")
        self._thread.start()
        return self

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._httpd.drop_connections()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> "MockServer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def stats(self) -> dict:
        with self._lock:
            return json.loads(json.dumps(asdict(self._stats)))

    def reset(self) -> None:
        with self._lock:
            self._stats = MockStats(in_flight=self._stats.in_flight)
            self._counts.clear()
            self._t0 = time.monotonic()

    # -- request handling -------------------------------------------------

    def _draw(self, model: str, key: str, n: int) -> random.Random:
        return random.Random(f"{self.behavior.seed}:{model}:{key}:{n}")

    def handle_completion(self, body: dict, sample_key: str | None) -> tuple[int, dict]:
        messages = body.get("messages") or []
        model = str(body.get("model", ""))
        if sample_key is None:
            first = json.dumps(messages[:1], sort_keys=True).encode()
            sample_key = hashlib.sha1(first).hexdigest()[:16]
        with self._lock:
            n = self._counts.get((model, sample_key), 0)
            self._counts[(model, sample_key)] = n + 1
            st = self._stats
            st.requests_received += 1
            st.in_flight += 1
            st.max_concurrent_observed = max(st.max_concurrent_observed, st.in_flight)
            st.per_request_log.append({
                "arrival_s": round(time.monotonic() - self._t0, 6),
                "messages": len(messages),
                "sample_key": sample_key,
                "model": model,
                "audio_bytes": _audio_bytes(messages),
            })
        try:
            b = self.behavior
            rng = self._draw(model, sample_key, n)
            lat = b.latency_s
            delay = rng.uniform(*lat) if isinstance(lat, tuple) else lat
            fail = n < b.fail_first_n or rng.random() < b.fail_prob
            if delay > 0:
                time.sleep(delay)
            if fail:
                with self._lock:
                    self._stats.failures += 1
                return b.fail_status, {"error": {"message": "injected failure", "type": "mock"}}
            return 200, self._completion(model, sample_key, messages)
        finally:
            with self._lock:
                self._stats.in_flight -= 1

    def _completion(self, model: str, sample_key: str, messages: list) -> dict:
        script = self.behavior.response_script.get(sample_key, self.behavior.response_script.get("*"))
        if isinstance(script, list):
            turn = sum(1 for m in messages if m.get("role") == "user") - 1
            text = script[min(turn, len(script) - 1)]
        elif isinstance(script, str):
            text = script
        else:
            text = _last_user_text(messages)
        return {
            "object": "chat.completion",
            "model": model,
            "choices": [
                {"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}
            ],
            "usage": {"prompt_tokens": 0, "completion_tokens": len(text.split()), "total_tokens": len(text.split())},
        }


def _make_handler(server: MockServer):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        disable_nagle_algorithm = True

        def log_message(self, fmt, *args):
            pass

        def _send(self, status: int, payload: dict) -> None:
            data = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _body(self) -> bytes:
            length = int(self.headers.get("Content-Length") or 0)
            return self.rfile.read(length) if length else b""

        def do_GET(self):
            if self.path.rstrip("/") == "/stats":
                self._send(200, server.stats())
            else:
                self._send(404, {"error": {"message": "not found"}})

        def do_POST(self):
            raw = self._body()
            path = self.path.rstrip("/")
            if path == "/reset":
                server.reset()
                self._send(200, {"ok": True})
                return
            if not path.endswith("/chat/completions"):
                self._send(404, {"error": {"message": "not found"}})
                return
            try:
                body = json.loads(raw)
            except ValueError:
                self._send(400, {"error": {"message": "invalid JSON"}})
                return
            status, payload = server.handle_completion(body, self.headers.get(SAMPLE_HEADER))
            self._send(status, payload)

    return Handler


def serve(behavior: MockBehavior, port: int = 0, host: str = "127.0.0.1") -> MockServer:
    """Start a mock endpoint in a background thread and return its handle."""
    return MockServer(behavior, host, port).start()


def scripted_turn_check(handle, expectations) -> bool:
    """Check logged message counts per chain against expected sequences.

    ``expectations`` maps a sample key to its expected count sequence, or is
    one sequence every chain must follow. Chains are grouped by (model,
    sample key) in arrival order. Raises AssertionError on the first mismatch.
    """
    stats = handle.stats() if hasattr(handle, "stats") else handle
    chains: dict[tuple[str, str], list[int]] = {}
    for entry in stats["per_request_log"]:
        chains.setdefault((entry["model"], entry["sample_key"]), []).append(entry["messages"])
    if not chains:
        raise AssertionError("no requests were logged")
    for (model, key), counts in sorted(chains.items()):
        expected = expectations.get(key) if isinstance(expectations, dict) else expectations
        if expected is None:
            continue
        if list(counts) != list(expected):
            raise AssertionError(
                f"chain {model}/{key}: message counts {counts} != expected {list(expected)}"
            )
    return True
