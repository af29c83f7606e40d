"""Concurrent engines: drive one shard through one or more models.

Every (sample, model) pair is an independent work item. Items run
concurrently, each request holding permits from the shared global pool and
from the endpoint's own capacity pool. A multi-turn chain sends its user
turns strictly in order, appending each reply to the history.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from .client import ChatMessage, ContentPart, build_request, send_request, user_message
from .config import EffectiveSettings, EndpointSpec, TaskSpec, resolve_effective_settings
from .dataset import SampleRecord, Shard
from .errors import Exhausted
from .scheduler import PermitPool, RetryPolicy, StaggerPlan, execute_with_retry, stagger_delay

log = logging.getLogger(__name__)

Sender = Callable[..., object]


@dataclass
class EngineRun:
    task: TaskSpec
    shard: Shard
    models: tuple[EndpointSpec, ...]
    started_at: float | None = None
    finished_at: float | None = None


@dataclass
class RawPrediction:
    sample_id: str
    model_name: str
    endpoint_name: str
    turn_outputs: list[str]
    latency_s: float
    attempts: int
    audio_duration_s: float
    error: str | None = None
    finished_at: float = field(default=0.0, compare=False, repr=False)


class ChainError(Exception):
    """A chain stopped early; ``outputs`` has ``None`` for the failed turn."""

    def __init__(self, outputs: list, turn_index: int, attempts: int, cause: BaseException):
        self.outputs = outputs
        self.turn_index = turn_index
        self.attempts = attempts
        self.cause = cause
        super().__init__(f"turn {turn_index + 1} failed: {cause}")


@dataclass
class ChainResult:
    outputs: list[str]
    attempts: int
    latency_s: float


def _error_text(exc: BaseException) -> str:
    if isinstance(exc, Exhausted):
        exc = exc.last_error
    return f"{type(exc).__name__}: {exc}"


def _single_message(sample: SampleRecord, task: TaskSpec, chunk_s) -> ChatMessage:
    """All user turns of a sample folded into one message."""
    parts = [
        p
        for k, turn in enumerate(sample.user_turns)
        for p in user_message(sample, turn, k, task.prompt_template, chunk_s).parts
        if p.kind != "text" or p.text
    ]
    return ChatMessage("user", tuple(parts) or (ContentPart("text", text=""),))


def run_multi_turn(
    sample: SampleRecord,
    model: EndpointSpec,
    task: TaskSpec,
    settings: EffectiveSettings,
    pools: list[PermitPool],
    sender: Sender = send_request,
) -> ChainResult:
    """Send the sample's user turns in order, feeding each reply back as context.

    Each turn is one request and holds its own permits. On a terminal error
    raises ChainError; later turns are never sent.
    """
    policy = RetryPolicy(settings.retry_limit, settings.timeout_s)
    if task.multi_turn:
        messages = [
            (lambda k=k, t=t: user_message(sample, t, k, task.prompt_template, settings.audio_chunk_s))
            for k, t in enumerate(sample.user_turns)
        ]
    else:
        messages = [lambda: _single_message(sample, task, settings.audio_chunk_s)]

    history: list[ChatMessage] = []
    outputs: list = []
    attempts = 0
    start = time.monotonic()
    for k, make_message in enumerate(messages):
        try:
            message = make_message()
            request = build_request(message, history, settings, model.model_id)
            outcome = execute_with_retry(
                lambda: sender(model, request, settings.timeout_s, sample_key=sample.sample_id),
                policy,
                pools,
            )
        except Exhausted as exc:
            raise ChainError(outputs + [None], k, attempts + exc.attempts, exc.last_error) from exc
        except Exception as exc:  # request could not be built (template, audio format)
            raise ChainError(outputs + [None], k, max(attempts, 1), exc) from exc
        attempts += outcome.attempts
        text = outcome.response.text
        outputs.append(text)
        history.extend([message, ChatMessage.text_message("assistant", text)])
    return ChainResult(outputs, attempts, time.monotonic() - start)


def run_engine(
    run: EngineRun,
    pool: PermitPool,
    resolver: Callable[[TaskSpec, EndpointSpec], EffectiveSettings] = resolve_effective_settings,
    *,
    endpoint_pools: dict[str, PermitPool] | None = None,
    stagger_ms: float = 0.0,
    sender: Sender = send_request,
    on_prediction: Callable[[RawPrediction], None] | None = None,
) -> list[RawPrediction]:
    """One prediction per (sample, model), sorted by (sample_id, model_name).

    Failures are recorded on the prediction and never abort the run.
    """
    if not run.shard.samples:
        raise ValueError("shard is empty")
    if not run.models:
        raise ValueError("engine has no models")
    endpoint_pools = endpoint_pools or {}
    sink: list[RawPrediction] = []
    sink_lock = threading.Lock()

    def work(sample: SampleRecord, model: EndpointSpec, index: int) -> None:
        delay = stagger_delay(StaggerPlan(stagger_ms, index))
        if delay > 0:
            time.sleep(delay / 1000.0)
        settings = resolver(run.task, model)
        pools = [p for p in (endpoint_pools.get(model.name), pool) if p is not None]
        t0 = time.monotonic()
        try:
            res = run_multi_turn(sample, model, run.task, settings, pools, sender)
            pred = RawPrediction(sample.sample_id, model.model_id, model.name, res.outputs,
                                 res.latency_s, res.attempts, sample.audio_duration_s)
        except ChainError as exc:
            pred = RawPrediction(sample.sample_id, model.model_id, model.name, [],
                                 time.monotonic() - t0, exc.attempts, sample.audio_duration_s,
                                 error=f"turn {exc.turn_index + 1}: {_error_text(exc.cause)}")
        pred.finished_at = time.monotonic()
        with sink_lock:
            sink.append(pred)
        if on_prediction is not None:
            on_prediction(pred)

    items = [
        (sample, model, index)
        for sample in run.shard.samples
        for index, model in enumerate(run.models)
    ]
    workers = min(len(items), pool.limit + len(run.models))
    run.started_at = time.monotonic()
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix=f"engine-{run.task.task_name}") as ex:
        futures = [ex.submit(work, *item) for item in items]
        for f in futures:
            f.result()
    run.finished_at = time.monotonic()
    log.info("engine %s/%s finished %d predictions in %.2fs", run.task.task_name,
             run.shard.endpoint_name, len(sink), run.finished_at - run.started_at)
    return sorted(sink, key=lambda p: (p.sample_id, p.model_name, p.endpoint_name))
