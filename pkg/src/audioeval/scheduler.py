"""Request controller: a FIFO permit pool, retry-with-timeout and stagger delays.

A permit is one slot for one in-flight inference request. Every request
holds a permit from the global pool (and from its endpoint's capacity pool)
for the duration of a single attempt.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from contextlib import ExitStack
from dataclasses import dataclass
from typing import Any, Callable

from .errors import Exhausted, PoolClosed, RequestTimeout, TransportError


class Permit:
    __slots__ = ("pool", "acquired_at", "_released")

    def __init__(self, pool: "PermitPool"):
        self.pool = pool
        self.acquired_at = time.monotonic()
        self._released = False

    def release(self) -> None:
        if self._released:
            raise RuntimeError("permit released twice")
        self._released = True
        self.pool._release()

    @property
    def released(self) -> bool:
        return self._released

    def __enter__(self) -> "Permit":
        return self

    def __exit__(self, *exc) -> None:
        self.release()


class PermitPool:
    """Counting semaphore with first-come-first-served hand-off.

    A released slot goes straight to the longest-waiting acquirer, so a
    newcomer can never overtake a queued one.
    """

    def __init__(self, limit: int, name: str = "pool"):
        if limit < 1:
            raise ValueError(f"limit must be >= 1, got {limit}")
        self.limit = limit
        self.name = name
        self._lock = threading.Lock()
        self._waiters: deque[list] = deque()  # [event, granted]
        self._in_flight = 0
        self._closed = False
        self.high_water = 0
        self.acquisitions = 0
        self.releases = 0

    @property
    def in_flight(self) -> int:
        with self._lock:
            return self._in_flight

    def acquire(self, timeout: float | None = None) -> Permit:
        with self._lock:
            if self._closed:
                raise PoolClosed(self.name)
            if self._in_flight < self.limit and not self._waiters:
                return self._grant_locked()
            entry = [threading.Event(), False]
            self._waiters.append(entry)
        if not entry[0].wait(timeout):
            with self._lock:
                if not entry[1]:
                    self._waiters.remove(entry)
                    raise TimeoutError(f"no permit from {self.name} within {timeout}s")
        if not entry[1]:
            raise PoolClosed(self.name)
        return Permit(self)

    def _grant_locked(self) -> Permit:
        self._in_flight += 1
        self.acquisitions += 1
        self.high_water = max(self.high_water, self._in_flight)
        return Permit(self)

    def _release(self) -> None:
        with self._lock:
            self.releases += 1
            if self._waiters and not self._closed:
                # Hand the slot over; in_flight stays the same.
                entry = self._waiters.popleft()
                entry[1] = True
                self.acquisitions += 1
                entry[0].set()
            else:
                self._in_flight -= 1

    def close(self) -> None:
        """Refuse new acquisitions and wake every waiter with PoolClosed."""
        with self._lock:
            self._closed = True
            waiters, self._waiters = list(self._waiters), deque()
        for event, _ in waiters:
            event.set()


@dataclass(frozen=True)
class RetryPolicy:
    retry_limit: int = 0
    timeout_s: float = 60.0
    retry_wait_s: float = 0.0

    def __post_init__(self):
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")


@dataclass(frozen=True)
class Outcome:
    response: Any
    attempts: int


@dataclass(frozen=True)
class StaggerPlan:
    base_delay_ms: float = 0.0
    model_index: int = 0


def stagger_delay(plan: StaggerPlan) -> float:
    """Dispatch delay in milliseconds: linear in the model's index within its engine."""
    return plan.model_index * plan.base_delay_ms


def call_with_timeout(action: Callable[[], Any], timeout_s: float) -> Any:
    """Run ``action`` on a helper thread and abandon it after ``timeout_s``."""
    box: dict = {}
    done = threading.Event()

    def target():
        try:
            box["value"] = action()
        except BaseException as exc:  # re-raised in the caller
            box["error"] = exc
        finally:
            done.set()

    threading.Thread(target=target, daemon=True, name="attempt").start()
    if not done.wait(timeout_s):
        raise RequestTimeout(f"attempt exceeded {timeout_s}s")
    if "error" in box:
        raise box["error"]
    return box["value"]


def _should_retry(exc: BaseException) -> bool:
    return not (isinstance(exc, TransportError) and not exc.retryable)


def execute_with_retry(
    action: Callable[[], Any],
    policy: RetryPolicy,
    permit_source: PermitPool | list[PermitPool],
) -> Outcome:
    """Attempt ``action`` up to ``retry_limit + 1`` times.

    Each attempt holds one permit from every pool in ``permit_source`` and is
    abandoned after ``policy.timeout_s``. Permits are released before any
    retry wait. Non-retryable transport errors stop immediately. Raises
    Exhausted carrying the last error and the attempt count.
    """
    pools = permit_source if isinstance(permit_source, (list, tuple)) else [permit_source]
    attempts = 0
    last_error: BaseException | None = None
    for attempts in range(1, policy.retry_limit + 2):
        with ExitStack() as stack:
            for pool in pools:
                stack.enter_context(pool.acquire())
            try:
                return Outcome(call_with_timeout(action, policy.timeout_s), attempts)
            except Exception as exc:
                last_error = exc
        if not _should_retry(last_error):
            break
        if policy.retry_wait_s > 0 and attempts <= policy.retry_limit:
            time.sleep(policy.retry_wait_s)
    raise Exhausted(last_error, attempts)
