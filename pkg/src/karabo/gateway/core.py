"""Gateway over text-generation providers.

One abstraction with two capabilities: free-text chat completion and
boolean yes/no judging with token probabilities. The Gateway adds request
validation, bounded retries with seeded-jitter backoff, an in-flight cap,
and per-stage usage accounting on top of a pluggable Backend.
"""

from __future__ import annotations

import logging
import random
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from ..errors import (
    DegenerateVerdictError,
    EmptyCompletionError,
    ProviderError,
    RateLimitError,
)

logger = logging.getLogger(__name__)

USER = "user"
ASSISTANT = "assistant"


@dataclass(frozen=True)
class Message:
    role: str  # USER or ASSISTANT
    text: str


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = 1024
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0

    def validate(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for msg in self.messages:
            if msg.role not in (USER, ASSISTANT):
                raise ValueError(f"bad message role {msg.role!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def last_user_text(self) -> str:
        for msg in reversed(self.messages):
            if msg.role == USER:
                return msg.text
        return ""


@dataclass(frozen=True)
class BooleanVerdict:
    """Raw yes/no token probabilities; need not sum to 1 (normalized later)."""

    p_yes: float
    p_no: float

    def __post_init__(self):
        if not (0.0 <= self.p_yes <= 1.0 and 0.0 <= self.p_no <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")

    @property
    def degenerate(self) -> bool:
        return self.p_yes == 0.0 and self.p_no == 0.0

    @property
    def yes(self) -> bool:
        return self.p_yes >= self.p_no


@dataclass(frozen=True)
class BackendResult:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0


class TransientBackendError(Exception):
    """Retryable provider failure (transport error, 5xx)."""


class RateLimitedError(TransientBackendError):
    """Retryable rate-limit response (HTTP 429)."""


class Backend(ABC):
    """One provider (or mock) able to complete chats and answer yes/no."""

    name = "backend"

    @abstractmethod
    def complete(self, request: ChatRequest) -> BackendResult:
        raise NotImplementedError

    @abstractmethod
    def judge(self, context: str, question: str) -> BooleanVerdict:
        raise NotImplementedError


def estimate_tokens(text: str) -> int:
    # Rough 4-chars-per-token accounting used by offline backends.
    return max(1, len(text) // 4)


@dataclass
class StageUsage:
    calls: int = 0
    retries: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    wall_time: float = 0.0

    def to_json_obj(self) -> dict:
        return {
            "calls": self.calls,
            "retries": self.retries,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "wall_time": self.wall_time,
        }


class UsageLedger:
    """Thread-safe per-stage call/token/time accounting.

    Counters only ever grow; the totals row equals the sum over stages.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._stages: dict[str, StageUsage] = {}

    def record(
        self,
        stage: str,
        *,
        prompt_tokens: int = 0,
        completion_tokens: int = 0,
        wall_time: float = 0.0,
        retries: int = 0,
    ) -> None:
        with self._lock:
            usage = self._stages.setdefault(stage, StageUsage())
            usage.calls += 1
            usage.retries += retries
            usage.prompt_tokens += prompt_tokens
            usage.completion_tokens += completion_tokens
            usage.wall_time += wall_time

    def stage(self, stage: str) -> StageUsage:
        with self._lock:
            found = self._stages.get(stage, StageUsage())
            return StageUsage(**vars(found))

    def totals(self) -> StageUsage:
        with self._lock:
            total = StageUsage()
            for usage in self._stages.values():
                total.calls += usage.calls
                total.retries += usage.retries
                total.prompt_tokens += usage.prompt_tokens
                total.completion_tokens += usage.completion_tokens
                total.wall_time += usage.wall_time
            return total

    def snapshot(self) -> dict:
        with self._lock:
            out = {name: usage.to_json_obj() for name, usage in sorted(self._stages.items())}
        out["total"] = self.totals().to_json_obj()
        return out


class Gateway:
    """Retrying, accounting front door over a Backend.

    Shareable across workers: the ledger is atomic, in-flight calls are
    capped by a semaphore, and backoff jitter is drawn from a seeded RNG
    so retry timing is reproducible in logs.
    """

    def __init__(
        self,
        backend: Backend,
        *,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        seed: int = 0,
        max_in_flight: int = 8,
        ledger: UsageLedger | None = None,
        sleep=time.sleep,
    ):
        self.backend = backend
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.ledger = ledger if ledger is not None else UsageLedger()
        self._sleep = sleep
        self._slots = threading.Semaphore(max_in_flight)
        self._jitter = random.Random(seed)
        self._jitter_lock = threading.Lock()

    def _backoff(self, attempt: int) -> float:
        with self._jitter_lock:
            jitter = self._jitter.random()
        return self.backoff_base * (2**attempt) * (1.0 + 0.25 * jitter)

    def _call_with_retries(self, fn, describe: str):
        """At most 1 + max_retries attempts; returns (result, retries_used)."""
        last_exc: Exception | None = None
        for attempt in range(1 + self.max_retries):
            try:
                with self._slots:
                    return fn(), attempt
            except TransientBackendError as exc:
                last_exc = exc
                if attempt < self.max_retries:
                    delay = self._backoff(attempt)
                    logger.warning(
                        "%s failed (attempt %d/%d): %s; retrying in %.2fs",
                        describe, attempt + 1, 1 + self.max_retries, exc, delay,
                    )
                    self._sleep(delay)
        if isinstance(last_exc, RateLimitedError):
            raise RateLimitError(f"{describe}: retry budget exhausted: {last_exc}") from last_exc
        raise ProviderError(f"{describe}: {last_exc}") from last_exc

    def complete(self, request: ChatRequest, *, stage: str = "default") -> str:
        request.validate()
        start = time.perf_counter()
        result, retries = self._call_with_retries(
            lambda: self.backend.complete(request), f"complete[{self.backend.name}]"
        )
        self.ledger.record(
            stage,
            prompt_tokens=result.prompt_tokens,
            completion_tokens=result.completion_tokens,
            wall_time=time.perf_counter() - start,
            retries=retries,
        )
        if not result.text.strip():
            raise EmptyCompletionError(f"provider {self.backend.name} returned empty text")
        return result.text

    def judge(self, context: str, question: str, *, stage: str = "judge") -> BooleanVerdict:
        if not question.strip():
            raise ValueError("question must be non-empty")
        start = time.perf_counter()
        verdict, retries = self._call_with_retries(
            lambda: self.backend.judge(context, question), f"judge[{self.backend.name}]"
        )
        self.ledger.record(
            stage,
            prompt_tokens=estimate_tokens(context) + estimate_tokens(question),
            completion_tokens=1,
            wall_time=time.perf_counter() - start,
            retries=retries,
        )
        if verdict.degenerate:
            raise DegenerateVerdictError("both yes and no probabilities are zero")
        return verdict
