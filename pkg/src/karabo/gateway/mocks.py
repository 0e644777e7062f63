"""Offline mock backends.

Every downstream pipeline and test can run without a provider. Profiles:

  echo        "[MOCK]" + last user text; hash-seeded judge
  constant    fixed (p_yes, p_no) verdict; echo-style completion
  hash        completion and verdict both derived from a keyed hash, so
              outputs are stable pure functions of the inputs and seed
  script      strictly ordered canned completions / verdicts
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

from ..errors import ProviderError
from .core import (
    Backend,
    BackendResult,
    BooleanVerdict,
    ChatRequest,
    estimate_tokens,
)

MOCK_PREFIX = "[MOCK]"


def _keyed_fraction(seed: int, *parts: str) -> float:
    """Stable value in [0, 1) from a keyed hash of the given strings."""
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big")
    h = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), key=key, digest_size=8)
    return int.from_bytes(h.digest(), "big") / 2**64


def _echo_result(request: ChatRequest) -> BackendResult:
    text = MOCK_PREFIX + request.last_user_text()
    return BackendResult(
        text=text,
        prompt_tokens=estimate_tokens(request.system_prompt)
        + sum(estimate_tokens(m.text) for m in request.messages),
        completion_tokens=estimate_tokens(text),
    )


class EchoBackend(Backend):
    """Prefixes the last user message; judges via a seeded hash."""

    name = "mock-echo"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def complete(self, request: ChatRequest) -> BackendResult:
        return _echo_result(request)

    def judge(self, context: str, question: str) -> BooleanVerdict:
        p_yes = _keyed_fraction(self.seed, context, question)
        return BooleanVerdict(p_yes=p_yes, p_no=1.0 - p_yes)


class ConstantBackend(Backend):
    """Always the same verdict; completion echoes unless a reply is fixed."""

    name = "mock-constant"

    def __init__(self, p_yes: float, p_no: float, reply: str | None = None):
        self.verdict = BooleanVerdict(p_yes=p_yes, p_no=p_no)
        self.reply = reply

    def complete(self, request: ChatRequest) -> BackendResult:
        if self.reply is not None:
            return BackendResult(self.reply, completion_tokens=estimate_tokens(self.reply))
        return _echo_result(request)

    def judge(self, context: str, question: str) -> BooleanVerdict:
        return self.verdict


class HashSeededBackend(Backend):
    """Deterministic pseudo-provider: everything is a pure function of
    (inputs, seed)."""

    name = "mock-hash"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def complete(self, request: ChatRequest) -> BackendResult:
        tag = _keyed_fraction(self.seed, request.system_prompt, request.last_user_text())
        text = f"[MOCK:{int(tag * 1e8):08d}]{request.last_user_text()}"
        return BackendResult(text, completion_tokens=estimate_tokens(text))

    def judge(self, context: str, question: str) -> BooleanVerdict:
        p_yes = _keyed_fraction(self.seed, context, question)
        return BooleanVerdict(p_yes=p_yes, p_no=1.0 - p_yes)


class ScriptBackend(Backend):
    """Replays canned completions and verdicts in strict order."""

    name = "mock-script"

    def __init__(
        self,
        replies: list[str] | None = None,
        verdicts: list[tuple[float, float]] | None = None,
    ):
        self._replies = list(replies or [])
        self._verdicts = list(verdicts or [])
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> BackendResult:
        with self._lock:
            if not self._replies:
                raise ProviderError("script backend ran out of completions")
            text = self._replies.pop(0)
        return BackendResult(text, completion_tokens=estimate_tokens(text))

    def judge(self, context: str, question: str) -> BooleanVerdict:
        with self._lock:
            if not self._verdicts:
                raise ProviderError("script backend ran out of verdicts")
            p_yes, p_no = self._verdicts.pop(0)
        return BooleanVerdict(p_yes=p_yes, p_no=p_no)


class RuleJudgeBackend(Backend):
    """Routes judge calls by question substring; completes via a transform.

    Used to stage scenarios like "benefit yes, suitability no" where one
    judge must answer differently depending on what is being asked.
    """

    name = "mock-rules"

    def __init__(
        self,
        rules: list[tuple[str, tuple[float, float]]],
        default: tuple[float, float] = (1.0, 0.0),
        transform=None,
    ):
        self.rules = rules
        self.default = default
        self.transform = transform  # str -> str applied to the last user text

    def complete(self, request: ChatRequest) -> BackendResult:
        if self.transform is not None:
            text = self.transform(request.last_user_text())
            return BackendResult(text, completion_tokens=estimate_tokens(text))
        return _echo_result(request)

    def judge(self, context: str, question: str) -> BooleanVerdict:
        for needle, (p_yes, p_no) in self.rules:
            if needle in question:
                return BooleanVerdict(p_yes=p_yes, p_no=p_no)
        return BooleanVerdict(p_yes=self.default[0], p_no=self.default[1])


@dataclass
class CapturedCall:
    kind: str  # "complete" or "judge"
    request: ChatRequest | None = None
    context: str | None = None
    question: str | None = None


class RecordingBackend(Backend):
    """Wraps another backend and captures every call for assertions."""

    name = "mock-recording"

    def __init__(self, inner: Backend):
        self.inner = inner
        self.calls: list[CapturedCall] = []
        self._lock = threading.Lock()

    @property
    def complete_calls(self) -> list[CapturedCall]:
        return [c for c in self.calls if c.kind == "complete"]

    @property
    def judge_calls(self) -> list[CapturedCall]:
        return [c for c in self.calls if c.kind == "judge"]

    def complete(self, request: ChatRequest) -> BackendResult:
        with self._lock:
            self.calls.append(CapturedCall("complete", request=request))
        return self.inner.complete(request)

    def judge(self, context: str, question: str) -> BooleanVerdict:
        with self._lock:
            self.calls.append(CapturedCall("judge", context=context, question=question))
        return self.inner.judge(context, question)


def parse_mock_spec(spec: str) -> Backend:
    """Build a mock backend from a CLI/config string.

    Accepted forms: ``echo``, ``echo:SEED``, ``hash``, ``hash:SEED``,
    ``constant:P_YES,P_NO`` and ``script:reply1|reply2``.
    """
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "echo":
        return EchoBackend(seed=int(arg) if arg else 0)
    if kind == "hash":
        return HashSeededBackend(seed=int(arg) if arg else 0)
    if kind == "constant":
        try:
            p_yes_s, p_no_s = arg.split(",")
            return ConstantBackend(float(p_yes_s), float(p_no_s))
        except ValueError as exc:
            raise ValueError(f"bad constant mock spec {spec!r}; want constant:P_YES,P_NO") from exc
    if kind == "script":
        return ScriptBackend(replies=arg.split("|") if arg else [])
    raise ValueError(f"unknown mock profile {spec!r}")
