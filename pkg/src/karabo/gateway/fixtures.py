"""Recorded-fixture backend: replay provider responses from JSONL files.

Each line maps a request hash to a response:

    {"hash": "...", "kind": "complete", "text": "..."}
    {"hash": "...", "kind": "judge", "p_yes": 0.3, "p_no": 0.1}

Hashes are computed over a canonical JSON encoding of the request so a
recorded session replays byte-for-byte regardless of dict ordering.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path

from ..errors import ProviderError
from .core import Backend, BackendResult, BooleanVerdict, ChatRequest, estimate_tokens


def _canonical_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def complete_request_hash(request: ChatRequest) -> str:
    return _canonical_hash(
        {
            "kind": "complete",
            "system_prompt": request.system_prompt,
            "messages": [[m.role, m.text] for m in request.messages],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
            "frequency_penalty": request.frequency_penalty,
            "presence_penalty": request.presence_penalty,
        }
    )


def judge_request_hash(context: str, question: str) -> str:
    return _canonical_hash({"kind": "judge", "context": context, "question": question})


class FixtureBackend(Backend):
    """Replays recorded responses; unknown requests are an error."""

    name = "fixture"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._responses: dict[str, dict] = {}
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                self._responses[obj["hash"]] = obj

    def _lookup(self, digest: str, kind: str) -> dict:
        obj = self._responses.get(digest)
        if obj is None or obj.get("kind") != kind:
            raise ProviderError(
                f"no recorded {kind} response for hash {digest[:12]} in {self.path}"
            )
        return obj

    def complete(self, request: ChatRequest) -> BackendResult:
        obj = self._lookup(complete_request_hash(request), "complete")
        text = obj["text"]
        return BackendResult(text, completion_tokens=estimate_tokens(text))

    def judge(self, context: str, question: str) -> BooleanVerdict:
        obj = self._lookup(judge_request_hash(context, question), "judge")
        return BooleanVerdict(p_yes=float(obj["p_yes"]), p_no=float(obj["p_no"]))


class FixtureRecorder(Backend):
    """Passes calls through to a live backend while appending fixture lines."""

    name = "fixture-recorder"

    def __init__(self, inner: Backend, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()

    def _append(self, obj: dict) -> None:
        line = json.dumps(obj, ensure_ascii=False, separators=(",", ":"))
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def complete(self, request: ChatRequest) -> BackendResult:
        result = self.inner.complete(request)
        self._append(
            {"hash": complete_request_hash(request), "kind": "complete", "text": result.text}
        )
        return result

    def judge(self, context: str, question: str) -> BooleanVerdict:
        verdict = self.inner.judge(context, question)
        self._append(
            {
                "hash": judge_request_hash(context, question),
                "kind": "judge",
                "p_yes": verdict.p_yes,
                "p_no": verdict.p_no,
            }
        )
        return verdict
