"""Adapter for OpenAI-style chat-completion HTTP providers.

Completion posts the standard chat JSON body. Judging requests the top
log-probabilities of the first generated token and pools the mass of
tokens spelling "yes"/"no" (any case, with or without a leading space).
"""

from __future__ import annotations

import math
import os

import httpx

from .core import (
    Backend,
    BackendResult,
    BooleanVerdict,
    ChatRequest,
    RateLimitedError,
    TransientBackendError,
)

BASE_URL_ENV = "KARABO_PROVIDER_BASE_URL"
API_KEY_ENV = "KARABO_PROVIDER_API_KEY"

JUDGE_INSTRUCTION = "Answer the question with a single word: Yes or No."


class OpenAIChatBackend(Backend):
    name = "openai-chat"

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str = "gpt-4o-mini-2024-07-18",
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV, "https://api.openai.com/v1")).rstrip("/")
        self.api_key = api_key or os.environ.get(API_KEY_ENV, "")
        self.model = model
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _post(self, body: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self._client.post(
                f"{self.base_url}/chat/completions", json=body, headers=headers
            )
        except httpx.HTTPError as exc:
            raise TransientBackendError(f"transport failure: {exc}") from exc
        if response.status_code == 429:
            raise RateLimitedError("HTTP 429")
        if response.status_code >= 500:
            raise TransientBackendError(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            # Client errors will not improve on retry; let them surface.
            raise RuntimeError(f"provider rejected request: HTTP {response.status_code}: {response.text[:200]}")
        return response.json()

    @staticmethod
    def _chat_messages(request: ChatRequest) -> list[dict]:
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.extend({"role": m.role, "content": m.text} for m in request.messages)
        return messages

    def complete(self, request: ChatRequest) -> BackendResult:
        body = {
            "model": self.model,
            "messages": self._chat_messages(request),
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
            "frequency_penalty": request.frequency_penalty,
            "presence_penalty": request.presence_penalty,
        }
        data = self._post(body)
        text = data["choices"][0]["message"]["content"] or ""
        usage = data.get("usage", {})
        return BackendResult(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        )

    def judge(self, context: str, question: str) -> BooleanVerdict:
        prompt = question if not context else f"{context}\n\n{question}"
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": JUDGE_INSTRUCTION},
                {"role": "user", "content": prompt},
            ],
            "temperature": 0.0,
            "max_tokens": 1,
            "logprobs": True,
            "top_logprobs": 20,
        }
        data = self._post(body)
        content = data["choices"][0].get("logprobs", {}).get("content") or []
        top = content[0].get("top_logprobs", []) if content else []
        p_yes = p_no = 0.0
        for entry in top:
            token = entry.get("token", "").strip().casefold()
            prob = math.exp(entry.get("logprob", float("-inf")))
            if token == "yes":
                p_yes += prob
            elif token == "no":
                p_no += prob
        return BooleanVerdict(p_yes=min(p_yes, 1.0), p_no=min(p_no, 1.0))
