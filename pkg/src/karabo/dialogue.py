"""The Karabo conversation engine.

Persona system-prompt assembly, localized static greetings, generation
parameter enforcement, per-conversation state with a basic crisis screen,
and export of adapted instances as a fine-tune training file plus job
manifest.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .corpus import TurnInstance
from .errors import (
    EmptyDatasetError,
    EmptyInputError,
    KaraboError,
    TemplateError,
    UpstreamError,
)
from .gateway import ASSISTANT, USER, ChatRequest, Gateway, Message

DEFAULT_ASSISTANT_NAME = "Karabo"
DEFAULT_LANGUAGE = "english"

#: Static greeting table; greetings never touch the gateway.
DEFAULT_GREETINGS = {
    "english": "Hi, I'm Karabo",
    "setswana": "Dumela, kenna Karabo",
    "isizulu": "Sawubona, ngingu Karabo",
}

DEFAULT_PILLAR_DESCRIPTIONS = {
    "Connectedness": (
        "social bonds, relationships, a sense of belonging, and connection with divinity"
    ),
    "Competency": (
        "personal development, responsible choices, good behavior, and future aspirations"
    ),
    "Consciousness": (
        "self-awareness, mindfulness, and understanding one's place in a broader social "
        "and cultural context"
    ),
}

DEFAULT_FLOW_STEPS = (
    "First, it identifies symptoms of depression or anxiety based on user input.",
    "It then engages the user empathetically, exploring the reasons behind their "
    "emotional state.",
    "Using cognitive restructuring techniques helps the user challenge negative "
    "thoughts and move toward a more adaptive mindset.",
    "This is followed by behavioral activation rooted in Ubuntu philosophy, "
    "encouraging actionable steps that promote well-being through self-awareness, "
    "social connectedness, and community participation.",
    "Throughout the interaction, the assistant periodically checks the user's "
    "emotional state to ensure the conversation remains supportive and responsive "
    "to their needs.",
)

DEFAULT_COMMUNICATION_RULES = (
    "If appropriate, the assistant assumes the user is Christian and may use "
    "scripture for comfort.",
    "It incorporates relevant idioms to enhance relatability.",
    'It avoids clinical terms like "anxiety" or "depression" to reduce stigma.',
)

DEFAULT_CRISIS_LEXICON = (
    "end my life",
    "kill myself",
    "suicide",
    "want to die",
    "hurt myself",
    "harming myself",
    "self harm",
    "no reason to live",
    "end it all",
)

DEFAULT_SAFETY_NOTICE = (
    "If you are in crisis or thinking about harming yourself, please reach out "
    "now: call the South African Depression and Anxiety Group (SADAG) 24-hour "
    "helpline on 0800 567 567, or the Suicide Crisis Line on 0800 12 13 14."
)


@dataclass(frozen=True)
class PersonaPrompt:
    assistant_name: str = DEFAULT_ASSISTANT_NAME
    ubuntu_pillars: dict = field(
        default_factory=lambda: dict(DEFAULT_PILLAR_DESCRIPTIONS)
    )
    flow_steps: tuple[str, ...] = DEFAULT_FLOW_STEPS
    communication_rules: tuple[str, ...] = DEFAULT_COMMUNICATION_RULES


def render_system_prompt(persona: PersonaPrompt) -> str:
    """Deterministic persona prompt; name, pillars, flow, and rules in order."""
    if not persona.assistant_name.strip():
        raise TemplateError("assistant name is empty")
    if len(persona.ubuntu_pillars) != 3:
        raise TemplateError(
            f"expected 3 Ubuntu pillars, got {len(persona.ubuntu_pillars)}"
        )
    if not persona.flow_steps or not persona.communication_rules:
        raise TemplateError("flow steps and communication rules must be non-empty")
    pillar_names = list(persona.ubuntu_pillars)
    intro = (
        f"Your name is {persona.assistant_name}, an empathetic and engaging assistant "
        "who provides support based on the Ubuntu philosophy, which emphasizes "
        f"{pillar_names[0]}, {pillar_names[1]}, and {pillar_names[2]}. "
        + " ".join(
            f"{name} covers {desc}." for name, desc in persona.ubuntu_pillars.items()
        )
        + " Your goal is to guide users with compassion, helping them strengthen "
        "their social bonds, make responsible choices, develop self-awareness, and "
        "understand their place within their community and the broader cultural "
        "context. Your overall aim is to help alleviate symptoms of depression, "
        "anxiety, and stress."
    )
    flow = (
        "To achieve the goal of alleviating user distress, the assistant follows a "
        "structured conversational flow. " + " ".join(persona.flow_steps)
    )
    rules = (
        "Communication is guided by culturally and contextually sensitive "
        "principles. " + " ".join(persona.communication_rules)
        + " The overarching objective is to provide compassionate, culturally "
        "aligned support that helps the user feel better."
    )
    return "\n\n".join([intro, flow, rules])


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.35
    max_tokens: int = 2048
    top_p: float = 1.0
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0


@dataclass(frozen=True)
class GreetingResult:
    text: str
    language: str
    fallback: bool
    requested: str | None


def greeting(
    language: str | None,
    greetings: dict | None = None,
    default_language: str = DEFAULT_LANGUAGE,
) -> GreetingResult:
    """Static greeting lookup; unknown languages fall back with a warning flag."""
    table = greetings if greetings is not None else DEFAULT_GREETINGS
    key = (language or "").strip().casefold()
    if key in table:
        return GreetingResult(table[key], key, fallback=False, requested=language)
    return GreetingResult(
        table[default_language], default_language, fallback=True, requested=language
    )


@dataclass(frozen=True)
class SafetyFlag:
    phrase: str
    message_index: int
    timestamp: str

    def to_json_obj(self) -> dict:
        return {
            "phrase": self.phrase,
            "message_index": self.message_index,
            "timestamp": self.timestamp,
        }


def crisis_screen(text: str, lexicon: Sequence[str] = DEFAULT_CRISIS_LEXICON) -> str | None:
    """Name of the first matched lexicon phrase, or None."""
    folded = text.casefold()
    for phrase in lexicon:
        if phrase.casefold() in folded:
            return phrase
    return None


@dataclass
class ChatMessage:
    role: str  # USER or ASSISTANT
    text: str
    timestamp: str

    def to_json_obj(self) -> dict:
        return {"role": self.role, "text": self.text, "timestamp": self.timestamp}


@dataclass
class Conversation:
    id: str
    language_pref: str
    created_at: str
    updated_at: str
    messages: list[ChatMessage] = field(default_factory=list)
    safety_flags: list[SafetyFlag] = field(default_factory=list)
    last_error: str | None = None

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "language_pref": self.language_pref,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "messages": [m.to_json_obj() for m in self.messages],
            "safety_flags": [f.to_json_obj() for f in self.safety_flags],
            "last_error": self.last_error,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Conversation":
        return cls(
            id=obj["id"],
            language_pref=obj["language_pref"],
            created_at=obj["created_at"],
            updated_at=obj["updated_at"],
            messages=[ChatMessage(**m) for m in obj.get("messages", [])],
            safety_flags=[SafetyFlag(**f) for f in obj.get("safety_flags", [])],
            last_error=obj.get("last_error"),
        )


def _utc_now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat()


def random_conversation_id() -> str:
    return secrets.token_hex(16)


@dataclass
class AssistantReply:
    message: ChatMessage
    safety_flag: SafetyFlag | None
    safety_notice: str | None


class ConversationEngine:
    """Creates conversations and produces assistant replies through a gateway.

    Respond calls on the same conversation are serialized by an internal
    per-id lock; distinct conversations proceed in parallel. Clock and id
    factory are injectable so replays can be made fully deterministic.
    """

    def __init__(
        self,
        gateway: Gateway,
        *,
        persona: PersonaPrompt | None = None,
        params: GenerationParams | None = None,
        greetings: dict | None = None,
        default_language: str = DEFAULT_LANGUAGE,
        crisis_lexicon: Sequence[str] = DEFAULT_CRISIS_LEXICON,
        safety_notice: str = DEFAULT_SAFETY_NOTICE,
        max_history_messages: int | None = None,
        clock: Callable[[], str] = _utc_now_rfc3339,
        id_factory: Callable[[], str] = random_conversation_id,
    ):
        self.gateway = gateway
        self.persona = persona or PersonaPrompt()
        self.params = params or GenerationParams()
        self.greetings = dict(greetings) if greetings is not None else dict(DEFAULT_GREETINGS)
        self.default_language = default_language
        self.crisis_lexicon = tuple(crisis_lexicon)
        self.safety_notice = safety_notice
        self.max_history_messages = max_history_messages
        self.clock = clock
        self.id_factory = id_factory
        self.system_prompt = render_system_prompt(self.persona)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, conversation_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(conversation_id, threading.Lock())

    def _next_timestamp(self, conversation: Conversation) -> str:
        # Clamp so timestamps never go backwards even with a coarse clock.
        now = self.clock()
        return max(now, conversation.updated_at)

    def greeting(self, language: str | None) -> GreetingResult:
        return greeting(language, self.greetings, self.default_language)

    def create(self, language: str | None = None) -> tuple[Conversation, GreetingResult]:
        greet = self.greeting(language)
        now = self.clock()
        conversation = Conversation(
            id=self.id_factory(),
            language_pref=greet.language,
            created_at=now,
            updated_at=now,
        )
        return conversation, greet

    def _history(self, conversation: Conversation) -> list[Message]:
        messages = [Message(m.role, m.text) for m in conversation.messages]
        limit = self.max_history_messages
        if limit is not None and len(messages) > limit:
            # Drop oldest pairs first, keeping the first index a user turn.
            drop = len(messages) - limit
            drop += drop % 2
            messages = messages[drop:]
        return messages

    def respond(
        self,
        conversation: Conversation,
        user_text: str,
        params: GenerationParams | None = None,
    ) -> AssistantReply:
        """Append the user turn, call the gateway, append the assistant turn.

        On upstream failure the conversation keeps the user message plus an
        error marker, and UpstreamError is raised.
        """
        if not user_text.strip():
            raise EmptyInputError("user text is empty")
        params = params or self.params
        with self._lock_for(conversation.id):
            flag = None
            matched = crisis_screen(user_text, self.crisis_lexicon)
            if matched is not None:
                flag = SafetyFlag(
                    phrase=matched,
                    message_index=len(conversation.messages),
                    timestamp=self._next_timestamp(conversation),
                )
                conversation.safety_flags.append(flag)
            ts = self._next_timestamp(conversation)
            conversation.messages.append(ChatMessage(USER, user_text, ts))
            conversation.updated_at = ts
            request = ChatRequest(
                system_prompt=self.system_prompt,
                messages=tuple(self._history(conversation)),
                temperature=params.temperature,
                top_p=params.top_p,
                max_tokens=params.max_tokens,
                frequency_penalty=params.frequency_penalty,
                presence_penalty=params.presence_penalty,
            )
            try:
                text = self.gateway.complete(request, stage="chat")
            except KaraboError as exc:
                conversation.last_error = f"{exc.code}: {exc}"
                raise UpstreamError(str(exc)) from exc
            ts = self._next_timestamp(conversation)
            message = ChatMessage(ASSISTANT, text, ts)
            conversation.messages.append(message)
            conversation.updated_at = ts
            conversation.last_error = None
            return AssistantReply(
                message=message,
                safety_flag=flag,
                safety_notice=self.safety_notice if flag else None,
            )


# ---------------------------------------------------------------------------
# Fine-tune export
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FineTuneJobSpec:
    base_model: str = "gpt-4o-mini-2024-07-18"
    epochs: int = 3
    batch_size: int = 11
    lr_multiplier: float = 1.8
    seed: int = 2038458019
    training_file: str = "training.jsonl"


def export_finetune_spec(
    instances: Iterable[TurnInstance],
    persona: PersonaPrompt,
    spec: FineTuneJobSpec,
    out_dir: str | Path,
) -> dict:
    """Write the chat-format training file and a manifest echoing the job spec.

    Each training line is a three-message example: rendered persona prompt,
    client text, counselor text.
    """
    items = list(instances)
    if not items:
        raise EmptyDatasetError("no instances to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    system_prompt = render_system_prompt(persona)
    training_path = out / spec.training_file
    with open(training_path, "w", encoding="utf-8") as fh:
        for inst in items:
            example = {
                "messages": [
                    {"role": "system", "content": system_prompt},
                    {"role": "user", "content": inst.client_text},
                    {"role": "assistant", "content": inst.counselor_text},
                ]
            }
            fh.write(json.dumps(example, ensure_ascii=False, separators=(",", ":")) + "\n")
    manifest = {
        "base_model": spec.base_model,
        "epochs": spec.epochs,
        "batch_size": spec.batch_size,
        "lr_multiplier": spec.lr_multiplier,
        "seed": spec.seed,
        "training_file": str(training_path),
        "n_examples": len(items),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return manifest
