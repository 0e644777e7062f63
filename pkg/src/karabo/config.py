"""One structured config file for the whole platform.

YAML (JSON is valid YAML) with sections for the persona, greeting table,
crisis lexicon, generation parameters, and the gateway backend. Every
field has a shipped default, so an empty config is a working config.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .dialogue import (
    DEFAULT_CRISIS_LEXICON,
    DEFAULT_GREETINGS,
    DEFAULT_LANGUAGE,
    DEFAULT_SAFETY_NOTICE,
    GenerationParams,
    PersonaPrompt,
)
from .errors import ConfigError
from .gateway import Backend, OpenAIChatBackend, parse_mock_spec

CONFIG_ENV = "KARABO_CONFIG"


@dataclass
class AppConfig:
    persona: PersonaPrompt = field(default_factory=PersonaPrompt)
    generation: GenerationParams = field(default_factory=GenerationParams)
    greetings: dict = field(default_factory=lambda: dict(DEFAULT_GREETINGS))
    default_language: str = DEFAULT_LANGUAGE
    crisis_lexicon: tuple = DEFAULT_CRISIS_LEXICON
    safety_notice: str = DEFAULT_SAFETY_NOTICE
    backend_spec: str = "echo"
    provider_model: str = "gpt-4o-mini-2024-07-18"
    provider_base_url: str | None = None
    data_dir: str = "./data/conversations"
    cors_origins: tuple = ("*",)
    max_history_messages: int | None = None

    def build_backend(self) -> Backend:
        if self.backend_spec == "openai":
            return OpenAIChatBackend(
                base_url=self.provider_base_url, model=self.provider_model
            )
        return parse_mock_spec(self.backend_spec)


def _persona_from_obj(obj: dict) -> PersonaPrompt:
    kwargs = {}
    if "assistant_name" in obj:
        kwargs["assistant_name"] = obj["assistant_name"]
    if "ubuntu_pillars" in obj:
        pillars = obj["ubuntu_pillars"]
        if not isinstance(pillars, dict):
            raise ConfigError("ubuntu_pillars must map pillar name -> description")
        kwargs["ubuntu_pillars"] = dict(pillars)
    if "flow_steps" in obj:
        kwargs["flow_steps"] = tuple(obj["flow_steps"])
    if "communication_rules" in obj:
        kwargs["communication_rules"] = tuple(obj["communication_rules"])
    return PersonaPrompt(**kwargs)


def load_config(path: str | Path | None = None) -> AppConfig:
    """Load the config file (argument, else $KARABO_CONFIG, else defaults)."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    config = AppConfig()
    if path is None:
        return config
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping in {path}")

    if "persona" in raw:
        config.persona = _persona_from_obj(raw["persona"])
    if "generation" in raw:
        config.generation = GenerationParams(**raw["generation"])
    if "greetings" in raw:
        config.greetings = {k.casefold(): v for k, v in raw["greetings"].items()}
    for key in (
        "default_language",
        "safety_notice",
        "backend_spec",
        "provider_model",
        "provider_base_url",
        "data_dir",
        "max_history_messages",
    ):
        if key in raw:
            setattr(config, key, raw[key])
    if "crisis_lexicon" in raw:
        config.crisis_lexicon = tuple(raw["crisis_lexicon"])
    if "cors_origins" in raw:
        config.cors_origins = tuple(raw["cors_origins"])
    if config.default_language not in config.greetings:
        raise ConfigError(
            f"default_language {config.default_language!r} missing from greetings"
        )
    return config
