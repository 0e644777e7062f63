from .core import (
    ASSISTANT,
    USER,
    Backend,
    BackendResult,
    BooleanVerdict,
    ChatRequest,
    Gateway,
    Message,
    RateLimitedError,
    StageUsage,
    TransientBackendError,
    UsageLedger,
    estimate_tokens,
)
from .fixtures import FixtureBackend, FixtureRecorder
from .http_provider import OpenAIChatBackend
from .mocks import (
    MOCK_PREFIX,
    CapturedCall,
    ConstantBackend,
    EchoBackend,
    HashSeededBackend,
    RecordingBackend,
    RuleJudgeBackend,
    ScriptBackend,
    parse_mock_spec,
)

__all__ = [
    "ASSISTANT",
    "USER",
    "Backend",
    "BackendResult",
    "BooleanVerdict",
    "ChatRequest",
    "Gateway",
    "Message",
    "RateLimitedError",
    "StageUsage",
    "TransientBackendError",
    "UsageLedger",
    "estimate_tokens",
    "FixtureBackend",
    "FixtureRecorder",
    "OpenAIChatBackend",
    "MOCK_PREFIX",
    "CapturedCall",
    "ConstantBackend",
    "EchoBackend",
    "HashSeededBackend",
    "RecordingBackend",
    "RuleJudgeBackend",
    "ScriptBackend",
    "parse_mock_spec",
]
