"""Exception hierarchy shared across the platform.

Every error carries a stable machine-readable ``code`` so CLI and HTTP
layers can emit structured error summaries.
"""

from __future__ import annotations


class KaraboError(Exception):
    """Base class for all platform errors."""

    code = "E_INTERNAL"

    def summary(self) -> dict:
        return {"code": self.code, "message": str(self)}


class SchemaError(KaraboError):
    """A corpus line failed validation (missing field, bad speaker tag, bad JSON)."""

    code = "E_SCHEMA"

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)

    def summary(self) -> dict:
        out = super().summary()
        out["line"] = self.line_no
        return out


class ConfigError(KaraboError):
    code = "E_CONFIG"


class ProviderError(KaraboError):
    """Transport or HTTP failure talking to the text-generation provider."""

    code = "E_PROVIDER"


class RateLimitError(ProviderError):
    """Provider kept returning rate-limit responses until the retry budget ran out."""

    code = "E_RATE_LIMIT"


class EmptyCompletionError(KaraboError):
    code = "E_EMPTY_COMPLETION"


class DegenerateVerdictError(KaraboError):
    """Both yes and no probabilities are zero; the verdict carries no signal."""

    code = "E_DEGENERATE"


class TemplateError(KaraboError):
    code = "E_TEMPLATE"


class EmptyInputError(KaraboError):
    code = "E_EMPTY_INPUT"


class UpstreamError(KaraboError):
    """A gateway failure surfaced through the conversation engine."""

    code = "E_UPSTREAM"


class EmptyDatasetError(KaraboError):
    code = "E_EMPTY_DATASET"


class RangeError(KaraboError):
    code = "E_RANGE"
