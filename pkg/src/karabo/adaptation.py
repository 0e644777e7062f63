"""Five-stage cultural adaptation of counseling instances.

Stage order is fixed: ubuntu rewrite, language simplification, clinical-term
removal, faith integration, proverb integration. Only counselor text is ever
modified. The two integration stages are stochastic: a judge call decides
whether the change would help, then a uniform gate draw against a threshold
decides whether it is actually applied. Every decision lands in a per-
instance audit trace.

Randomness is drawn from independent keyed streams per (seed, instance,
stage), so results are identical no matter how many workers run the
pipeline or in what order instances complete.
"""

from __future__ import annotations

import hashlib
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import TurnInstance
from .errors import ConfigError, EmptyCompletionError, KaraboError
from .gateway import ChatRequest, Gateway, Message

STAGE_UBUNTU = "ubuntu"
STAGE_SIMPLIFY = "simplify"
STAGE_DECLINICAL = "declinical"
STAGE_FAITH = "faith"
STAGE_PROVERB = "proverb"

STAGES = (STAGE_UBUNTU, STAGE_SIMPLIFY, STAGE_DECLINICAL, STAGE_FAITH, STAGE_PROVERB)

#: The three Ubuntu pillars driving the rewrite stage.
UBUNTU_PILLARS = ("Connectedness", "Competency", "Consciousness")

DEFAULT_UBUNTU_DESCRIPTION = (
    "Ubuntu is a Southern African philosophy of shared humanity: a person is a "
    "person through other people. It rests on three pillars. Connectedness: "
    "social bonds, relationships, a sense of belonging, and connection with "
    "divinity. Competency: personal development, responsible choices, good "
    "behavior, personal responsibility, future aspirations, and recognition of "
    "individual uniqueness. Consciousness: self-awareness, mindfulness, and "
    "understanding one's place in a broader social and cultural context."
)

DEFAULT_TEMPLATES = {
    STAGE_UBUNTU: (
        "{ubuntu_description}\n\n"
        "Below is one exchange from a counseling conversation.\n"
        "Client: {client_text}\n"
        "Counselor: {counselor_text}\n\n"
        "Rewrite the counselor's reply so it reflects the Ubuntu philosophy "
        "described above, keeping the therapeutic intent. Return only the "
        "rewritten counselor reply."
    ),
    STAGE_SIMPLIFY: (
        "Below is one exchange from a counseling conversation.\n"
        "Client: {client_text}\n"
        "Counselor: {counselor_text}\n\n"
        "Rewrite the counselor's reply in plain, everyday English that is easy "
        "to follow for someone whose first language is not English. Keep the "
        "meaning and warmth. Return only the rewritten counselor reply."
    ),
    STAGE_DECLINICAL: (
        "Below is one exchange from a counseling conversation.\n"
        "Client: {client_text}\n"
        "Counselor: {counselor_text}\n\n"
        "Rewrite the counselor's reply replacing clinical labels such as "
        "\"depression\" or \"anxiety\" with everyday physical or emotional "
        "descriptions of how the experience feels. Return only the rewritten "
        "counselor reply."
    ),
    STAGE_FAITH: (
        "Below is one exchange from a counseling conversation.\n"
        "Client: {client_text}\n"
        "Counselor: {counselor_text}\n\n"
        "Weave a short, relevant scripture-based comfort into the counselor's "
        "reply, keeping its counseling intent. Return only the rewritten "
        "counselor reply."
    ),
    STAGE_PROVERB: (
        "Below is one exchange from a counseling conversation.\n"
        "Client: {client_text}\n"
        "Counselor: {counselor_text}\n\n"
        "Weave this proverb naturally into the counselor's reply: {proverb}\n"
        "Return only the rewritten counselor reply."
    ),
}

DEFAULT_FAITH_QUESTION = (
    "Would adding scripture-based comfort enhance the counselor's response in "
    "this exchange? Respond with yes or no."
)
DEFAULT_PROVERB_BENEFIT_QUESTION = (
    "Would this exchange benefit from adding an African proverb to the "
    "counselor's response? Respond with yes or no."
)
DEFAULT_PROVERB_SUITABILITY_QUESTION = (
    "Is this proverb suitable for this context? Proverb: {proverb}"
)


@dataclass(frozen=True)
class AdaptationConfig:
    faith_threshold: float = 0.7
    proverb_threshold: float = 0.8
    max_proverb_attempts: int = 3
    rng_seed: int = 0
    stage_toggles: dict = field(default_factory=lambda: {s: True for s in STAGES})
    templates: dict = field(default_factory=lambda: dict(DEFAULT_TEMPLATES))
    ubuntu_description: str = DEFAULT_UBUNTU_DESCRIPTION
    faith_question: str = DEFAULT_FAITH_QUESTION
    proverb_benefit_question: str = DEFAULT_PROVERB_BENEFIT_QUESTION
    proverb_suitability_question: str = DEFAULT_PROVERB_SUITABILITY_QUESTION
    rewrite_temperature: float = 0.35
    rewrite_max_tokens: int = 1024

    def validate(self) -> None:
        if not (0.0 <= self.faith_threshold <= 1.0):
            raise ConfigError("faith_threshold must lie in [0, 1]")
        if not (0.0 <= self.proverb_threshold <= 1.0):
            raise ConfigError("proverb_threshold must lie in [0, 1]")
        if self.max_proverb_attempts < 1:
            raise ConfigError("max_proverb_attempts must be >= 1")
        for stage in STAGES:
            if stage not in self.stage_toggles:
                raise ConfigError(f"missing stage toggle for {stage!r}")
            if self.stage_toggles[stage] and not self.templates.get(stage, "").strip():
                raise ConfigError(f"enabled stage {stage!r} has an empty template")

    def enabled(self, stage: str) -> bool:
        return bool(self.stage_toggles.get(stage, False))


class ProverbRegistry:
    """Densely 1-indexed list of unique, non-empty proverb strings."""

    def __init__(self, entries: Sequence[str]):
        cleaned = [e.strip() for e in entries]
        if not cleaned:
            raise ConfigError("proverb registry is empty")
        if any(not e for e in cleaned):
            raise ConfigError("proverb registry contains empty entries")
        if len(set(cleaned)) != len(cleaned):
            raise ConfigError("proverb registry contains duplicate entries")
        self._entries = cleaned

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, index: int) -> str:
        """1-based lookup."""
        if not (1 <= index <= len(self._entries)):
            raise IndexError(f"proverb index {index} outside 1..{len(self._entries)}")
        return self._entries[index - 1]

    def entries(self) -> list[str]:
        return list(self._entries)

    @classmethod
    def load(cls, path: str | Path) -> "ProverbRegistry":
        """JSON array file, or plain text with one (optionally numbered) proverb per line."""
        raw = Path(path).read_text(encoding="utf-8")
        stripped = raw.lstrip()
        if stripped.startswith("["):
            return cls(json.loads(raw))
        entries = []
        for line in raw.splitlines():
            line = line.strip()
            if not line:
                continue
            head, _, rest = line.partition(".")
            if head.isdigit() and rest.strip():
                line = rest.strip()
            entries.append(line)
        return cls(entries)

    @classmethod
    def default(cls) -> "ProverbRegistry":
        from .resources import load_default_proverbs

        return cls(load_default_proverbs())


# ---------------------------------------------------------------------------
# Traces and stats
# ---------------------------------------------------------------------------


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class ProverbAttempt:
    index: int
    suitable: bool

    def to_json_obj(self) -> dict:
        return {"index": self.index, "suitable": self.suitable}


@dataclass
class StageTraceEntry:
    stage: str
    applied: bool
    before_hash: str
    after_hash: str
    judge_decision: bool | None = None
    gate_draw: float | None = None
    proverb_attempts: list[ProverbAttempt] = field(default_factory=list)
    skipped: bool = False  # stage toggle was off; the stage never ran
    warning: str | None = None
    error: str | None = None

    def to_json_obj(self) -> dict:
        return {
            "stage": self.stage,
            "applied": self.applied,
            "judge_decision": self.judge_decision,
            "gate_draw": self.gate_draw,
            "proverb_attempts": [a.to_json_obj() for a in self.proverb_attempts],
            "before_hash": self.before_hash,
            "after_hash": self.after_hash,
            "skipped": self.skipped,
            "warning": self.warning,
            "error": self.error,
        }


@dataclass
class AdaptationTrace:
    instance_id: str
    entries: list[StageTraceEntry] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {"instance_id": self.instance_id, "stages": [e.to_json_obj() for e in self.entries]}


@dataclass
class StageStats:
    eligible: int = 0
    judged_yes: int = 0
    gated_in: int = 0
    applied: int = 0

    def fraction_applied(self) -> float:
        return self.applied / self.eligible if self.eligible else 0.0

    def to_json_obj(self) -> dict:
        return {
            "eligible": self.eligible,
            "judged_yes": self.judged_yes,
            "gated_in": self.gated_in,
            "applied": self.applied,
            "fraction_applied": self.fraction_applied(),
        }


@dataclass
class MonitorStats:
    """Per-stage eligibility funnel plus running modification fractions."""

    per_stage: dict = field(default_factory=lambda: {s: StageStats() for s in STAGES})
    total_instances: int = 0
    errors: int = 0

    def observe(self, trace: AdaptationTrace) -> None:
        self.total_instances += 1
        had_error = False
        for entry in trace.entries:
            stats = self.per_stage[entry.stage]
            if entry.error is not None:
                had_error = True
                continue
            if entry.skipped:
                continue
            stats.eligible += 1
            # Unconditional rewrite stages pass straight through the funnel.
            judged_yes = entry.judge_decision if entry.judge_decision is not None else True
            if judged_yes:
                stats.judged_yes += 1
                gated_in = entry.gate_draw is None or entry.gate_draw <= self._threshold(entry.stage)
                if gated_in:
                    stats.gated_in += 1
                    if entry.applied:
                        stats.applied += 1
        if had_error:
            self.errors += 1

    # Thresholds are only needed to classify recorded draws; they are
    # attached when the pipeline builds the stats object.
    _faith_threshold: float = 0.7
    _proverb_threshold: float = 0.8

    def _threshold(self, stage: str) -> float:
        if stage == STAGE_FAITH:
            return self._faith_threshold
        if stage == STAGE_PROVERB:
            return self._proverb_threshold
        return 1.0

    def to_json_obj(self) -> dict:
        return {
            "total_instances": self.total_instances,
            "errors": self.errors,
            "per_stage": {s: self.per_stage[s].to_json_obj() for s in STAGES},
        }


# ---------------------------------------------------------------------------
# Stage execution
# ---------------------------------------------------------------------------


def stage_rng(seed: int, instance_id: str, stage: str) -> random.Random:
    """Independent keyed stream per (seed, instance, stage)."""
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big")
    h = hashlib.blake2b(f"{instance_id}\x1f{stage}".encode("utf-8"), key=key, digest_size=8)
    return random.Random(int.from_bytes(h.digest(), "big"))


def _skipped_entry(stage: str, counselor_text: str, *, disabled: bool = False) -> StageTraceEntry:
    digest = text_digest(counselor_text)
    return StageTraceEntry(
        stage=stage, applied=False, before_hash=digest, after_hash=digest, skipped=disabled
    )


def _render_template(config: AdaptationConfig, stage: str, instance: TurnInstance, **extra) -> str:
    try:
        return config.templates[stage].format(
            client_text=instance.client_text,
            counselor_text=instance.counselor_text,
            ubuntu_description=config.ubuntu_description,
            **extra,
        )
    except (KeyError, IndexError) as exc:
        raise ConfigError(f"bad template for stage {stage!r}: missing placeholder {exc}") from exc


def _rewrite(
    instance: TurnInstance,
    config: AdaptationConfig,
    gateway: Gateway,
    stage: str,
    prompt: str,
) -> tuple[TurnInstance, StageTraceEntry]:
    """Ask the gateway for a counselor rewrite; keep the original on empty output."""
    before = instance.counselor_text
    entry = StageTraceEntry(
        stage=stage, applied=False, before_hash=text_digest(before), after_hash=text_digest(before)
    )
    request = ChatRequest(
        system_prompt="",
        messages=(Message("user", prompt),),
        temperature=config.rewrite_temperature,
        max_tokens=config.rewrite_max_tokens,
    )
    try:
        rewritten = gateway.complete(request, stage=stage).strip()
    except EmptyCompletionError:
        entry.warning = "empty rewrite; original kept"
        return instance, entry
    if rewritten == before:
        return instance, entry
    entry.applied = True
    entry.after_hash = text_digest(rewritten)
    return replace(instance, counselor_text=rewritten), entry


def _instance_context(instance: TurnInstance) -> str:
    return f"Client: {instance.client_text}\nCounselor: {instance.counselor_text}"


def inject_ubuntu(instance, config, gateway) -> tuple[TurnInstance, StageTraceEntry]:
    if not config.enabled(STAGE_UBUNTU):
        return instance, _skipped_entry(STAGE_UBUNTU, instance.counselor_text, disabled=True)
    prompt = _render_template(config, STAGE_UBUNTU, instance)
    return _rewrite(instance, config, gateway, STAGE_UBUNTU, prompt)


def simplify_language(instance, config, gateway) -> tuple[TurnInstance, StageTraceEntry]:
    if not config.enabled(STAGE_SIMPLIFY):
        return instance, _skipped_entry(STAGE_SIMPLIFY, instance.counselor_text, disabled=True)
    prompt = _render_template(config, STAGE_SIMPLIFY, instance)
    return _rewrite(instance, config, gateway, STAGE_SIMPLIFY, prompt)


def remove_clinical_terms(instance, config, gateway) -> tuple[TurnInstance, StageTraceEntry]:
    if not config.enabled(STAGE_DECLINICAL):
        return instance, _skipped_entry(STAGE_DECLINICAL, instance.counselor_text, disabled=True)
    prompt = _render_template(config, STAGE_DECLINICAL, instance)
    return _rewrite(instance, config, gateway, STAGE_DECLINICAL, prompt)


def integrate_faith(
    instance: TurnInstance,
    config: AdaptationConfig,
    gateway: Gateway,
    rng: random.Random,
) -> tuple[TurnInstance, StageTraceEntry]:
    """Judge first; only a yes consumes a gate draw; apply when draw <= threshold."""
    if not config.enabled(STAGE_FAITH):
        return instance, _skipped_entry(STAGE_FAITH, instance.counselor_text, disabled=True)
    entry = _skipped_entry(STAGE_FAITH, instance.counselor_text)
    verdict = gateway.judge(_instance_context(instance), config.faith_question, stage=STAGE_FAITH)
    entry.judge_decision = verdict.yes
    if not verdict.yes:
        return instance, entry
    draw = rng.random()
    entry.gate_draw = draw
    if draw > config.faith_threshold:
        return instance, entry
    prompt = _render_template(config, STAGE_FAITH, instance)
    adapted, rewrite_entry = _rewrite(instance, config, gateway, STAGE_FAITH, prompt)
    rewrite_entry.judge_decision = entry.judge_decision
    rewrite_entry.gate_draw = entry.gate_draw
    return adapted, rewrite_entry


def integrate_proverb(
    instance: TurnInstance,
    config: AdaptationConfig,
    gateway: Gateway,
    rng: random.Random,
    registry: ProverbRegistry,
) -> tuple[TurnInstance, StageTraceEntry]:
    """Benefit judge, gate draw, then up to max_proverb_attempts suitability probes.

    Index draws are independent uniform over 1..N, so repeats are possible
    and each attempt is recorded. When no probe says suitable, the instance
    is left unchanged.
    """
    if not config.enabled(STAGE_PROVERB):
        return instance, _skipped_entry(STAGE_PROVERB, instance.counselor_text, disabled=True)
    entry = _skipped_entry(STAGE_PROVERB, instance.counselor_text)
    context = _instance_context(instance)
    verdict = gateway.judge(context, config.proverb_benefit_question, stage=STAGE_PROVERB)
    entry.judge_decision = verdict.yes
    if not verdict.yes:
        return instance, entry
    draw = rng.random()
    entry.gate_draw = draw
    if draw > config.proverb_threshold:
        return instance, entry
    chosen: str | None = None
    for _ in range(config.max_proverb_attempts):
        index = rng.randrange(1, len(registry) + 1)
        proverb = registry.get(index)
        question = config.proverb_suitability_question.format(proverb=proverb)
        suitable = gateway.judge(context, question, stage=STAGE_PROVERB).yes
        entry.proverb_attempts.append(ProverbAttempt(index=index, suitable=suitable))
        if suitable:
            chosen = proverb
            break
    if chosen is None:
        return instance, entry
    prompt = _render_template(config, STAGE_PROVERB, instance, proverb=chosen)
    adapted, rewrite_entry = _rewrite(instance, config, gateway, STAGE_PROVERB, prompt)
    rewrite_entry.judge_decision = entry.judge_decision
    rewrite_entry.gate_draw = entry.gate_draw
    rewrite_entry.proverb_attempts = entry.proverb_attempts
    return adapted, rewrite_entry


def adapt_instance(
    instance: TurnInstance,
    config: AdaptationConfig,
    gateway: Gateway,
    registry: ProverbRegistry,
) -> tuple[TurnInstance, AdaptationTrace]:
    """Run all five stages over one instance, collecting its audit trace.

    Gateway failures leave the instance unchanged at the failing stage
    (error recorded in the trace) and continue with later stages.
    """
    original_client = instance.client_text
    trace = AdaptationTrace(instance_id=instance.instance_id)
    current = instance
    for stage in STAGES:
        try:
            if stage == STAGE_UBUNTU:
                current, entry = inject_ubuntu(current, config, gateway)
            elif stage == STAGE_SIMPLIFY:
                current, entry = simplify_language(current, config, gateway)
            elif stage == STAGE_DECLINICAL:
                current, entry = remove_clinical_terms(current, config, gateway)
            elif stage == STAGE_FAITH:
                rng = stage_rng(config.rng_seed, instance.instance_id, STAGE_FAITH)
                current, entry = integrate_faith(current, config, gateway, rng)
            else:
                rng = stage_rng(config.rng_seed, instance.instance_id, STAGE_PROVERB)
                current, entry = integrate_proverb(current, config, gateway, rng, registry)
        except KaraboError as exc:
            entry = _skipped_entry(stage, current.counselor_text)
            entry.error = f"{exc.code}: {exc}"
        trace.entries.append(entry)
    assert current.client_text == original_client  # client text is immutable
    return current, trace


@dataclass
class PipelineResult:
    instances: list[TurnInstance]
    traces: list[AdaptationTrace]
    stats: MonitorStats


def run_pipeline(
    instances: Iterable[TurnInstance],
    config: AdaptationConfig,
    gateway: Gateway,
    registry: ProverbRegistry | None = None,
    *,
    workers: int = 1,
) -> PipelineResult:
    """Adapt every instance; output order equals input order.

    Instances are independent, so any worker count yields identical
    output: results are merged by input position and stats are folded in
    that order.
    """
    config.validate()
    if registry is None:
        registry = ProverbRegistry.default()
    items = list(instances)

    if workers <= 1:
        pairs = [adapt_instance(inst, config, gateway, registry) for inst in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(lambda inst: adapt_instance(inst, config, gateway, registry), items))

    stats = MonitorStats(
        _faith_threshold=config.faith_threshold, _proverb_threshold=config.proverb_threshold
    )
    adapted: list[TurnInstance] = []
    traces: list[AdaptationTrace] = []
    for instance, trace in pairs:
        adapted.append(instance)
        traces.append(trace)
        stats.observe(trace)
    return PipelineResult(adapted, traces, stats)


def serialize_traces(traces: Iterable[AdaptationTrace]) -> str:
    lines = [
        json.dumps(t.to_json_obj(), ensure_ascii=False, separators=(",", ":")) for t in traces
    ]
    return "".join(line + "\n" for line in lines)
