"""Replay the bundled case studies through the conversation engine.

Each case narrative is sent as the user message of a fresh conversation;
the reply is scored on all three dialogue-quality dimensions and run
through the cultural-linguistic detectors. With mock gateways and the
deterministic clock used here, output is byte-identical across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .adaptation import ProverbRegistry
from .cases import CaseStudyFixture
from .dialogue import Conversation, ConversationEngine
from .errors import KaraboError
from .evaluation import (
    DEFAULT_QUESTIONS,
    AggregateRow,
    ConversationReport,
    aggregate,
    detect_clinical_terms,
    detect_proverb,
    detect_scripture,
    evaluate_conversation,
    simplicity_metrics,
)
from .gateway import ASSISTANT, Gateway


def deterministic_clock(start: str = "2000-01-01T00:00:00+00:00"):
    """Monotonic fake clock so replay transcripts are reproducible."""
    del start  # fixed origin keeps the signature obvious
    counter = [0]

    def tick() -> str:
        counter[0] += 1
        return f"2000-01-01T00:00:{min(counter[0], 59):02d}+00:00"

    return tick


@dataclass
class LinguisticSummary:
    clinical_terms: list = field(default_factory=list)
    scripture_refs: list = field(default_factory=list)
    proverb_indices: list = field(default_factory=list)
    simplicity: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "clinical_terms": [m.to_json_obj() for m in self.clinical_terms],
            "scripture_refs": [r.to_json_obj() for r in self.scripture_refs],
            "proverb_indices": self.proverb_indices,
            "simplicity": self.simplicity,
        }


@dataclass
class CaseReplay:
    case_id: int
    conversation: Conversation | None
    report: ConversationReport | None
    linguistics: LinguisticSummary | None
    error: str | None = None

    def to_json_obj(self) -> dict:
        return {
            "case_id": self.case_id,
            "conversation": self.conversation.to_json_obj() if self.conversation else None,
            "report": self.report.to_json_obj() if self.report else None,
            "linguistics": self.linguistics.to_json_obj() if self.linguistics else None,
            "error": self.error,
        }


@dataclass
class ReplayResult:
    cases: list[CaseReplay]
    table: list[AggregateRow]


def replay_cases(
    fixtures: Sequence[CaseStudyFixture],
    engine: ConversationEngine,
    eval_gateway: Gateway,
    *,
    registry: ProverbRegistry | None = None,
    questions=DEFAULT_QUESTIONS,
) -> ReplayResult:
    """Run every fixture; per-case failures are recorded and replay continues."""
    if registry is None:
        registry = ProverbRegistry.default()
    cases: list[CaseReplay] = []
    reports: list[ConversationReport] = []
    for fixture in fixtures:
        try:
            conversation, _greet = engine.create("english")
            conversation.id = f"case-{fixture.case_id}"
            engine.respond(conversation, fixture.narrative)
            report = evaluate_conversation(conversation, questions, eval_gateway)
            report.conversation_id = str(fixture.case_id)
            assistant_text = "\n".join(
                m.text for m in conversation.messages if m.role == ASSISTANT
            )
            linguistics = LinguisticSummary(
                clinical_terms=detect_clinical_terms(assistant_text),
                scripture_refs=detect_scripture(assistant_text),
                proverb_indices=detect_proverb(assistant_text, registry),
                simplicity=simplicity_metrics(assistant_text).to_json_obj(),
            )
        except KaraboError as exc:
            cases.append(
                CaseReplay(fixture.case_id, None, None, None, error=f"{exc.code}: {exc}")
            )
            continue
        cases.append(CaseReplay(fixture.case_id, conversation, report, linguistics))
        reports.append(report)
    return ReplayResult(cases=cases, table=aggregate(reports))
