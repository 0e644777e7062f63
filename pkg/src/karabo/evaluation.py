"""Dialogue-quality scoring, cultural-linguistic detectors, and rating math.

Each assistant turn is scored on three dimensions by asking the judge a
yes/no question about the response given the preceding conversation; the
dimension score is the normalized yes probability
p_yes / (p_yes + p_no). Detectors flag clinical terms, scripture
references, and registry proverbs; expert ratings aggregate as per-section
and pooled means.
"""

from __future__ import annotations

import csv
import json
import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .adaptation import ProverbRegistry
from .dialogue import Conversation
from .errors import DegenerateVerdictError, KaraboError, RangeError, SchemaError
from .gateway import ASSISTANT, USER, BooleanVerdict, Gateway

NATURALNESS = "naturalness"
UNDERSTANDABILITY = "understandability"
COHERENCE = "coherence"
DIMENSIONS = (NATURALNESS, UNDERSTANDABILITY, COHERENCE)


@dataclass(frozen=True)
class DimensionQuestion:
    dimension: str
    question: str


DEFAULT_QUESTIONS = (
    DimensionQuestion(NATURALNESS, "Does this response sound natural and human-like?"),
    DimensionQuestion(UNDERSTANDABILITY, "Is this response clear and easy to understand?"),
    DimensionQuestion(
        COHERENCE,
        "Is this response logically consistent and contextually relevant to the conversation?",
    ),
)


def _check_questions(questions: Sequence[DimensionQuestion]) -> None:
    seen = [q.dimension for q in questions]
    if sorted(seen) != sorted(DIMENSIONS):
        raise ValueError(f"need exactly one question per dimension, got {seen}")


def score_turn(context: str, response: str, verdict: BooleanVerdict) -> float:
    """Normalized yes probability for one dimension question."""
    del context, response  # carried for signature parity; the verdict is enough
    total = verdict.p_yes + verdict.p_no
    if total == 0.0:
        raise DegenerateVerdictError("p_yes and p_no are both zero")
    return verdict.p_yes / total


@dataclass
class TurnScore:
    turn_index: int  # 1-based assistant-turn ordinal
    scores: dict  # dimension -> score in [0, 1]
    low_context_flag: bool

    def to_json_obj(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "scores": {d: self.scores[d] for d in DIMENSIONS},
            "low_context_flag": self.low_context_flag,
        }


@dataclass
class ConversationReport:
    conversation_id: str
    turn_scores: list[TurnScore] = field(default_factory=list)
    means: dict = field(default_factory=dict)
    incomplete: bool = False
    error: str | None = None

    def to_json_obj(self) -> dict:
        return {
            "conversation_id": self.conversation_id,
            "turn_scores": [t.to_json_obj() for t in self.turn_scores],
            "means": {d: self.means.get(d) for d in DIMENSIONS},
            "incomplete": self.incomplete,
            "error": self.error,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ConversationReport":
        return cls(
            conversation_id=obj["conversation_id"],
            turn_scores=[
                TurnScore(t["turn_index"], t["scores"], t["low_context_flag"])
                for t in obj.get("turn_scores", [])
            ],
            means=obj.get("means", {}),
            incomplete=obj.get("incomplete", False),
            error=obj.get("error"),
        )


def _label(role: str) -> str:
    return "User" if role == USER else "Assistant"


def build_context(messages: Sequence, upto: int) -> str:
    """Speaker-labeled concatenation of messages strictly before index upto."""
    return "\n".join(f"{_label(m.role)}: {m.text}" for m in messages[:upto])


def evaluate_conversation(
    conversation: Conversation,
    questions: Sequence[DimensionQuestion] = DEFAULT_QUESTIONS,
    gateway: Gateway | None = None,
    *,
    exclude_first_turn: bool = False,
) -> ConversationReport:
    """Score every assistant turn on all three dimensions.

    Context for turn k is everything strictly before it; the first
    assistant turn is flagged low-context rather than dropped (dropping is
    opt-in via exclude_first_turn, which only affects the means).
    """
    _check_questions(questions)
    if gateway is None:
        raise ValueError("gateway is required")
    assistant_indices = [
        i for i, m in enumerate(conversation.messages) if m.role == ASSISTANT
    ]
    if not assistant_indices:
        raise ValueError("conversation has no assistant messages")
    report = ConversationReport(conversation_id=conversation.id)
    for ordinal, msg_index in enumerate(assistant_indices, start=1):
        response = conversation.messages[msg_index].text
        context = build_context(conversation.messages, msg_index)
        scores = {}
        try:
            for q in questions:
                question = f"{q.question}\n\nResponse: {response}"
                verdict = gateway.judge(context, question, stage="evaluate")
                scores[q.dimension] = score_turn(context, response, verdict)
        except KaraboError as exc:
            report.incomplete = True
            report.error = f"{exc.code}: {exc}"
            break
        report.turn_scores.append(
            TurnScore(turn_index=ordinal, scores=scores, low_context_flag=ordinal == 1)
        )
    scored = report.turn_scores
    if exclude_first_turn and len(scored) > 1:
        scored = [t for t in scored if not t.low_context_flag]
    if scored:
        report.means = {
            d: sum(t.scores[d] for t in scored) / len(scored) for d in DIMENSIONS
        }
    return report


@dataclass
class AggregateRow:
    case: str
    means: dict

    def to_json_obj(self) -> dict:
        return {"case": self.case, **{d: self.means.get(d) for d in DIMENSIONS}}


def aggregate(reports: Iterable[ConversationReport]) -> list[AggregateRow]:
    """One row per report plus an overall row of grand means."""
    rows = [AggregateRow(r.conversation_id, dict(r.means)) for r in reports]
    if rows:
        overall = {
            d: sum(row.means[d] for row in rows) / len(rows) for d in DIMENSIONS
        }
        rows.append(AggregateRow("overall", overall))
    return rows


# ---------------------------------------------------------------------------
# Cultural-linguistic detectors
# ---------------------------------------------------------------------------

DEFAULT_CLINICAL_LEXICON = (
    "depression",
    "depressed",
    "anxiety",
    "anxious",
    "disorder",
    "diagnosis",
)


@dataclass(frozen=True)
class TermMatch:
    term: str
    start: int
    end: int
    text: str

    def to_json_obj(self) -> dict:
        return {"term": self.term, "start": self.start, "end": self.end, "text": self.text}


def detect_clinical_terms(
    text: str, lexicon: Sequence[str] = DEFAULT_CLINICAL_LEXICON
) -> list[TermMatch]:
    """Case-insensitive whole-word matches; longest terms win, no overlaps."""
    if not lexicon:
        return []
    ordered = sorted(set(lexicon), key=len, reverse=True)
    pattern = re.compile(
        r"\b(" + "|".join(re.escape(t) for t in ordered) + r")\b", re.IGNORECASE
    )
    return [
        TermMatch(m.group(1).casefold(), m.start(), m.end(), m.group(0))
        for m in pattern.finditer(text)
    ]


#: Standard 66-book canon, longest-first when compiled so numbered books win.
DEFAULT_CANON = (
    "Genesis", "Exodus", "Leviticus", "Numbers", "Deuteronomy", "Joshua",
    "Judges", "Ruth", "1 Samuel", "2 Samuel", "1 Kings", "2 Kings",
    "1 Chronicles", "2 Chronicles", "Ezra", "Nehemiah", "Esther", "Job",
    "Psalms", "Psalm", "Proverbs", "Ecclesiastes", "Song of Solomon",
    "Isaiah", "Jeremiah", "Lamentations", "Ezekiel", "Daniel", "Hosea",
    "Joel", "Amos", "Obadiah", "Jonah", "Micah", "Nahum", "Habakkuk",
    "Zephaniah", "Haggai", "Zechariah", "Malachi", "Matthew", "Mark",
    "Luke", "John", "Acts", "Romans", "1 Corinthians", "2 Corinthians",
    "Galatians", "Ephesians", "Philippians", "Colossians",
    "1 Thessalonians", "2 Thessalonians", "1 Timothy", "2 Timothy",
    "Titus", "Philemon", "Hebrews", "James", "1 Peter", "2 Peter",
    "1 John", "2 John", "3 John", "Jude", "Revelation",
)


@dataclass(frozen=True)
class ScriptureRef:
    book: str
    chapter: int
    verse_start: int
    verse_end: int | None
    start: int
    end: int

    def to_json_obj(self) -> dict:
        return {
            "book": self.book,
            "chapter": self.chapter,
            "verse_start": self.verse_start,
            "verse_end": self.verse_end,
            "start": self.start,
            "end": self.end,
        }


def _canon_pattern(canon: Sequence[str]) -> re.Pattern:
    names = sorted(canon, key=len, reverse=True)
    alternation = "|".join(re.escape(n) for n in names)
    return re.compile(
        rf"\b({alternation})\s+(\d+):(\d+)(?:\s*[-–]\s*(\d+))?\b", re.IGNORECASE
    )


def detect_scripture(text: str, canon: Sequence[str] = DEFAULT_CANON) -> list[ScriptureRef]:
    """Book Chapter:Verse[-Verse] references; a bare N:M never matches."""
    canonical = {name.casefold(): name for name in canon}
    refs = []
    for m in _canon_pattern(canon).finditer(text):
        refs.append(
            ScriptureRef(
                book=canonical[m.group(1).casefold()],
                chapter=int(m.group(2)),
                verse_start=int(m.group(3)),
                verse_end=int(m.group(4)) if m.group(4) else None,
                start=m.start(),
                end=m.end(),
            )
        )
    return refs


def _squash(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip().casefold()


def detect_proverb(text: str, registry: ProverbRegistry) -> list[int]:
    """1-based registry indices whose normalized text occurs in the input."""
    haystack = _squash(text)
    return [
        index
        for index, proverb in enumerate(registry.entries(), start=1)
        if _squash(proverb) in haystack
    ]


_SENTENCE_SPLIT = re.compile(r"[.!?]+")
_PUNCT = string.punctuation + "‘’“”"

LONG_WORD_CHARS = 8


@dataclass(frozen=True)
class SimplicityMetrics:
    mean_sentence_length_words: float
    mean_word_length_chars: float
    long_word_ratio: float
    empty: bool

    def to_json_obj(self) -> dict:
        return {
            "mean_sentence_length_words": self.mean_sentence_length_words,
            "mean_word_length_chars": self.mean_word_length_chars,
            "long_word_ratio": self.long_word_ratio,
            "empty": self.empty,
        }


def simplicity_metrics(text: str) -> SimplicityMetrics:
    """Surface proxies for plain language: short sentences, short words."""
    if not text.strip():
        return SimplicityMetrics(0.0, 0.0, 0.0, empty=True)
    sentences = [s for s in (_SENTENCE_SPLIT.split(text)) if s.strip()]
    words_per_sentence = []
    words: list[str] = []
    for sentence in sentences:
        tokens = [w.strip(_PUNCT) for w in sentence.split()]
        tokens = [w for w in tokens if w]
        words_per_sentence.append(len(tokens))
        words.extend(tokens)
    if not words:
        return SimplicityMetrics(0.0, 0.0, 0.0, empty=True)
    return SimplicityMetrics(
        mean_sentence_length_words=sum(words_per_sentence) / len(sentences),
        mean_word_length_chars=sum(len(w) for w in words) / len(words),
        long_word_ratio=sum(1 for w in words if len(w) > LONG_WORD_CHARS) / len(words),
        empty=False,
    )


# ---------------------------------------------------------------------------
# Expert rating aggregation
# ---------------------------------------------------------------------------

LIKERT_SECTIONS = ("ubuntu", "faith", "proverb")


@dataclass(frozen=True)
class LikertRating:
    section: str
    item_id: str
    rater_id: str
    score: int


@dataclass
class LikertSummary:
    section_means: dict
    section_counts: dict
    overall_mean: float
    total: int

    def to_json_obj(self) -> dict:
        return {
            "section_means": self.section_means,
            "section_counts": self.section_counts,
            "overall_mean": self.overall_mean,
            "total": self.total,
        }


def likert_summary(ratings: Iterable[LikertRating]) -> LikertSummary:
    """Per-section means plus the pooled mean over every individual rating.

    Scores outside 1..5 are rejected (the agreement scale has no zero).
    """
    sums: dict[str, int] = {}
    counts: dict[str, int] = {}
    total_sum = 0
    total_n = 0
    for rating in ratings:
        if not (1 <= rating.score <= 5):
            raise RangeError(
                f"score {rating.score} for item {rating.item_id!r} outside 1..5"
            )
        if rating.section not in LIKERT_SECTIONS:
            raise RangeError(f"unknown section {rating.section!r}")
        sums[rating.section] = sums.get(rating.section, 0) + rating.score
        counts[rating.section] = counts.get(rating.section, 0) + 1
        total_sum += rating.score
        total_n += 1
    if total_n == 0:
        raise RangeError("no ratings supplied")
    return LikertSummary(
        section_means={s: sums[s] / counts[s] for s in sums},
        section_counts=dict(counts),
        overall_mean=total_sum / total_n,
        total=total_n,
    )


def load_likert_csv(path: str | Path) -> list[LikertRating]:
    """CSV with columns section,item_id,rater_id,score."""
    ratings = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"section", "item_id", "rater_id", "score"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise SchemaError(f"ratings CSV must have columns {sorted(required)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                score = int(row["score"])
            except ValueError as exc:
                raise SchemaError(f"non-integer score {row['score']!r}", line_no) from exc
            ratings.append(
                LikertRating(
                    section=row["section"].strip().casefold(),
                    item_id=row["item_id"],
                    rater_id=row["rater_id"],
                    score=score,
                )
            )
    return ratings


# ---------------------------------------------------------------------------
# Evaluation input loading
# ---------------------------------------------------------------------------


def load_conversation_for_eval(path: str | Path) -> Conversation:
    """Accept the service's persisted conversation JSON or a transcript JSONL."""
    raw = Path(path).read_text(encoding="utf-8").strip()
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError:
        obj = None
    if isinstance(obj, dict) and ("conversation" in obj or "messages" in obj):
        if "conversation" in obj:  # persisted envelope
            obj = obj["conversation"]
        return Conversation.from_json_obj(obj)
    from .dialogue import ChatMessage

    messages = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed JSON: {exc.msg}", line_no) from exc
        role = entry.get("role", entry.get("speaker", "")).strip().casefold()
        if role not in (USER, ASSISTANT):
            raise SchemaError(f"unknown role {role!r}", line_no)
        text = entry.get("text", entry.get("content"))
        if not isinstance(text, str) or not text.strip():
            raise SchemaError("missing text", line_no)
        messages.append(ChatMessage(role, text, entry.get("timestamp", "")))
    stem = Path(path).stem
    return Conversation(
        id=stem, language_pref="english", created_at="", updated_at="", messages=messages
    )
