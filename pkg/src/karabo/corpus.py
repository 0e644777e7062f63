"""Counseling-session corpus handling.

Parses line-delimited JSON session records (7 attributes per session plus
an optional id), filters them by counseling-technique whitelist, and
segments the retained sessions into single-turn client/counselor
instances ready for the adaptation pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import SchemaError

CLIENT = "client"
COUNSELOR = "counselor"

#: Required JSONL attributes, in canonical serialization order.
RECORD_FIELDS = (
    "attitude",
    "thought",
    "dialogue",
    "cbt_technique",
    "patterns",
    "intake_form",
    "cbt_plan",
)

#: Technique classes retained by the corpus filter.
BA = "BA"
CR = "CR"

#: Default transcript prefixes when `dialogue` arrives as one string.
DEFAULT_PREFIXES = ("Client:", "Counselor:")


@dataclass(frozen=True)
class Turn:
    speaker: str  # CLIENT or COUNSELOR
    text: str

    def __post_init__(self):
        if self.speaker not in (CLIENT, COUNSELOR):
            raise ValueError(f"unknown speaker {self.speaker!r}")


@dataclass(frozen=True)
class SessionRecord:
    id: str
    attitude: str
    thought: str
    dialogue: tuple[Turn, ...]
    cbt_technique: str
    patterns: str
    intake_form: str
    cbt_plan: str

    def to_json_obj(self) -> dict:
        obj = {"id": self.id}
        for name in RECORD_FIELDS:
            value = getattr(self, name)
            if name == "dialogue":
                value = [{"speaker": t.speaker, "text": t.text} for t in self.dialogue]
            obj[name] = value
        return obj


@dataclass(frozen=True)
class TurnInstance:
    source_id: str
    pair_index: int
    client_text: str
    counselor_text: str
    technique_class: str  # BA or CR
    technique_label: str

    @property
    def instance_id(self) -> str:
        # Stable cross-reference key used by adaptation traces.
        return f"{self.source_id}#{self.pair_index}"

    def to_json_obj(self) -> dict:
        return {
            "source_id": self.source_id,
            "pair_index": self.pair_index,
            "client_text": self.client_text,
            "counselor_text": self.counselor_text,
            "technique_class": self.technique_class,
            "technique_label": self.technique_label,
        }


def _normalize_label(label: str) -> str:
    return label.strip().casefold()


@dataclass(frozen=True)
class TechniqueWhitelist:
    """Case-folded exact-match whitelist mapping technique labels to BA/CR."""

    ba_labels: frozenset[str]
    cr_labels: frozenset[str]

    @classmethod
    def from_labels(cls, ba_labels: Iterable[str], cr_labels: Iterable[str]) -> "TechniqueWhitelist":
        ba = frozenset(_normalize_label(s) for s in ba_labels)
        cr = frozenset(_normalize_label(s) for s in cr_labels)
        overlap = ba & cr
        if overlap:
            raise ValueError(f"labels in both BA and CR sets: {sorted(overlap)}")
        return cls(ba, cr)

    def classify(self, label: str) -> str | None:
        """BA, CR, or None for labels outside the whitelist."""
        key = _normalize_label(label)
        if key in self.ba_labels:
            return BA
        if key in self.cr_labels:
            return CR
        return None


#: Behavioral-activation and cognitive-restructuring labels retained by default.
DEFAULT_WHITELIST = TechniqueWhitelist.from_labels(
    ba_labels=("Behavioural Experiment", "Activity Scheduling", "Systematic Exposure"),
    cr_labels=("Reality Testing", "Reframing", "Positive Reframing"),
)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_turn_obj(obj, line_no: int) -> Turn:
    if not isinstance(obj, dict):
        raise SchemaError(f"dialogue entry is not an object: {obj!r}", line_no)
    speaker = obj.get("speaker", obj.get("role"))
    text = obj.get("text", obj.get("content"))
    if not isinstance(speaker, str):
        raise SchemaError("dialogue entry missing speaker tag", line_no)
    key = speaker.strip().casefold()
    if key not in (CLIENT, COUNSELOR):
        raise SchemaError(f"unknown speaker tag {speaker!r}", line_no)
    if not isinstance(text, str) or not text.strip():
        raise SchemaError(f"empty text for {key} turn", line_no)
    return Turn(key, text)


def _parse_transcript(
    text: str, line_no: int, prefixes: tuple[str, str]
) -> list[Turn]:
    """Split a one-string transcript on configurable speaker prefixes."""
    client_prefix, counselor_prefix = prefixes
    turns: list[Turn] = []
    speaker: str | None = None
    buffer: list[str] = []

    def flush():
        nonlocal buffer
        if speaker is not None:
            body = "\n".join(buffer).strip()
            if not body:
                raise SchemaError(f"empty text for {speaker} turn", line_no)
            turns.append(Turn(speaker, body))
        buffer = []

    for raw in text.splitlines():
        stripped = raw.strip()
        if stripped.startswith(client_prefix):
            flush()
            speaker = CLIENT
            buffer.append(stripped[len(client_prefix):].strip())
        elif stripped.startswith(counselor_prefix):
            flush()
            speaker = COUNSELOR
            buffer.append(stripped[len(counselor_prefix):].strip())
        elif speaker is None:
            if stripped:
                raise SchemaError(
                    f"transcript text before any speaker prefix: {stripped[:40]!r}", line_no
                )
        else:
            buffer.append(stripped)
    flush()
    return turns


def _parse_record(obj: dict, line_no: int, prefixes: tuple[str, str]) -> SessionRecord:
    if not isinstance(obj, dict):
        raise SchemaError("line is not a JSON object", line_no)
    for name in RECORD_FIELDS:
        if name not in obj:
            raise SchemaError(f"missing required field {name!r}", line_no)

    text_fields = {}
    for name in RECORD_FIELDS:
        if name == "dialogue":
            continue
        value = obj[name]
        if not isinstance(value, str):
            raise SchemaError(f"field {name!r} is not a string", line_no)
        text_fields[name] = value
    if not text_fields["cbt_technique"].strip():
        raise SchemaError("empty cbt_technique", line_no)

    raw_dialogue = obj["dialogue"]
    if isinstance(raw_dialogue, str):
        turns = _parse_transcript(raw_dialogue, line_no, prefixes)
    elif isinstance(raw_dialogue, list):
        turns = [_parse_turn_obj(t, line_no) for t in raw_dialogue]
    else:
        raise SchemaError("dialogue must be a turn array or a transcript string", line_no)
    if not turns:
        raise SchemaError("dialogue is empty", line_no)

    rec_id = obj.get("id")
    if rec_id is None:
        rec_id = f"row-{line_no}"
    elif not isinstance(rec_id, str) or not rec_id:
        raise SchemaError("id must be a non-empty string", line_no)

    return SessionRecord(id=rec_id, dialogue=tuple(turns), **text_fields)


@dataclass
class ParseReport:
    """Outcome of a skip-and-collect parse: valid records plus per-line errors."""

    records: list[SessionRecord] = field(default_factory=list)
    errors: list[SchemaError] = field(default_factory=list)


def parse_corpus(
    lines: Iterable[str],
    *,
    skip_invalid: bool = False,
    prefixes: tuple[str, str] = DEFAULT_PREFIXES,
) -> ParseReport:
    """Parse line-delimited JSON into session records, preserving input order.

    With ``skip_invalid`` the parse collects SchemaErrors (with their line
    numbers) instead of raising on the first one.
    """
    report = ParseReport()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"malformed JSON: {exc.msg}", line_no) from exc
            report.records.append(_parse_record(obj, line_no, prefixes))
        except SchemaError as exc:
            if not skip_invalid:
                raise
            report.errors.append(exc)
    return report


def load_corpus(path: str | Path, **kwargs) -> ParseReport:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_corpus(fh, **kwargs)


def serialize_corpus(records: Iterable[SessionRecord]) -> str:
    """Canonical JSONL form: fixed key order, compact separators, UTF-8 text."""
    lines = [
        json.dumps(rec.to_json_obj(), ensure_ascii=False, separators=(",", ":"))
        for rec in records
    ]
    return "".join(line + "\n" for line in lines)


def write_corpus(records: Iterable[SessionRecord], path: str | Path) -> None:
    Path(path).write_text(serialize_corpus(records), encoding="utf-8")


# ---------------------------------------------------------------------------
# Filtering and segmentation
# ---------------------------------------------------------------------------


@dataclass
class FilterResult:
    records: list[SessionRecord]
    dropped: int


def filter_by_technique(
    records: Iterable[SessionRecord], whitelist: TechniqueWhitelist = DEFAULT_WHITELIST
) -> FilterResult:
    """Keep records whose trimmed, case-folded technique label is whitelisted."""
    kept: list[SessionRecord] = []
    dropped = 0
    for rec in records:
        if whitelist.classify(rec.cbt_technique) is None:
            dropped += 1
        else:
            kept.append(rec)
    return FilterResult(kept, dropped)


def _merge_runs(turns: Iterable[Turn]) -> list[Turn]:
    """Join consecutive same-speaker turns with newlines so pairing is total."""
    merged: list[Turn] = []
    for turn in turns:
        if merged and merged[-1].speaker == turn.speaker:
            merged[-1] = Turn(turn.speaker, merged[-1].text + "\n" + turn.text)
        else:
            merged.append(turn)
    return merged


def segment_single_turn(
    record: SessionRecord, whitelist: TechniqueWhitelist = DEFAULT_WHITELIST
) -> list[TurnInstance]:
    """One instance per client turn immediately followed by a counselor turn.

    Leading counselor turns and trailing unanswered client turns produce
    nothing. The record must carry a whitelisted technique label.
    """
    technique_class = whitelist.classify(record.cbt_technique)
    if technique_class is None:
        raise ValueError(
            f"record {record.id!r} has non-whitelisted technique {record.cbt_technique!r}"
        )
    merged = _merge_runs(record.dialogue)
    instances: list[TurnInstance] = []
    for prev, cur in zip(merged, merged[1:]):
        if prev.speaker == CLIENT and cur.speaker == COUNSELOR:
            instances.append(
                TurnInstance(
                    source_id=record.id,
                    pair_index=len(instances),
                    client_text=prev.text,
                    counselor_text=cur.text,
                    technique_class=technique_class,
                    technique_label=record.cbt_technique,
                )
            )
    return instances


def segment_corpus(
    records: Iterable[SessionRecord], whitelist: TechniqueWhitelist = DEFAULT_WHITELIST
) -> list[TurnInstance]:
    out: list[TurnInstance] = []
    for rec in records:
        out.extend(segment_single_turn(rec, whitelist))
    return out


@dataclass
class BalanceReport:
    ba: int
    cr: int
    total: int
    balanced: bool

    def to_json_obj(self) -> dict:
        return {"BA": self.ba, "CR": self.cr, "total": self.total, "balanced": self.balanced}


def balance_report(instances: Iterable[TurnInstance], slack: int = 0) -> BalanceReport:
    """Per-class counts; balanced when |n_BA - n_CR| <= slack."""
    n_ba = n_cr = 0
    for inst in instances:
        if inst.technique_class == BA:
            n_ba += 1
        else:
            n_cr += 1
    return BalanceReport(n_ba, n_cr, n_ba + n_cr, abs(n_ba - n_cr) <= slack)


# ---------------------------------------------------------------------------
# Instance JSONL I/O
# ---------------------------------------------------------------------------


def serialize_instances(instances: Iterable[TurnInstance]) -> str:
    lines = [
        json.dumps(inst.to_json_obj(), ensure_ascii=False, separators=(",", ":"))
        for inst in instances
    ]
    return "".join(line + "\n" for line in lines)


def write_instances(instances: Iterable[TurnInstance], path: str | Path) -> None:
    Path(path).write_text(serialize_instances(instances), encoding="utf-8")


def parse_instances(lines: Iterable[str]) -> list[TurnInstance]:
    out: list[TurnInstance] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed JSON: {exc.msg}", line_no) from exc
        try:
            out.append(
                TurnInstance(
                    source_id=str(obj["source_id"]),
                    pair_index=int(obj["pair_index"]),
                    client_text=obj["client_text"],
                    counselor_text=obj["counselor_text"],
                    technique_class=obj["technique_class"],
                    technique_label=obj["technique_label"],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad instance object: {exc}", line_no) from exc
    return out


def load_instances(path: str | Path) -> list[TurnInstance]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instances(fh)
