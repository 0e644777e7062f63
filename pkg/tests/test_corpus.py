from __future__ import annotations

import json
import random

import pytest

from karabo import corpus
from karabo.corpus import (
    CLIENT,
    COUNSELOR,
    DEFAULT_WHITELIST,
    SessionRecord,
    TechniqueWhitelist,
    Turn,
    balance_report,
    filter_by_technique,
    parse_corpus,
    segment_single_turn,
    serialize_corpus,
)
from karabo.errors import SchemaError

from conftest import make_record, random_dialogue


def record_line(**overrides) -> str:
    obj = {
        "attitude": "open",
        "thought": "I am a burden",
        "dialogue": [
            {"speaker": "client", "text": "I feel heavy."},
            {"speaker": "counselor", "text": "Tell me more."},
        ],
        "cbt_technique": "Reality Testing",
        "patterns": "overgeneralization",
        "intake_form": "seeking help",
        "cbt_plan": "1. explore evidence",
    }
    obj.update(overrides)
    return json.dumps(obj)


class TestParse:
    def test_well_formed_single_record(self):
        report = parse_corpus([record_line()])
        assert len(report.records) == 1
        rec = report.records[0]
        assert rec.id == "row-1"
        assert rec.dialogue[0] == Turn(CLIENT, "I feel heavy.")
        assert rec.dialogue[1].speaker == COUNSELOR

    def test_empty_stream(self):
        assert parse_corpus([]).records == []

    def test_missing_dialogue_is_schema_error_with_line(self):
        line = record_line()
        obj = json.loads(line)
        del obj["dialogue"]
        with pytest.raises(SchemaError) as exc_info:
            parse_corpus([line, json.dumps(obj)])
        assert exc_info.value.line_no == 2
        assert "dialogue" in str(exc_info.value)

    def test_malformed_json(self):
        with pytest.raises(SchemaError, match="line 1"):
            parse_corpus(["{not json"])

    def test_unknown_speaker_tag(self):
        bad = record_line(dialogue=[{"speaker": "therapist", "text": "hi"}])
        with pytest.raises(SchemaError, match="speaker"):
            parse_corpus([bad])

    def test_empty_turn_text(self):
        bad = record_line(dialogue=[{"speaker": "client", "text": "  "}])
        with pytest.raises(SchemaError):
            parse_corpus([bad])

    def test_empty_technique_rejected(self):
        with pytest.raises(SchemaError, match="cbt_technique"):
            parse_corpus([record_line(cbt_technique="   ")])

    def test_skip_and_collect_mode(self):
        lines = [record_line(), "{broken", record_line(id="keep-2")]
        report = parse_corpus(lines, skip_invalid=True)
        assert [r.id for r in report.records] == ["row-1", "keep-2"]
        assert len(report.errors) == 1
        assert report.errors[0].line_no == 2

    def test_explicit_id_kept_and_auto_id_uses_line_number(self):
        report = parse_corpus(["", record_line(id="abc"), record_line()])
        assert [r.id for r in report.records] == ["abc", "row-3"]

    def test_transcript_string_dialogue(self):
        transcript = "Client: I feel heavy.\nCounselor: Tell me more.\nwith your family?"
        report = parse_corpus([record_line(dialogue=transcript)])
        turns = report.records[0].dialogue
        assert [t.speaker for t in turns] == [CLIENT, COUNSELOR]
        assert turns[1].text == "Tell me more.\nwith your family?"

    def test_transcript_without_prefixes_rejected(self):
        with pytest.raises(SchemaError, match="prefix"):
            parse_corpus([record_line(dialogue="no speakers here")])

    def test_roundtrip_is_identity_on_canonical_form(self):
        rng = random.Random(13)
        records = [make_record(rng, f"r{i}") for i in range(20)]
        blob = serialize_corpus(records)
        reparsed = parse_corpus(blob.splitlines()).records
        assert reparsed == records
        assert serialize_corpus(reparsed) == blob


class TestWhitelist:
    def test_paper_default_filter(self):
        labels = ["Reality Testing", "Journaling", "Activity Scheduling"]
        rng = random.Random(1)
        records = [make_record(rng, f"r{i}", technique=t) for i, t in enumerate(labels)]
        result = filter_by_technique(records, DEFAULT_WHITELIST)
        assert [r.cbt_technique for r in result.records] == [
            "Reality Testing",
            "Activity Scheduling",
        ]
        assert result.dropped == 1

    def test_empty_whitelist_drops_everything(self):
        empty = TechniqueWhitelist.from_labels([], [])
        rng = random.Random(2)
        result = filter_by_technique([make_record(rng, "a")], empty)
        assert result.records == []
        assert result.dropped == 1

    def test_trim_and_casefold_matching(self):
        rng = random.Random(3)
        rec = make_record(rng, "a", technique="  reality testing ")
        result = filter_by_technique([rec], DEFAULT_WHITELIST)
        assert result.records == [rec]

    def test_disjoint_sets_enforced(self):
        with pytest.raises(ValueError, match="both"):
            TechniqueWhitelist.from_labels(["Reframing"], ["reframing "])

    def test_classification_is_pure_function_of_label(self):
        assert DEFAULT_WHITELIST.classify("Systematic Exposure") == "BA"
        assert DEFAULT_WHITELIST.classify("Positive Reframing") == "CR"
        assert DEFAULT_WHITELIST.classify("Exposure") is None  # no substring match

    def test_filter_output_subset_of_input(self):
        rng = random.Random(4)
        records = [
            make_record(rng, f"r{i}", technique=rng.choice(["Reframing", "Journaling"]))
            for i in range(50)
        ]
        result = filter_by_technique(records)
        assert all(r in records for r in result.records)
        assert all(
            DEFAULT_WHITELIST.classify(r.cbt_technique) is not None
            for r in result.records
        )
        assert len(result.records) + result.dropped == len(records)


def brute_force_pair_count(turns) -> int:
    """Independent oracle: collapse same-speaker runs, count client->counselor."""
    speakers = []
    for t in turns:
        if not speakers or speakers[-1] != t.speaker:
            speakers.append(t.speaker)
    return sum(
        1
        for a, b in zip(speakers, speakers[1:])
        if a == CLIENT and b == COUNSELOR
    )


class TestSegmentation:
    def seg(self, speakers: list[str]) -> list:
        rec = SessionRecord(
            id="s",
            attitude="",
            thought="",
            dialogue=tuple(Turn(sp, f"t{i}") for i, sp in enumerate(speakers)),
            cbt_technique="Reframing",
            patterns="",
            intake_form="",
            cbt_plan="",
        )
        return segment_single_turn(rec)

    def test_two_pairs(self):
        assert len(self.seg([CLIENT, COUNSELOR, CLIENT, COUNSELOR])) == 2

    def test_leading_counselor_greeting_excluded(self):
        instances = self.seg([COUNSELOR, CLIENT, COUNSELOR])
        assert len(instances) == 1
        assert instances[0].client_text == "t1"
        assert instances[0].counselor_text == "t2"

    def test_lone_client_turn(self):
        assert self.seg([CLIENT]) == []

    def test_same_speaker_runs_merged_with_newline(self):
        instances = self.seg([CLIENT, CLIENT, COUNSELOR])
        assert len(instances) == 1
        assert instances[0].client_text == "t0\nt1"

    def test_pair_index_and_instance_id(self):
        instances = self.seg([CLIENT, COUNSELOR, CLIENT, COUNSELOR])
        assert [i.pair_index for i in instances] == [0, 1]
        assert instances[1].instance_id == "s#1"

    def test_non_whitelisted_record_rejected(self):
        rec = SessionRecord(
            id="s", attitude="", thought="",
            dialogue=(Turn(CLIENT, "a"), Turn(COUNSELOR, "b")),
            cbt_technique="Journaling", patterns="", intake_form="", cbt_plan="",
        )
        with pytest.raises(ValueError, match="non-whitelisted"):
            segment_single_turn(rec)

    def test_counts_match_brute_force_oracle(self):
        rng = random.Random(99)
        for i in range(300):
            turns = random_dialogue(rng)
            rec = SessionRecord(
                id=f"r{i}", attitude="", thought="", dialogue=tuple(turns),
                cbt_technique="Reframing", patterns="", intake_form="", cbt_plan="",
            )
            assert len(segment_single_turn(rec)) == brute_force_pair_count(turns)

    def test_instance_jsonl_roundtrip(self):
        rng = random.Random(7)
        records = [make_record(rng, f"r{i}") for i in range(10)]
        instances = corpus.segment_corpus(records)
        blob = corpus.serialize_instances(instances)
        assert corpus.parse_instances(blob.splitlines()) == instances


class TestBalance:
    def mk(self, cls: str, i: int):
        return corpus.TurnInstance(f"s{i}", 0, "c", "r", cls, "label")

    def test_equal_counts_balanced(self):
        instances = [self.mk("BA", i) for i in range(3)] + [self.mk("CR", i + 3) for i in range(3)]
        rep = balance_report(instances)
        assert (rep.ba, rep.cr, rep.total, rep.balanced) == (3, 3, 6, True)

    def test_unequal_counts_not_balanced_at_zero_slack(self):
        instances = [self.mk("BA", i) for i in range(2)] + [self.mk("CR", i + 2) for i in range(5)]
        rep = balance_report(instances, slack=0)
        assert (rep.ba, rep.cr, rep.balanced) == (2, 5, False)
        assert balance_report(instances, slack=3).balanced

    def test_empty(self):
        rep = balance_report([])
        assert (rep.total, rep.balanced) == (0, True)
