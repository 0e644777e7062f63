from __future__ import annotations

import random
import re

import pytest

from karabo.corpus import CLIENT, COUNSELOR, SessionRecord, Turn, TurnInstance
from karabo.gateway import Backend, BackendResult, BooleanVerdict, estimate_tokens

WORDS = (
    "family", "community", "heart", "peace", "worry", "rest", "hope",
    "together", "strength", "morning", "quiet", "heavy", "light", "road",
)


def random_text(rng: random.Random, lo: int = 2, hi: int = 9) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def random_dialogue(rng: random.Random, max_turns: int = 12) -> list[Turn]:
    n = rng.randint(1, max_turns)
    return [
        Turn(rng.choice((CLIENT, COUNSELOR)), random_text(rng)) for _ in range(n)
    ]


def make_record(rng: random.Random, rec_id: str, technique: str = "Reality Testing") -> SessionRecord:
    return SessionRecord(
        id=rec_id,
        attitude=random_text(rng),
        thought=random_text(rng),
        dialogue=tuple(random_dialogue(rng)),
        cbt_technique=technique,
        patterns=random_text(rng),
        intake_form=random_text(rng),
        cbt_plan=random_text(rng),
    )


def make_instances(n: int, seed: int = 0) -> list[TurnInstance]:
    rng = random.Random(seed)
    return [
        TurnInstance(
            source_id=f"s{i}",
            pair_index=0,
            client_text=random_text(rng),
            counselor_text=random_text(rng),
            technique_class="BA" if i % 2 == 0 else "CR",
            technique_label="Activity Scheduling" if i % 2 == 0 else "Reframing",
        )
        for i in range(n)
    ]


_COUNSELOR_IN_PROMPT = re.compile(r"Counselor: (.*?)\n\n", re.DOTALL)


class CounselorRewriteBackend(Backend):
    """Extracts the counselor text from rewrite prompts and transforms it.

    Judge answers come from (question substring -> verdict) rules, with a
    constant default; this lets one backend say yes to benefit questions
    and no to suitability probes.
    """

    name = "test-rewrite"

    def __init__(self, fn=lambda text: text, rules=(), default=(1.0, 0.0)):
        self.fn = fn
        self.rules = list(rules)
        self.default = default

    def complete(self, request):
        match = _COUNSELOR_IN_PROMPT.search(request.last_user_text())
        assert match, "prompt does not embed a counselor line"
        text = self.fn(match.group(1))
        return BackendResult(text, completion_tokens=estimate_tokens(text))

    def judge(self, context, question):
        for needle, (p_yes, p_no) in self.rules:
            if needle in question:
                return BooleanVerdict(p_yes=p_yes, p_no=p_no)
        return BooleanVerdict(p_yes=self.default[0], p_no=self.default[1])


class ScriptedRandom:
    """random.Random stand-in with preset uniform and integer draws."""

    def __init__(self, uniforms=(), ints=()):
        self.uniforms = list(uniforms)
        self.ints = list(ints)
        self.uniform_calls = 0
        self.int_calls = 0

    def random(self):
        self.uniform_calls += 1
        return self.uniforms.pop(0)

    def randrange(self, start, stop):
        self.int_calls += 1
        value = self.ints.pop(0)
        assert start <= value < stop
        return value


# ---------------------------------------------------------------------------
# Acceptance criteria summary: one pass/fail line per criterion at the end.
# ---------------------------------------------------------------------------

_ACCEPTANCE_RESULTS: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and "test_acceptance" in item.nodeid:
        _ACCEPTANCE_RESULTS[item.name] = rep.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        outcome = _ACCEPTANCE_RESULTS[name]
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")
