"""Bundled depression/anxiety case-study fixtures.

Nine expert-style vignettes, each a first-person narrative tagged with the
Ubuntu tenets it covers and DSM-5-category symptom annotations whose
indicator phrases are verbatim spans of the narrative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import SchemaError
from .resources import load_case_fixtures_raw

CATEGORIES = ("MDD", "GAD", "both")


@dataclass(frozen=True)
class SymptomAnnotation:
    category: str  # MDD, GAD, or both
    symptom: str
    indicator: str


@dataclass(frozen=True)
class CaseStudyFixture:
    case_id: int
    title: str
    ubuntu_tenets: tuple[str, ...]
    narrative: str
    symptom_annotations: tuple[SymptomAnnotation, ...]


def _squash(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def validate_fixture(fixture: CaseStudyFixture) -> None:
    if not (1 <= fixture.case_id <= 9):
        raise SchemaError(f"case_id {fixture.case_id} outside 1..9")
    narrative = _squash(fixture.narrative)
    for ann in fixture.symptom_annotations:
        if ann.category not in CATEGORIES:
            raise SchemaError(
                f"case {fixture.case_id}: bad category {ann.category!r}"
            )
        if _squash(ann.indicator) not in narrative:
            raise SchemaError(
                f"case {fixture.case_id}: indicator not found in narrative: "
                f"{ann.indicator[:60]!r}"
            )


def load_case_fixtures() -> list[CaseStudyFixture]:
    fixtures = []
    for obj in load_case_fixtures_raw():
        fixture = CaseStudyFixture(
            case_id=obj["case_id"],
            title=obj["title"],
            ubuntu_tenets=tuple(obj["ubuntu_tenets"]),
            narrative=obj["narrative"],
            symptom_annotations=tuple(
                SymptomAnnotation(a["category"], a["symptom"], a["indicator"])
                for a in obj["symptom_annotations"]
            ),
        )
        validate_fixture(fixture)
        fixtures.append(fixture)
    if [f.case_id for f in fixtures] != list(range(1, 10)):
        raise SchemaError("bundled fixtures must be cases 1..9 in order")
    return fixtures
