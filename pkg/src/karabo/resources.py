"""Loaders for data files shipped inside the package."""

from __future__ import annotations

import csv
import json
from importlib import resources


def _read_text(name: str) -> str:
    return resources.files("karabo.data").joinpath(name).read_text(encoding="utf-8")


def load_default_proverbs() -> list[str]:
    """Placeholder proverb registry; operators replace it with a curated list."""
    return json.loads(_read_text("proverbs.json"))


def load_case_fixtures_raw() -> list[dict]:
    return json.loads(_read_text("cases.json"))


def load_reference_results() -> list[dict]:
    """Published per-case dialogue-quality means, kept as a formatting fixture.

    These depended on a fine-tuned model and human-driven sessions; they are
    never recomputed here, only used to pin the report layout.
    """
    reader = csv.DictReader(_read_text("reference_results.csv").splitlines())
    return [
        {
            "case": int(row["case"]),
            "naturalness": float(row["naturalness"]),
            "understandability": float(row["understandability"]),
            "coherence": float(row["coherence"]),
        }
        for row in reader
    ]
