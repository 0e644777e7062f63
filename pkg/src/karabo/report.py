"""Report rendering: delimited tables plus matplotlib figures.

The aggregate table follows the fixed layout
``case,naturalness,understandability,coherence`` with an overall row of
grand means. Figures: one per-turn score chart per conversation and one
grouped bar chart of the per-case means, written next to the table.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import DIMENSIONS, AggregateRow, ConversationReport

CSV_HEADER = ("case",) + DIMENSIONS

DIMENSION_STYLE = {
    "naturalness": {"color": "#1f77b4", "marker": "o"},
    "understandability": {"color": "#2ca02c", "marker": "s"},
    "coherence": {"color": "#d62728", "marker": "^"},
}


def aggregate_csv(rows: Iterable[AggregateRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            [row.case] + [f"{row.means[d]:.4f}" for d in DIMENSIONS]
        )
    return buffer.getvalue()


def write_aggregate_csv(rows: Sequence[AggregateRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(aggregate_csv(rows), encoding="utf-8")
    return path


def write_aggregate_json(rows: Sequence[AggregateRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps([r.to_json_obj() for r in rows], indent=2) + "\n", encoding="utf-8"
    )
    return path


def render_turn_scores(report: ConversationReport, path: str | Path) -> Path:
    """Line chart of per-turn scores for one conversation."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    turns = [t.turn_index for t in report.turn_scores]
    fig, ax = plt.subplots(figsize=(7, 4))
    for dimension in DIMENSIONS:
        ax.plot(
            turns,
            [t.scores[dimension] for t in report.turn_scores],
            label=dimension,
            **DIMENSION_STYLE[dimension],
        )
    ax.set_xlabel("assistant turn")
    ax.set_ylabel("score")
    ax.set_ylim(0.0, 1.05)
    ax.set_xticks(turns)
    ax.set_title(f"Dialogue quality per turn: {report.conversation_id}")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_aggregate_means(rows: Sequence[AggregateRow], path: str | Path) -> Path:
    """Grouped bar chart of per-case dimension means (overall row excluded)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cases = [r for r in rows if r.case != "overall"]
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.25
    positions = range(len(cases))
    for offset, dimension in enumerate(DIMENSIONS):
        ax.bar(
            [p + (offset - 1) * width for p in positions],
            [r.means[dimension] for r in cases],
            width=width,
            label=dimension,
            color=DIMENSION_STYLE[dimension]["color"],
        )
    ax.set_xticks(list(positions))
    ax.set_xticklabels([str(r.case) for r in cases])
    ax.set_xlabel("case")
    ax.set_ylabel("mean score")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("Dialogue quality means by case")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def load_reports_dir(path: str | Path) -> list[ConversationReport]:
    """Read every ``*.report.json`` (or plain report JSON) in a directory."""
    reports = []
    for file in sorted(Path(path).glob("*.json")):
        obj = json.loads(file.read_text(encoding="utf-8"))
        if isinstance(obj, dict) and "conversation_id" in obj:
            reports.append(ConversationReport.from_json_obj(obj))
    return reports


def write_report_bundle(
    reports: Sequence[ConversationReport],
    rows: Sequence[AggregateRow],
    out_dir: str | Path,
    *,
    fmt: str = "csv",
    figures: bool = True,
) -> dict:
    """Write the aggregate table and figures; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, object] = {}
    if fmt == "csv":
        written["table"] = str(write_aggregate_csv(rows, out / "aggregate.csv"))
    elif fmt == "json":
        written["table"] = str(write_aggregate_json(rows, out / "aggregate.json"))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if figures:
        figure_paths = []
        for report in reports:
            if report.turn_scores:
                figure_paths.append(
                    str(
                        render_turn_scores(
                            report, out / f"case_{report.conversation_id}_scores.png"
                        )
                    )
                )
        if rows:
            figure_paths.append(str(render_aggregate_means(rows, out / "aggregate_means.png")))
        written["figures"] = figure_paths
    return written
