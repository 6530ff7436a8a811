"""Evaluation report files: a delimited table plus score figures.

The evaluate path writes one TSV row per documentation unit, aggregate
rows at the bottom, and two PNG charts rendered next to the table: mean
scores by granularity and a histogram of combined completeness.
"""

from __future__ import annotations

import csv
import logging
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import CompletenessScore
from .source_model import COMPONENT, MODULE, REPO

logger = logging.getLogger(__name__)

REPORT_FILENAME = "report.tsv"
GRANULARITY_FIGURE = "scores_by_granularity.png"
HISTOGRAM_FIGURE = "completeness_histogram.png"

_COLUMNS = (
    "unit",
    "granularity",
    "kind",
    "section_score",
    "coverage_score",
    "combined",
    "sections_present",
    "sections_applicable",
    "entities_mentioned",
    "entities_total",
)


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def write_report(scores: list[CompletenessScore], out_dir: str) -> str:
    """Write the per-unit and aggregate TSV; returns its path."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, REPORT_FILENAME)
    by_granularity: dict[str, list[CompletenessScore]] = defaultdict(list)
    for score in scores:
        by_granularity[score.granularity].append(score)

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(_COLUMNS)
        for score in scores:
            writer.writerow(
                (
                    score.unit_id,
                    score.granularity,
                    score.kind,
                    f"{score.section_score:.6f}",
                    f"{score.coverage_score:.6f}",
                    f"{score.combined:.6f}",
                    len(score.present_sections),
                    len(score.applicable_sections),
                    len(score.mentioned_entities),
                    score.total_entities,
                )
            )
        for granularity in (COMPONENT, MODULE, REPO):
            group = by_granularity.get(granularity)
            if not group:
                continue
            writer.writerow(
                (
                    f"aggregate:{granularity}",
                    granularity,
                    "",
                    f"{_mean([s.section_score for s in group]):.6f}",
                    f"{_mean([s.coverage_score for s in group]):.6f}",
                    f"{_mean([s.combined for s in group]):.6f}",
                    "",
                    "",
                    "",
                    len(group),
                )
            )
        writer.writerow(
            (
                "aggregate:all",
                "",
                "",
                f"{_mean([s.section_score for s in scores]):.6f}",
                f"{_mean([s.coverage_score for s in scores]):.6f}",
                f"{_mean([s.combined for s in scores]):.6f}",
                "",
                "",
                "",
                len(scores),
            )
        )
    return path


def render_figures(scores: list[CompletenessScore], out_dir: str) -> list[str]:
    """Render the score charts next to the report; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    by_granularity: dict[str, list[CompletenessScore]] = defaultdict(list)
    for score in scores:
        by_granularity[score.granularity].append(score)
    granularities = [g for g in (COMPONENT, MODULE, REPO) if by_granularity.get(g)]

    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.25
    positions = range(len(granularities))
    for offset, (label, getter) in enumerate(
        (
            ("sections", lambda s: s.section_score),
            ("coverage", lambda s: s.coverage_score),
            ("combined", lambda s: s.combined),
        )
    ):
        values = [_mean([getter(s) for s in by_granularity[g]]) for g in granularities]
        ax.bar([p + offset * width for p in positions], values, width, label=label)
    ax.set_xticks([p + width for p in positions])
    ax.set_xticklabels(granularities)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("mean score")
    ax.set_title("Documentation completeness by granularity")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, GRANULARITY_FIGURE)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist([s.combined for s in scores], bins=20, range=(0.0, 1.0), edgecolor="black")
    ax.set_xlabel("combined completeness")
    ax.set_ylabel("units")
    ax.set_title("Combined completeness distribution")
    fig.tight_layout()
    path = os.path.join(out_dir, HISTOGRAM_FIGURE)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    written.append(path)

    return written
