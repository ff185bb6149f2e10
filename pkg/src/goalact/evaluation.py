"""Keyword-based success scoring and per-category aggregation.

A task's score is the fraction of its gold keywords that occur as exact
substrings of the final output, after NFC normalization of both sides; no
case folding, no fuzzy credit.  Suites aggregate unweighted means per
category plus an overall ALL column.
"""

from __future__ import annotations

import json
import math
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import (
    EmptyKeywordSet,
    EmptyScoreSet,
    MissingCategory,
    TaskSetMismatch,
)
from .generator import CATEGORY_ORDER


@dataclass(frozen=True)
class TaskScore:
    task_id: str
    s: float
    matched: frozenset[str]
    missing: frozenset[str]


@dataclass(frozen=True)
class MethodRow:
    method: str
    per_category: Mapping[str, float]
    overall: float
    task_ids: frozenset[str]


@dataclass(frozen=True)
class SuiteReport:
    rows: tuple[MethodRow, ...]
    categories: tuple[str, ...]
    task_count: int


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def success_rate(key_answers: Iterable[str], output: str,
                 task_id: str = "") -> TaskScore:
    """Fraction of keywords appearing as exact substrings of the output."""
    keywords = set(key_answers)
    if not keywords:
        raise EmptyKeywordSet("success_rate needs at least one keyword")
    normalized = _nfc(output)
    matched = frozenset(k for k in keywords if _nfc(k) in normalized)
    missing = frozenset(keywords - matched)
    return TaskScore(task_id=task_id, s=len(matched) / len(keywords),
                     matched=matched, missing=missing)


def path_coverage(key_middles: Iterable[str], trajectory_text: str) -> float:
    """Diagnostic only: fraction of intermediate link values that were seen.

    Intermediate coverage never enters the success score.
    """
    middles = set(key_middles)
    if not middles:
        return 1.0
    normalized = _nfc(trajectory_text)
    return sum(1 for m in middles if _nfc(m) in normalized) / len(middles)


def _ordered_categories(categories: Iterable[str]) -> tuple[str, ...]:
    present = set(categories)
    ordered = [c for c in CATEGORY_ORDER if c in present]
    ordered += sorted(present - set(CATEGORY_ORDER))
    return tuple(ordered)


def aggregate(scores: Sequence[TaskScore], categories: Mapping[str, str],
              method: str = "method") -> SuiteReport:
    """Unweighted per-category means plus the overall ALL mean."""
    if not scores:
        raise EmptyScoreSet("cannot aggregate an empty score list")
    for score in scores:
        if score.task_id not in categories:
            raise MissingCategory(f"task {score.task_id!r} has no category")
    buckets: dict[str, list[float]] = {}
    for score in scores:
        buckets.setdefault(categories[score.task_id], []).append(score.s)
    ordered = _ordered_categories(buckets)
    # fsum is exactly rounded, so the means do not depend on score order.
    per_category = {c: math.fsum(buckets[c]) / len(buckets[c]) for c in ordered}
    overall = math.fsum(s.s for s in scores) / len(scores)
    row = MethodRow(method=method, per_category=per_category, overall=overall,
                    task_ids=frozenset(s.task_id for s in scores))
    return SuiteReport(rows=(row,), categories=ordered, task_count=len(scores))


def merge_reports(reports: Sequence[SuiteReport]) -> SuiteReport:
    """One multi-method report from single-method reports over one task set."""
    if not reports:
        raise EmptyScoreSet("no reports to merge")
    base = reports[0].rows[0].task_ids
    for report in reports[1:]:
        if report.rows[0].task_ids != base:
            raise TaskSetMismatch("reports cover different task sets")
    categories = _ordered_categories(
        c for report in reports for c in report.categories)
    rows = tuple(row for report in reports for row in report.rows)
    return SuiteReport(rows=rows, categories=categories,
                       task_count=reports[0].task_count)


def compare_methods(reports: SuiteReport | Sequence[SuiteReport]
                    ) -> dict[str, dict[str, float]]:
    """Per-category and overall deltas of each method against the best rival.

    Accepts either one merged multi-method report or a sequence of
    single-method reports over the same task set.
    """
    if isinstance(reports, SuiteReport):
        merged = reports
        if len(merged.rows) < 2:
            raise TaskSetMismatch("compare_methods needs at least two methods")
    else:
        if len(reports) < 2:
            raise TaskSetMismatch("compare_methods needs at least two reports")
        merged = merge_reports(reports)
    deltas: dict[str, dict[str, float]] = {}
    for row in merged.rows:
        rivals = [r for r in merged.rows if r.method != row.method]
        entry: dict[str, float] = {}
        for category in merged.categories:
            mine = row.per_category.get(category)
            others = [r.per_category[category] for r in rivals
                      if category in r.per_category]
            if mine is not None and others:
                entry[category] = mine - max(others)
        entry["ALL"] = row.overall - max(r.overall for r in rivals)
        deltas[row.method] = entry
    return deltas


# --- report rendering ----------------------------------------------------------------

def render_report_text(report: SuiteReport) -> str:
    """Fixed-width table: one row per method, one column per category + ALL."""
    headers = ["Method"] + list(report.categories) + ["ALL"]
    lines = []
    body = []
    for row in report.rows:
        cells = [row.method]
        cells += [f"{row.per_category[c]:.4f}" if c in row.per_category else "-"
                  for c in report.categories]
        cells.append(f"{row.overall:.4f}")
        body.append(cells)
    widths = [max(len(headers[i]), *(len(r[i]) for r in body)) if body
              else len(headers[i]) for i in range(len(headers))]
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)))
    lines.append("  ".join("-" * w for w in widths))
    for cells in body:
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(cells)))
    lines.append(f"tasks per method: {report.task_count}")
    return "\n".join(lines) + "\n"


def report_to_dict(report: SuiteReport) -> dict:
    return {
        "categories": list(report.categories),
        "task_count": report.task_count,
        "rows": [
            {"method": row.method,
             "per_category": {c: row.per_category[c]
                              for c in report.categories
                              if c in row.per_category},
             "overall": row.overall}
            for row in report.rows
        ],
    }


def render_report_json(report: SuiteReport) -> str:
    return json.dumps(report_to_dict(report), ensure_ascii=False, indent=2) + "\n"
