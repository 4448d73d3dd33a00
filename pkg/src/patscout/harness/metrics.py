"""Ground-truth matching and precision/recall/F1 computation.

Matching rule (explicit because no standard one exists): a report matches a
case when any path step touches the ground-truth file and lies within the
ground-truth function's span or within +/- window lines of the ground-truth
line. Reports that match no case count as true positives only when a human
adjudication file confirms them; recall counts reproduced cases over all
cases, so new bugs raise precision without raising recall.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from patscout.cindex.model import CodeIndex
from patscout.detector import BugReport
from patscout.harness.dataset import Adjudications, DatasetCase, report_key

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 5


@dataclass(frozen=True)
class EvaluationMetrics:
    cases: int
    reproduced: int
    new_found: int
    tp: int
    fp: int
    precision: float | None  # percent; None when tp + fp == 0
    recall: float  # percent
    f1: float

    def to_json(self) -> dict:
        return {
            "cases": self.cases,
            "reproduced": self.reproduced,
            "new_found": self.new_found,
            "tp": self.tp,
            "fp": self.fp,
            "precision": None if self.precision is None else _round2(self.precision),
            "recall": _round2(self.recall),
            "f1": _round2(self.f1),
        }


def _round2(value: float) -> float:
    # report tables round half up; Python's round() is half-to-even
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def metrics_from_counts(cases: int, reproduced: int, new_found: int, fp: int) -> EvaluationMetrics:
    tp = reproduced + new_found
    precision = (100.0 * tp / (tp + fp)) if (tp + fp) > 0 else None
    recall = (100.0 * reproduced / cases) if cases > 0 else 0.0
    # F1 = 2PR/(P+R) reduced to one integer ratio so exact values like 7/8
    # survive floating point
    denom = tp * cases + reproduced * (tp + fp)
    f1 = (2 * tp * reproduced / denom) if denom > 0 else 0.0
    return EvaluationMetrics(
        cases=cases, reproduced=reproduced, new_found=new_found, tp=tp, fp=fp,
        precision=precision, recall=recall, f1=f1,
    )


def _function_span(index: CodeIndex | None, case: DatasetCase) -> tuple[int, int] | None:
    if index is None or not case.ground_truth_function:
        return None
    for fn_id in index.functions_named(case.ground_truth_function):
        fn = index.function(fn_id)
        if fn.file == case.ground_truth_file:
            return fn.body_span
    return None


def match_report(report: BugReport, case: DatasetCase, window: int = DEFAULT_WINDOW,
                 index: CodeIndex | None = None) -> bool:
    """True when the report's path matches the case's ground truth."""
    span = _function_span(index, case)
    if span is None and case.ground_truth_function and index is not None:
        log.warning("ground-truth function %s not found in index; falling back to line window",
                    case.ground_truth_function)
    for step in report.candidate.path_steps:
        if step.file != case.ground_truth_file:
            continue
        if span is not None and span[0] <= step.line <= span[1]:
            return True
        if abs(step.line - case.ground_truth_line) <= window:
            return True
    return False


def classify_report(report: BugReport, cases: list[DatasetCase], adjudications: Adjudications,
                    window: int = DEFAULT_WINDOW,
                    index: CodeIndex | None = None) -> tuple[str, DatasetCase | None]:
    """-> ("matched", case) | ("new", None) | ("unmatched", None)."""
    for case in cases:
        if case.anti_pattern == report.anti_pattern and match_report(report, case, window, index):
            return "matched", case
    if adjudications.label_for(report_key(report)):
        return "new", None
    return "unmatched", None


def evaluate(reports: list[BugReport], manifest: list[DatasetCase],
             adjudications: Adjudications, window: int = DEFAULT_WINDOW,
             index: CodeIndex | None = None) -> dict[str, EvaluationMetrics]:
    """Per-anti-pattern metrics plus a 'total' row aggregating raw counts."""
    by_ap: dict[str, list[DatasetCase]] = {}
    for case in manifest:
        by_ap.setdefault(case.anti_pattern, []).append(case)
    for report in reports:
        if report.anti_pattern not in by_ap:
            raise ValueError(
                f"report anti-pattern {report.anti_pattern!r} is absent from the manifest")

    out: dict[str, EvaluationMetrics] = {}
    total = {"cases": 0, "reproduced": 0, "new": 0, "fp": 0}
    for ap, cases in sorted(by_ap.items()):
        matched_cases: set[str] = set()
        new = 0
        fp = 0
        for report in reports:
            if report.anti_pattern != ap:
                continue
            status, case = classify_report(report, cases, adjudications, window, index)
            if status == "matched" and case is not None:
                matched_cases.add(case.case_id)
            elif status == "new":
                new += 1
            else:
                fp += 1
        out[ap] = metrics_from_counts(len(cases), len(matched_cases), new, fp)
        total["cases"] += len(cases)
        total["reproduced"] += len(matched_cases)
        total["new"] += new
        total["fp"] += fp
    out["total"] = metrics_from_counts(total["cases"], total["reproduced"], total["new"], total["fp"])
    return out


def save_metrics(metrics: dict[str, EvaluationMetrics], path: str | Path) -> None:
    doc = {name: m.to_json() for name, m in metrics.items()}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
