"""Dataset manifests and human adjudications.

The manifest mirrors a per-case table: project, commit, target file, bug
type, anti-pattern, plus a ground_truth object locating the known bug.
"New bug" status always comes from an explicit adjudication file, never
from inference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from patscout.errors import ConfigurationError


@dataclass(frozen=True)
class DatasetCase:
    project: str
    commit: str
    target_file: str
    bug_type: str
    anti_pattern: str
    ground_truth_file: str
    ground_truth_function: str
    ground_truth_line: int

    @property
    def case_id(self) -> str:
        return f"{self.project}@{self.commit}:{self.ground_truth_file}:{self.ground_truth_line}"


@dataclass(frozen=True)
class Adjudications:
    """report key -> True (confirmed new bug) / False (confirmed false positive)."""

    labels: dict[str, bool]

    def label_for(self, report_key: str) -> bool | None:
        return self.labels.get(report_key)


def report_key(report) -> str:
    """Stable key used to address a report in an adjudication file."""
    first = report.candidate.path_steps[0]
    return f"{report.anti_pattern}:{first.file}:{first.line}"


def load_manifest(path: str | Path) -> list[DatasetCase]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    cases = []
    for raw in doc.get("cases", []):
        gt = raw.get("ground_truth") or {}
        missing = [k for k in ("target_file", "anti_pattern") if not raw.get(k)]
        if missing or not gt.get("file"):
            raise ConfigurationError(f"manifest case missing fields: {raw}")
        cases.append(DatasetCase(
            project=raw.get("project", ""),
            commit=raw.get("commit", ""),
            target_file=raw["target_file"],
            bug_type=raw.get("bug_type", "custom"),
            anti_pattern=raw["anti_pattern"],
            ground_truth_file=gt["file"],
            ground_truth_function=gt.get("function", ""),
            ground_truth_line=int(gt.get("line", 0)),
        ))
    if not cases:
        raise ConfigurationError(f"manifest {path} lists no cases")
    return cases


def load_adjudications(path: str | Path | None) -> Adjudications:
    if path is None:
        return Adjudications(labels={})
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    labels = {str(k): bool(v) for k, v in doc.get("labels", {}).items()}
    return Adjudications(labels=labels)
