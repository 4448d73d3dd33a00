"""SARIF 2.1.0 emission and validation."""

from __future__ import annotations

import json
import logging
import os
from importlib import resources
from pathlib import Path

import jsonschema

from patscout.cindex.model import CodeIndex
from patscout.detector import BugReport

log = logging.getLogger(__name__)

SARIF_VERSION = "2.1.0"
SARIF_SCHEMA_URI = (
    "https://raw.githubusercontent.com/oasis-tcs/sarif-spec/master/Schemata/sarif-schema-2.1.0.json"
)
SCHEMA_ENV = "PATSCOUT_SARIF_SCHEMA"


def _load_schema() -> dict:
    override = os.environ.get(SCHEMA_ENV)
    if override and Path(override).is_file():
        return json.loads(Path(override).read_text(encoding="utf-8"))
    text = resources.files("patscout").joinpath("data/sarif-2.1.0-core.schema.json").read_text(
        encoding="utf-8")
    return json.loads(text)


def validate_sarif(doc: dict) -> None:
    """Raises jsonschema.ValidationError when the document is not valid SARIF."""
    jsonschema.validate(instance=doc, schema=_load_schema())


def emit_sarif(reports: list[BugReport], index: CodeIndex | None = None,
               tool_version: str = "0.1.0") -> dict:
    """One result per report: ruleId is the anti-pattern name, locations come
    from the path steps in order, the message carries the explanation.

    Path steps whose file is not in the index degrade to a file-level
    location with a property-bag warning instead of being dropped.
    """
    known_files = {src.path for src in index.files} if index is not None else None
    rule_ids = sorted({r.anti_pattern for r in reports})
    rules = [
        {
            "id": rule_id,
            "name": rule_id,
            "shortDescription": {"text": f"anti-pattern {rule_id}"},
            "defaultConfiguration": {"level": "warning"},
        }
        for rule_id in rule_ids
    ]
    results = []
    for report in reports:
        locations = []
        warnings = []
        for step in report.candidate.path_steps:
            mappable = known_files is None or step.file in known_files
            physical: dict = {"artifactLocation": {"uri": step.file}}
            if mappable:
                physical["region"] = {"startLine": max(1, step.line)}
            else:
                warnings.append(f"unmappable origin {step.file}:{step.line}")
            location = {"physicalLocation": physical}
            if step.note:
                location["message"] = {"text": step.note}
            locations.append(location)
        result = {
            "ruleId": report.anti_pattern,
            "ruleIndex": rule_ids.index(report.anti_pattern),
            "level": "warning",
            "message": {"text": report.candidate.explanation or f"{report.anti_pattern} finding"},
            "locations": locations,
            "properties": {
                "runId": report.run_id,
                "seedFunction": report.candidate.seed.statement[0],
                "validationReasons": report.verdict.reasons,
            },
        }
        if warnings:
            result["properties"]["warnings"] = warnings
        results.append(result)
    doc = {
        "$schema": SARIF_SCHEMA_URI,
        "version": SARIF_VERSION,
        "runs": [
            {
                "tool": {
                    "driver": {
                        "name": "patscout",
                        "version": tool_version,
                        "informationUri": "https://example.invalid/patscout",
                        "rules": rules,
                    }
                },
                "columnKind": "unicodeCodePoints",
                "results": results,
            }
        ],
    }
    validate_sarif(doc)
    return doc


def save_sarif(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
