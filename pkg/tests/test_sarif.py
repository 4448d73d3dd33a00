"""SARIF 2.1.0 emission and schema validation."""

from __future__ import annotations

import jsonschema
import pytest

from conftest import ANTI_PATTERNS, DATA_DIR, TEST_PROFILE, load_artifacts
from patscout.detector import BugCandidate, BugReport, PathStep, PipelineConfig, ValidationVerdict, run_pipeline
from patscout.gateway import LlmGateway
from patscout.harness.sarif import emit_sarif, validate_sarif
from patscout.strategy import Seed


def _report(ap: str, steps: list[tuple[str, int, str]]) -> BugReport:
    return BugReport(
        candidate=BugCandidate(
            seed=Seed(statement=("f.c::fn::1", 0), captured_ident="v",
                      seed_kind="dangerous_operand", rule_index=0),
            path_steps=tuple(PathStep(f, l, n) for f, l, n in steps),
            explanation="explanation text",
            raw_response_digest="d",
        ),
        verdict=ValidationVerdict(accepted=True, reasons="ok", checks=(("c", True),)),
        anti_pattern=ap,
        cost=(1, 1, 0.0, 0.0),
        run_id="run",
    )


def test_empty_report_list_is_valid_sarif():
    doc = emit_sarif([])
    assert doc["version"] == "2.1.0"
    assert doc["runs"][0]["results"] == []
    validate_sarif(doc)


def test_two_step_path_keeps_location_order():
    doc = emit_sarif([_report("LZD", [("a.c", 3, "zero"), ("a.c", 7, "division")])])
    (result,) = doc["runs"][0]["results"]
    assert result["ruleId"] == "LZD"
    assert result["message"]["text"] == "explanation text"
    locations = result["locations"]
    assert len(locations) == 2
    assert locations[0]["physicalLocation"]["region"]["startLine"] == 3
    assert locations[1]["physicalLocation"]["region"]["startLine"] == 7
    assert locations[0]["message"]["text"] == "zero"


def test_unmappable_origin_degrades_with_warning(corpus_index):
    doc = emit_sarif([_report("LZD", [("ghost.c", 3, "phantom")])], index=corpus_index)
    (result,) = doc["runs"][0]["results"]
    physical = result["locations"][0]["physicalLocation"]
    assert "region" not in physical  # file-level location only
    assert any("unmappable" in w for w in result["properties"]["warnings"])
    validate_sarif(doc)


def test_rule_descriptors_cover_all_anti_patterns():
    reports = [_report(ap, [("a.c", 1, "s")]) for ap in ANTI_PATTERNS]
    doc = emit_sarif(reports)
    rules = doc["runs"][0]["tool"]["driver"]["rules"]
    assert {r["id"] for r in rules} == set(ANTI_PATTERNS)
    for result in doc["runs"][0]["results"]:
        assert rules[result["ruleIndex"]]["id"] == result["ruleId"]


def test_schema_rejects_malformed_document():
    with pytest.raises(jsonschema.ValidationError):
        validate_sarif({"version": "2.1.0"})  # missing runs
    with pytest.raises(jsonschema.ValidationError):
        validate_sarif({"version": "9.9", "runs": []})


def test_seven_report_replay_run_validates(corpus_index):
    reports = []
    for name in ANTI_PATTERNS:
        strategy, prompt = load_artifacts(name)
        gateway = LlmGateway(TEST_PROFILE, mode="replay",
                             cassette_dir=DATA_DIR / "cassettes" / "e2e")
        got, _ = run_pipeline(corpus_index, strategy, prompt,
                              PipelineConfig(scope=[f"{name.lower()}.c"]), gateway)
        reports.extend(got)
    doc = emit_sarif(reports, index=corpus_index)
    validate_sarif(doc)
    assert len(doc["runs"][0]["results"]) == 7
    assert {r["ruleId"] for r in doc["runs"][0]["results"]} == set(ANTI_PATTERNS)
