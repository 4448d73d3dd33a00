"""CLI: synthesize / scan / evaluate / report over real artifact files."""

from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from conftest import DATA_DIR
from patscout.harness import cli
from patscout.testing import ScriptedTransport


@pytest.fixture(autouse=True)
def scripted_http(monkeypatch):
    """CLI builds an HTTP transport from config; tests swap in the stub."""
    monkeypatch.setattr(cli, "HttpChatTransport", lambda *a, **k: ScriptedTransport())


def _config(tmp_path: Path) -> str:
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "base_url": "https://stub.invalid/v1",
        "model": "scripted-stub",
        "profiles": {"scripted-stub": {
            "max_output_tokens": 4096,
            "max_reasoning_tokens": 2048,
            "price_per_million_in": 3.0,
            "price_per_million_out": 15.0,
        }},
    }))
    return str(path)


def test_synthesize_scan_evaluate_report_chain(tmp_path, capsys):
    out_dir = tmp_path / "synth"
    rc = cli.main([
        "synthesize",
        "--spec-dir", str(DATA_DIR / "specdir"),
        "--out-dir", str(out_dir),
        "--anti-pattern", "LZD",
        "--config", _config(tmp_path),
    ])
    assert rc == cli.EXIT_OK
    assert (out_dir / "LZD" / "strategy.json").is_file()
    assert (out_dir / "LZD" / "prompt.json").is_file()
    assert (out_dir / "synthesis_ledger.json").is_file()

    scan_out = tmp_path / "scan"
    rc = cli.main([
        "scan",
        "--repo", str(DATA_DIR / "corpus"),
        "--strategy", str(out_dir / "LZD" / "strategy.json"),
        "--prompt", str(out_dir / "LZD" / "prompt.json"),
        "--out-dir", str(scan_out),
        "--scope", "lzd.c",
        "--k-max", "2",
        "--seed-cap", "100",
        "--config", _config(tmp_path),
        "--dump-index", str(tmp_path / "index.json"),
    ])
    assert rc == cli.EXIT_OK
    for artifact in ("reports.json", "reports.sarif", "ledger.json", "runlog.json"):
        assert (scan_out / artifact).is_file()
    runlog = json.loads((scan_out / "runlog.json").read_text())
    assert runlog["k_max"] == 2  # flag values land in the run log
    assert runlog["seed_cap"] == 100
    assert runlog["counts"]["accepted"] == 1
    assert json.loads((tmp_path / "index.json").read_text())["functions"]

    metrics_path = tmp_path / "metrics.json"
    rc = cli.main([
        "evaluate",
        "--reports", str(scan_out / "reports.json"),
        "--manifest", str(DATA_DIR / "dataset_manifest.json"),
        "--out", str(metrics_path),
        "--repo", str(DATA_DIR / "corpus"),
    ])
    assert rc == cli.EXIT_OK
    metrics = json.loads(metrics_path.read_text())
    assert metrics["LZD"]["reproduced"] == 1
    assert metrics["LZD"]["fp"] == 0

    report_out = tmp_path / "report"
    rc = cli.main([
        "report",
        "--metrics", str(metrics_path),
        "--out-dir", str(report_out),
        "--ledger", str(scan_out / "ledger.json"),
    ])
    assert rc == cli.EXIT_OK
    assert (report_out / "summary.txt").is_file()
    assert (report_out / "metrics.csv").is_file()
    assert (report_out / "metrics_overview.png").stat().st_size > 0
    assert (report_out / "cost_breakdown.png").stat().st_size > 0
    summary = (report_out / "summary.txt").read_text()
    assert "LZD" in summary and "total" in summary
    csv_text = (report_out / "metrics.csv").read_text()
    assert csv_text.splitlines()[0].startswith("anti_pattern,")


def test_synthesize_without_examples_is_config_error(tmp_path, capsys):
    spec_dir = tmp_path / "specs"
    spec_dir.mkdir()
    (spec_dir / "manifest.json").write_text(json.dumps({"anti_patterns": [
        {"name": "E", "bug_type": "DBZ", "description": "x", "buggy": [], "nonbuggy": []},
    ]}))
    out_dir = tmp_path / "out"
    rc = cli.main([
        "synthesize",
        "--spec-dir", str(spec_dir),
        "--out-dir", str(out_dir),
        "--config", _config(tmp_path),
    ])
    assert rc == cli.EXIT_CONFIG
    assert not out_dir.exists()  # nothing written
    assert "configuration error" in capsys.readouterr().err


def test_scan_missing_repo_is_config_error(tmp_path):
    rc = cli.main([
        "scan",
        "--repo", str(tmp_path / "missing"),
        "--strategy", str(DATA_DIR / "artifacts" / "LZD" / "strategy.json"),
        "--prompt", str(DATA_DIR / "artifacts" / "LZD" / "prompt.json"),
        "--out-dir", str(tmp_path / "out"),
        "--config", _config(tmp_path),
    ])
    assert rc == cli.EXIT_CONFIG


def test_scan_replay_mode_needs_no_transport(tmp_path):
    def scan(out: Path) -> int:
        return cli.main([
            "scan",
            "--repo", str(DATA_DIR / "corpus"),
            "--strategy", str(DATA_DIR / "artifacts" / "IZC" / "strategy.json"),
            "--prompt", str(DATA_DIR / "artifacts" / "IZC" / "prompt.json"),
            "--out-dir", str(out),
            "--scope", "izc.c",
            "--mode", "replay",
            "--cassette-dir", str(DATA_DIR / "cassettes" / "e2e"),
            "--config", _config(tmp_path),
        ])

    first, second = tmp_path / "scan1", tmp_path / "scan2"
    assert scan(first) == cli.EXIT_OK
    assert scan(second) == cli.EXIT_OK
    sarif = json.loads((first / "reports.sarif").read_text())
    assert sarif["runs"][0]["results"][0]["ruleId"] == "IZC"
    # strict replay is byte-stable across whole CLI invocations
    for artifact in ("reports.json", "reports.sarif", "ledger.json", "runlog.json"):
        assert (first / artifact).read_bytes() == (second / artifact).read_bytes()


def test_scan_partial_failure_exit_code(tmp_path):
    # strict replay with one deleted detect cassette -> errored seed -> exit 1
    store = tmp_path / "cassettes"
    shutil.copytree(DATA_DIR / "cassettes" / "e2e", store)
    scan_out = tmp_path / "scan"
    rc = cli.main([
        "scan",
        "--repo", str(DATA_DIR / "corpus"),
        "--strategy", str(DATA_DIR / "artifacts" / "MSC" / "strategy.json"),
        "--prompt", str(DATA_DIR / "artifacts" / "MSC" / "prompt.json"),
        "--out-dir", str(scan_out),
        "--scope", "msc.c",
        "--mode", "replay",
        "--cassette-dir", str(store),
        "--config", _config(tmp_path),
    ])
    assert rc == cli.EXIT_OK
    runlog = json.loads((scan_out / "runlog.json").read_text())
    digest = runlog["outcomes"][0]["detect_digest"]
    (store / f"{digest}.json").unlink()
    rc = cli.main([
        "scan",
        "--repo", str(DATA_DIR / "corpus"),
        "--strategy", str(DATA_DIR / "artifacts" / "MSC" / "strategy.json"),
        "--prompt", str(DATA_DIR / "artifacts" / "MSC" / "prompt.json"),
        "--out-dir", str(tmp_path / "scan2"),
        "--scope", "msc.c",
        "--mode", "replay",
        "--cassette-dir", str(store),
        "--config", _config(tmp_path),
    ])
    assert rc == cli.EXIT_PARTIAL
