from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
DATA_DIR = TESTS_DIR / "data"
sys.path.insert(0, str(TESTS_DIR))

from patscout.cindex.build import index_repository
from patscout.gateway import CostLedger, LlmGateway, ModelProfile
from patscout.prompts import DetectionPrompt
from patscout.strategy import RetrievalStrategy, load_anti_pattern_specs
from patscout.testing import ScriptedTransport

ANTI_PATTERNS = ["OSO", "NOF", "ASO", "IZC", "LZD", "UEC", "MSC"]

TEST_PROFILE = ModelProfile(
    model_id="scripted-stub",
    max_output_tokens=4096,
    max_reasoning_tokens=2048,
    price_per_million_in=3.0,
    price_per_million_out=15.0,
)


@pytest.fixture(scope="session")
def corpus_index():
    return index_repository(DATA_DIR / "corpus")


@pytest.fixture(scope="session")
def specs_by_name():
    return {s.name: s for s in load_anti_pattern_specs(DATA_DIR / "specdir")}


@pytest.fixture
def scripted_gateway():
    def make(mode: str = "live", cassette_dir=None, transport=None, ledger=None):
        return LlmGateway(
            profile=TEST_PROFILE,
            mode=mode,
            cassette_dir=cassette_dir,
            transport=transport if transport is not None else ScriptedTransport(),
            ledger=ledger if ledger is not None else CostLedger(),
        )
    return make


def load_artifacts(name: str) -> tuple[RetrievalStrategy, DetectionPrompt]:
    base = DATA_DIR / "artifacts" / name
    return RetrievalStrategy.load(base / "strategy.json"), DetectionPrompt.load(base / "prompt.json")


def write_repo(tmp_path: Path, files: dict[str, str]) -> Path:
    root = tmp_path / "repo"
    root.mkdir(parents=True, exist_ok=True)
    for rel, content in files.items():
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, encoding="utf-8")
    return root


def find_statement(fn, needle: str) -> int:
    for stmt in fn.statements:
        if needle in stmt.text:
            return stmt.id
    raise AssertionError(f"no statement containing {needle!r} in {fn.id}")


def function_named(index, name: str):
    ids = index.functions_named(name)
    assert ids, f"function {name} not found"
    return index.function(ids[0])
