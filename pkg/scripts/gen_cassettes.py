#!/usr/bin/env python3
"""Regenerate the committed test artifacts and cassettes.

Uses the deterministic ScriptedTransport so the outputs are reproducible:
  tests/data/artifacts/<AP>/{strategy.json,prompt.json}   (synthesized once)
  tests/data/cassettes/e2e/<digest>.json                  (detect + validate)
  tests/data/cassettes/adversarial/<digest>.json          (validator probes)

Run from the repository root:  python scripts/gen_cassettes.py
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from patscout.cindex.build import index_repository
from patscout.detector import BugCandidate, PathStep, PipelineConfig, run_pipeline, validate
from patscout.gateway import CostLedger, LlmGateway, ModelProfile
from patscout.prompts import DetectionPrompt, ReasoningHintSet, reflect_and_refine, synthesize_detection_prompt
from patscout.slicer import SlicerConfig, inline_slices, interprocedural_slice
from patscout.strategy import RetrievalStrategy, extract_seeds, load_anti_pattern_specs, synthesize_retrieval_strategy
from patscout.testing import ScriptedTransport

DATA = ROOT / "tests" / "data"
ANTI_PATTERNS = ["OSO", "NOF", "ASO", "IZC", "LZD", "UEC", "MSC"]

PROFILE = ModelProfile(
    model_id="scripted-stub",
    max_output_tokens=4096,
    max_reasoning_tokens=2048,
    price_per_million_in=3.0,
    price_per_million_out=15.0,
)


def synthesize_artifacts() -> None:
    specs = {s.name: s for s in load_anti_pattern_specs(DATA / "specdir")}
    hints = ReasoningHintSet.default()
    gateway = LlmGateway(profile=PROFILE, mode="live", transport=ScriptedTransport())
    for name in ANTI_PATTERNS:
        spec = specs[name]
        strategy = synthesize_retrieval_strategy(spec, gateway)
        prompt = synthesize_detection_prompt(spec, hints, gateway)
        prompt = reflect_and_refine(prompt, spec, gateway)
        out = DATA / "artifacts" / name
        out.mkdir(parents=True, exist_ok=True)
        strategy.save(out / "strategy.json")
        prompt.save(out / "prompt.json")
        print(f"artifacts for {name} -> {out}")


def record_e2e_cassettes() -> None:
    cassette_dir = DATA / "cassettes" / "e2e"
    if cassette_dir.exists():
        shutil.rmtree(cassette_dir)
    index = index_repository(DATA / "corpus")
    for name in ANTI_PATTERNS:
        strategy = RetrievalStrategy.load(DATA / "artifacts" / name / "strategy.json")
        prompt = DetectionPrompt.load(DATA / "artifacts" / name / "prompt.json")
        gateway = LlmGateway(profile=PROFILE, mode="record", cassette_dir=cassette_dir,
                             transport=ScriptedTransport(), ledger=CostLedger())
        cfg = PipelineConfig(scope=[f"{name.lower()}.c"])
        reports, runlog = run_pipeline(index, strategy, prompt, cfg, gateway)
        counts = runlog.counts()
        print(f"{name}: {counts}")
        assert counts["accepted"] == 1 and counts["seeds"] == 1, (name, counts)
    print(f"e2e cassettes -> {cassette_dir} ({len(list(cassette_dir.glob('*.json')))} files)")


def record_adversarial_cassettes() -> None:
    cassette_dir = DATA / "cassettes" / "adversarial"
    if cassette_dir.exists():
        shutil.rmtree(cassette_dir)
    index = index_repository(DATA / "corpus")
    strategy = RetrievalStrategy.load(DATA / "artifacts" / "LZD" / "strategy.json")
    seeds = extract_seeds(index, strategy, scope=["lzd.c"], cap=100)
    cfg = SlicerConfig()
    context = inline_slices(index, interprocedural_slice(index, seeds[0], cfg), cfg)
    gateway = LlmGateway(profile=PROFILE, mode="record", cassette_dir=cassette_dir,
                         transport=ScriptedTransport())
    fabricated = BugCandidate(
        seed=seeds[0],
        path_steps=(
            PathStep("lzd.c", 2, "lanes holds the literal zero"),
            PathStep("lzd.c", 999, "fabricated step outside the context"),
        ),
        explanation="claims a line the context never showed",
        raw_response_digest="adversarial",
    )
    verdict, _ = validate(fabricated, context, gateway, anti_pattern="LZD")
    assert not verdict.accepted
    faithful = BugCandidate(
        seed=seeds[0],
        path_steps=(
            PathStep("lzd.c", 2, "lanes holds the literal zero"),
            PathStep("lzd.c", 4, "division by lanes"),
        ),
        explanation="grounded two-step path",
        raw_response_digest="faithful",
    )
    verdict, _ = validate(faithful, context, gateway, anti_pattern="LZD")
    assert verdict.accepted
    print(f"adversarial cassettes -> {cassette_dir} "
          f"({len(list(cassette_dir.glob('*.json')))} files)")


if __name__ == "__main__":
    synthesize_artifacts()
    record_e2e_cassettes()
    record_adversarial_cassettes()
