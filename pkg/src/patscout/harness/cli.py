"""Command-line entry points: synthesize, scan, evaluate, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from patscout.cindex.build import dump_index, index_repository
from patscout.detector import PipelineConfig, load_reports, run_pipeline, save_reports
from patscout.errors import ConfigurationError, PatscoutError
from patscout.gateway import (
    API_KEY_ENV,
    DEFAULT_PROFILES,
    CostLedger,
    HttpChatTransport,
    LlmGateway,
    ModelProfile,
)
from patscout.harness.dataset import load_adjudications, load_manifest
from patscout.harness.metrics import evaluate, save_metrics
from patscout.harness.report import render_report
from patscout.harness.sarif import emit_sarif, save_sarif
from patscout.prompts import DetectionPrompt, ReasoningHintSet, reflect_and_refine, synthesize_detection_prompt
from patscout.slicer import SlicerConfig
from patscout.strategy import RetrievalStrategy, load_anti_pattern_specs, synthesize_retrieval_strategy

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    return json.loads(p.read_text(encoding="utf-8"))


def _profile_from(config: dict, model: str | None) -> ModelProfile:
    model_id = model or config.get("model") or "claude-3-7-sonnet-thinking"
    base = DEFAULT_PROFILES.get(model_id, ModelProfile(model_id=model_id))
    overrides = (config.get("profiles") or {}).get(model_id, {})
    return ModelProfile(
        model_id=model_id,
        max_output_tokens=overrides.get("max_output_tokens", base.max_output_tokens),
        max_reasoning_tokens=overrides.get("max_reasoning_tokens", base.max_reasoning_tokens),
        price_per_million_in=overrides.get("price_per_million_in", base.price_per_million_in),
        price_per_million_out=overrides.get("price_per_million_out", base.price_per_million_out),
        temperature=overrides.get("temperature", base.temperature),
    )


def _gateway_from(args, config: dict, ledger: CostLedger | None = None) -> LlmGateway:
    profile = _profile_from(config, getattr(args, "model", None))
    mode = getattr(args, "mode", None) or config.get("mode") or "live"
    cassette_dir = getattr(args, "cassette_dir", None) or config.get("cassette_dir")
    transport = None
    if mode in ("live", "record", "hybrid"):
        base_url = config.get("base_url")
        if base_url:
            transport = HttpChatTransport(
                base_url, api_key_env=config.get("api_key_env", API_KEY_ENV))
    return LlmGateway(profile=profile, mode=mode, cassette_dir=cassette_dir,
                      transport=transport, ledger=ledger)


def cmd_synthesize(args) -> int:
    config = _load_config(args.config)
    specs = load_anti_pattern_specs(args.spec_dir)
    if args.anti_pattern:
        specs = [s for s in specs if s.name == args.anti_pattern]
        if not specs:
            raise ConfigurationError(f"anti-pattern {args.anti_pattern!r} not in spec directory")
    gateway = _gateway_from(args, config)
    hints = ReasoningHintSet.default(
        enabled=set(args.hints.split(",")) if args.hints else None,
        template_dir=args.hint_dir,
    )
    out_root = Path(args.out_dir)
    for spec in specs:
        strategy = synthesize_retrieval_strategy(spec, gateway)
        prompt = synthesize_detection_prompt(spec, hints, gateway)
        prompt = reflect_and_refine(prompt, spec, gateway, enabled=not args.no_reflection)
        target = out_root / spec.name
        target.mkdir(parents=True, exist_ok=True)
        strategy.save(target / "strategy.json")
        prompt.save(target / "prompt.json")
        print(f"synthesized {spec.name}: {target}/strategy.json, {target}/prompt.json")
    gateway.ledger.save(out_root / "synthesis_ledger.json")
    return EXIT_OK


def cmd_scan(args) -> int:
    config = _load_config(args.config)
    parallelism = args.parallelism if args.parallelism is not None else config.get("parallelism", 1)
    index = index_repository(
        args.repo,
        include_globs=args.include or None,
        exclude_globs=args.exclude or None,
        jobs=parallelism,
    )
    if args.dump_index:
        dump_index(index, args.dump_index)
    strategy = RetrievalStrategy.load(args.strategy)
    prompt = DetectionPrompt.load(args.prompt)
    ledger = CostLedger()
    gateway = _gateway_from(args, config, ledger=ledger)
    cfg = PipelineConfig(
        slicer=SlicerConfig(
            k_max=args.k_max if args.k_max is not None else config.get("k_max", 3),
            context_char_budget=args.char_budget or config.get("context_char_budget", 24000),
        ),
        seed_cap=args.seed_cap if args.seed_cap is not None else config.get("seed_cap", 100),
        scope=args.scope or None,
        rng_seed=args.rng_seed if args.rng_seed is not None else config.get("rng_seed"),
        parallelism=parallelism,
        dump_slices=args.dump_slices,
    )
    reports, runlog = run_pipeline(index, strategy, prompt, cfg, gateway)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_reports(reports, out / "reports.json")
    save_sarif(emit_sarif(reports, index), out / "reports.sarif")
    ledger.save(out / "ledger.json")
    runlog.save(out / "runlog.json")

    counts = runlog.counts()
    print(f"scan {runlog.run_id} [{strategy.anti_pattern}]: "
          f"{counts['seeds']} seeds -> {counts['accepted']} accepted, "
          f"{counts['rejected']} rejected, {counts['no_bug']} no-bug, "
          f"{counts['errored']} errored")
    print(f"artifacts in {out}")
    return EXIT_PARTIAL if counts["errored"] else EXIT_OK


def cmd_evaluate(args) -> int:
    reports = load_reports(args.reports)
    manifest = load_manifest(args.manifest)
    adjudications = load_adjudications(args.adjudications)
    index = None
    if args.repo:
        index = index_repository(args.repo)
    metrics = evaluate(reports, manifest, adjudications, window=args.window, index=index)
    save_metrics(metrics, args.out)
    total = metrics["total"]
    prec = "n/a" if total.precision is None else f"{total.precision:.2f}"
    print(f"evaluated {len(reports)} reports over {total.cases} cases: "
          f"precision {prec}%, recall {total.recall:.2f}%, F1 {total.f1:.2f}")
    print(f"metrics written to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    written = render_report(args.metrics, args.out_dir, ledger_path=args.ledger)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patscout",
        description="Learn bug anti-patterns from labeled examples and audit C/C++ "
                    "repositories with LLM-assisted slicing and detection.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="synthesize strategy.json and prompt.json from examples")
    p.add_argument("--spec-dir", required=True, help="directory with manifest.json plus example files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--anti-pattern", help="synthesize only this anti-pattern")
    p.add_argument("--mode", choices=["live", "record", "replay", "hybrid"])
    p.add_argument("--cassette-dir")
    p.add_argument("--model")
    p.add_argument("--config")
    p.add_argument("--hints", help="comma-separated hint categories (default: all)")
    p.add_argument("--hint-dir", help="directory overriding the hint templates")
    p.add_argument("--no-reflection", action="store_true")
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("scan", help="run the detection pipeline over a repository")
    p.add_argument("--repo", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k-max", type=int, default=None, help="max function-boundary crossings (default 3)")
    p.add_argument("--seed-cap", type=int, default=None, help="max seeds per run (default 100)")
    p.add_argument("--char-budget", type=int, default=None)
    p.add_argument("--scope", action="append", help="restrict seeds to matching files (repeatable)")
    p.add_argument("--include", action="append", help="file include glob (repeatable)")
    p.add_argument("--exclude", action="append", help="file exclude glob (repeatable)")
    p.add_argument("--rng-seed", type=int, default=None)
    p.add_argument("--parallelism", type=int, default=None, help="seed-level worker bound (default 1)")
    p.add_argument("--mode", choices=["live", "record", "replay", "hybrid"])
    p.add_argument("--cassette-dir")
    p.add_argument("--model")
    p.add_argument("--config")
    p.add_argument("--dump-slices", help="directory for rendered context dumps")
    p.add_argument("--dump-index", help="write index.json here for debugging")
    p.set_defaults(fn=cmd_scan)

    p = sub.add_parser("evaluate", help="score reports against a dataset manifest")
    p.add_argument("--reports", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--adjudications")
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=5, help="line window for ground-truth matching")
    p.add_argument("--repo", help="repository root, enables function-containment matching")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="render summaries, CSV and figures from metrics")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ledger")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PatscoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
