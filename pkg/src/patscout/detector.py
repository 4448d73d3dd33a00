"""Detection over inlined contexts, independent validation, and the
seed-to-report pipeline."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from patscout.cindex.model import CodeIndex
from patscout.errors import ContractViolationError, GatewayError, PatscoutError, SynthesisError
from patscout.gateway import LlmExchange, LlmGateway, exchange_dollars
from patscout.prompts import DetectionPrompt
from patscout.slicer import DetectionContext, SlicerConfig, inline_slices, interprocedural_slice
from patscout.strategy import (
    RetrievalStrategy,
    Seed,
    default_rng_seed,
    extract_json_block,
    extract_seeds,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathStep:
    file: str
    line: int
    note: str


@dataclass(frozen=True)
class BugCandidate:
    seed: Seed
    path_steps: tuple[PathStep, ...]
    explanation: str
    raw_response_digest: str


@dataclass(frozen=True)
class ValidationVerdict:
    accepted: bool
    reasons: str
    checks: tuple[tuple[str, bool], ...]

    def __post_init__(self) -> None:
        if self.accepted and not all(upheld for _, upheld in self.checks):
            raise ContractViolationError("accepted verdicts require every check upheld")


@dataclass(frozen=True)
class BugReport:
    candidate: BugCandidate
    verdict: ValidationVerdict
    anti_pattern: str
    cost: tuple[int, int, float, float]  # tokens in, tokens out, dollars, seconds
    run_id: str

    def to_json(self) -> dict:
        return {
            "anti_pattern": self.anti_pattern,
            "run_id": self.run_id,
            "seed": {
                "function": self.candidate.seed.statement[0],
                "statement": self.candidate.seed.statement[1],
                "ident": self.candidate.seed.captured_ident,
                "kind": self.candidate.seed.seed_kind,
            },
            "path_steps": [
                {"file": s.file, "line": s.line, "note": s.note}
                for s in self.candidate.path_steps
            ],
            "explanation": self.candidate.explanation,
            "validation": {
                "accepted": self.verdict.accepted,
                "reasons": self.verdict.reasons,
                "checks": [{"claim": c, "upheld": u} for c, u in self.verdict.checks],
            },
            "cost": {
                "tokens_in": self.cost[0],
                "tokens_out": self.cost[1],
                "dollars": self.cost[2],
                "seconds": self.cost[3],
            },
        }


def reports_to_json(reports: list[BugReport]) -> dict:
    return {"reports": [r.to_json() for r in reports]}


def report_from_json(doc: dict) -> BugReport:
    seed = Seed(
        statement=(doc["seed"]["function"], doc["seed"]["statement"]),
        captured_ident=doc["seed"]["ident"],
        seed_kind=doc["seed"]["kind"],
        rule_index=doc["seed"].get("rule_index", 0),
    )
    candidate = BugCandidate(
        seed=seed,
        path_steps=tuple(PathStep(s["file"], s["line"], s.get("note", ""))
                         for s in doc["path_steps"]),
        explanation=doc.get("explanation", ""),
        raw_response_digest=doc.get("raw_response_digest", ""),
    )
    validation = doc.get("validation", {})
    verdict = ValidationVerdict(
        accepted=bool(validation.get("accepted", False)),
        reasons=validation.get("reasons", ""),
        checks=tuple((c["claim"], bool(c["upheld"])) for c in validation.get("checks", [])),
    )
    cost = doc.get("cost", {})
    return BugReport(
        candidate=candidate,
        verdict=verdict,
        anti_pattern=doc["anti_pattern"],
        cost=(cost.get("tokens_in", 0), cost.get("tokens_out", 0),
              cost.get("dollars", 0.0), cost.get("seconds", 0.0)),
        run_id=doc.get("run_id", ""),
    )


def load_reports(path: str | Path) -> list[BugReport]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [report_from_json(r) for r in doc.get("reports", [])]


def save_reports(reports: list[BugReport], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(reports_to_json(reports), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _detect_messages(context: DetectionContext, prompt: DetectionPrompt) -> list[dict]:
    return [
        {"role": "system", "content": prompt.render_system_text()},
        {"role": "user",
         "content": "Audit this context. Cite path steps by the origin comments.\n\n"
                    + context.rendered},
    ]


def _parse_candidate(text: str, context: DetectionContext, seed: Seed,
                     digest: str) -> BugCandidate | None:
    doc = extract_json_block(text)
    verdict = doc.get("verdict")
    if verdict not in ("bug", "no_bug"):
        raise ValueError(f"verdict must be bug/no_bug, got {verdict!r}")
    if verdict == "no_bug":
        return None
    steps_doc = doc.get("path_steps")
    if not isinstance(steps_doc, list) or not steps_doc:
        raise ValueError("bug verdicts need a non-empty path_steps list")
    origins = context.origin_pairs()
    steps = []
    for raw in steps_doc:
        step = PathStep(file=str(raw.get("file", "")), line=int(raw.get("line", -1)),
                        note=str(raw.get("note", "")))
        if (step.file, step.line) not in origins:
            raise ValueError(f"path step {step.file}:{step.line} is outside the context origin map")
        steps.append(step)
    return BugCandidate(
        seed=seed,
        path_steps=tuple(steps),
        explanation=str(doc.get("explanation", "")),
        raw_response_digest=digest,
    )


def detect(context: DetectionContext, prompt: DetectionPrompt, llm: LlmGateway,
           seed: Seed, anti_pattern: str = "") -> tuple[BugCandidate | None, list[LlmExchange]]:
    """One detection conversation over a rendered context.

    Schema-violating responses are retried twice and then treated as
    "no bug" with a diagnostic; that default preserves precision. Gateway
    failures propagate so the seed can be marked unanalyzed.
    """
    if not context.rendered.strip():
        raise ContractViolationError("detect requires a non-empty rendered context")
    messages = _detect_messages(context, prompt)
    exchanges: list[LlmExchange] = []
    for attempt in range(3):
        exchange = llm.complete(messages, stage="detect", anti_pattern=anti_pattern)
        exchanges.append(exchange)
        digest = hashlib.sha256(exchange.response_text.encode("utf-8")).hexdigest()
        try:
            return _parse_candidate(exchange.response_text, context, seed, digest), exchanges
        except (ValueError, json.JSONDecodeError) as exc:
            log.warning("detect response attempt %d invalid: %s", attempt + 1, exc)
            messages = messages + [
                {"role": "assistant", "content": exchange.response_text},
                {"role": "user",
                 "content": f"That response was invalid ({exc}). "
                            "Reply again with only the JSON object."},
            ]
    log.warning("detect responses stayed schema-invalid; defaulting to no-bug for %s", seed)
    return None, exchanges


_VALIDATOR_SYSTEM = (
    "You independently verify claimed bug paths in C/C++ code. You are given a "
    "self-contained function (assembled from program slices, with origin "
    "comments) and a list of claimed path steps. For each claim, re-derive it "
    "from the code alone: the cited origin must actually appear in the code, "
    "and the described step must follow from the statements shown. Uphold a "
    "claim only when both hold. Respond with one JSON object only: "
    '{"checks": [{"claim": "...", "upheld": true|false, "reason": "..."}], '
    '"summary": "..."} with exactly one check per claimed step, in order.'
)


def validate(candidate: BugCandidate, context: DetectionContext, llm: LlmGateway,
             anti_pattern: str = "") -> tuple[ValidationVerdict, list[LlmExchange]]:
    """Second, independent conversation: sees only the context and the claimed
    path, never the detector's explanation. Acceptance requires every claim
    upheld."""
    if not candidate.path_steps:
        return ValidationVerdict(accepted=False, reasons="candidate has no path steps",
                                 checks=()), []
    claims = [
        f"{i}. {step.file}:{step.line} -- {step.note}"
        for i, step in enumerate(candidate.path_steps, 1)
    ]
    messages = [
        {"role": "system", "content": _VALIDATOR_SYSTEM},
        {"role": "user",
         "content": "Code under audit:\n\n" + context.rendered
                    + "\n\nClaimed path steps:\n" + "\n".join(claims)},
    ]
    exchanges: list[LlmExchange] = []
    for attempt in range(3):
        exchange = llm.complete(messages, stage="validate", anti_pattern=anti_pattern)
        exchanges.append(exchange)
        try:
            doc = extract_json_block(exchange.response_text)
            checks_doc = doc.get("checks")
            if not isinstance(checks_doc, list) or len(checks_doc) != len(candidate.path_steps):
                raise ValueError(
                    f"checks must have {len(candidate.path_steps)} entries")
            checks = tuple(
                (str(c.get("claim", claims[i])), bool(c.get("upheld", False)))
                for i, c in enumerate(checks_doc)
            )
            accepted = bool(checks) and all(upheld for _, upheld in checks)
            return ValidationVerdict(
                accepted=accepted,
                reasons=str(doc.get("summary", "")),
                checks=checks,
            ), exchanges
        except (ValueError, json.JSONDecodeError) as exc:
            log.warning("validator response attempt %d invalid: %s", attempt + 1, exc)
            messages = messages + [
                {"role": "assistant", "content": exchange.response_text},
                {"role": "user",
                 "content": f"That response was invalid ({exc}). "
                            "Reply again with only the JSON object."},
            ]
    raise SynthesisError("validator kept returning schema-invalid output",
                         [e.response_text for e in exchanges])


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class PipelineConfig:
    slicer: SlicerConfig = field(default_factory=SlicerConfig)
    seed_cap: int = 100
    scope: list[str] | None = None
    rng_seed: int | None = None
    parallelism: int = 1
    dump_slices: str | None = None


@dataclass
class SeedOutcome:
    seed: Seed
    outcome: str  # no_bug | accepted | rejected | errored
    detect_digest: str = ""
    validate_digest: str = ""
    note: str = ""


@dataclass
class RunLog:
    run_id: str
    anti_pattern: str
    k_max: int
    seed_cap: int
    rng_seed: int | None
    seeds: int
    outcomes: list[SeedOutcome] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        tally = {"seeds": self.seeds, "no_bug": 0, "accepted": 0, "rejected": 0, "errored": 0}
        for o in self.outcomes:
            tally[o.outcome] += 1
        return tally

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "anti_pattern": self.anti_pattern,
            "k_max": self.k_max,
            "seed_cap": self.seed_cap,
            "rng_seed": self.rng_seed,
            "counts": self.counts(),
            "outcomes": [
                {
                    "seed": {
                        "function": o.seed.statement[0],
                        "statement": o.seed.statement[1],
                        "ident": o.seed.captured_ident,
                    },
                    "outcome": o.outcome,
                    "detect_digest": o.detect_digest,
                    "validate_digest": o.validate_digest,
                    "note": o.note,
                }
                for o in self.outcomes
            ],
            "diagnostics": list(self.diagnostics),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def _analyze_seed(index: CodeIndex, seed: Seed, prompt: DetectionPrompt,
                  cfg: PipelineConfig, llm: LlmGateway,
                  anti_pattern: str, run_id: str) -> tuple[SeedOutcome, BugReport | None, list[str]]:
    diags: list[str] = []
    try:
        slice_ = interprocedural_slice(index, seed, cfg.slicer)
        diags.extend(slice_.diagnostics)
        context = inline_slices(index, slice_, cfg.slicer)
        if cfg.dump_slices:
            _dump_context(cfg.dump_slices, seed, context)
        candidate, detect_ex = detect(context, prompt, llm, seed, anti_pattern)
        detect_digest = detect_ex[-1].request_digest if detect_ex else ""
        if candidate is None:
            return SeedOutcome(seed, "no_bug", detect_digest=detect_digest), None, diags
        verdict, validate_ex = validate(candidate, context, llm, anti_pattern)
        validate_digest = validate_ex[-1].request_digest if validate_ex else ""
        tokens_in = sum(e.tokens_in for e in detect_ex + validate_ex)
        tokens_out = sum(e.tokens_out for e in detect_ex + validate_ex)
        dollars = round(sum(exchange_dollars(e, llm.profile) for e in detect_ex + validate_ex), 4)
        seconds = sum(e.latency_ms for e in detect_ex + validate_ex) / 1000.0
        if verdict.accepted:
            report = BugReport(candidate=candidate, verdict=verdict, anti_pattern=anti_pattern,
                               cost=(tokens_in, tokens_out, dollars, seconds), run_id=run_id)
            return SeedOutcome(seed, "accepted", detect_digest, validate_digest), report, diags
        # rejected candidates stay in the run log, never in reports
        return SeedOutcome(seed, "rejected", detect_digest, validate_digest,
                           note=verdict.reasons), None, diags
    except (GatewayError, SynthesisError) as exc:
        return SeedOutcome(seed, "errored", note=str(exc)), None, diags
    except PatscoutError as exc:
        return SeedOutcome(seed, "errored", note=f"pipeline failure: {exc}"), None, diags


def _dump_context(directory: str, seed: Seed, context: DetectionContext) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    base = f"{seed.statement[0].replace('/', '_').replace(':', '_')}_{seed.statement[1]}"
    (out / f"{base}.c").write_text(context.rendered, encoding="utf-8")
    (out / f"{base}.json").write_text(
        json.dumps(
            {
                "seed": {"function": seed.statement[0], "statement": seed.statement[1],
                         "ident": seed.captured_ident},
                "seed_marker": context.seed_marker,
                "truncated": context.truncated,
                "origin_map": [
                    {"rendered_line": r, "file": p, "line": l} for r, p, l in context.origin_map
                ],
            },
            indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def run_pipeline(index: CodeIndex, strategy: RetrievalStrategy, prompt: DetectionPrompt,
                 cfg: PipelineConfig, llm: LlmGateway) -> tuple[list[BugReport], RunLog]:
    """extract seeds -> slice -> inline -> detect -> validate, per seed.

    Partial failures never abort the run; each seed lands in exactly one of
    no_bug / accepted / rejected / errored.
    """
    if strategy.anti_pattern != prompt.anti_pattern:
        raise ContractViolationError(
            f"strategy is for {strategy.anti_pattern!r} but prompt is for {prompt.anti_pattern!r}")
    run_id = hashlib.sha256(
        (strategy.digest() + prompt.digest() + index.digest()).encode("utf-8")).hexdigest()[:12]
    rng_seed = cfg.rng_seed if cfg.rng_seed is not None else default_rng_seed(strategy, index)
    seeds = extract_seeds(index, strategy, scope=cfg.scope, cap=cfg.seed_cap,
                          rng_seed=rng_seed)
    runlog = RunLog(
        run_id=run_id,
        anti_pattern=strategy.anti_pattern,
        k_max=cfg.slicer.k_max,
        seed_cap=cfg.seed_cap,
        rng_seed=rng_seed,
        seeds=len(seeds),
    )
    if not seeds:
        runlog.diagnostics.append("0 seeds matched in scope")
        return [], runlog

    def work(seed: Seed):
        return _analyze_seed(index, seed, prompt, cfg, llm, strategy.anti_pattern, run_id)

    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(work, seeds))
    else:
        results = [work(seed) for seed in seeds]

    reports: list[BugReport] = []
    for outcome, report, diags in results:  # results stay in seed order
        runlog.outcomes.append(outcome)
        runlog.diagnostics.extend(diags)
        if report is not None:
            reports.append(report)
    return reports, runlog
