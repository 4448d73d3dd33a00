"""Seed-extraction strategies: synthesis, serialization and execution.

The extractor is a small declarative matcher DSL executed by the tool, not
free-form code emitted by the LLM, so a synthesized strategy can be stored,
audited and re-run without further LLM calls.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass
from pathlib import Path

from patscout.cindex.model import CodeIndex, FunctionRecord, StatementNode
from patscout.cindex.parser import identifiers_in, match_bracket, split_call_arguments, tokenize
from patscout.errors import ConfigurationError, ContractViolationError, SynthesisError

log = logging.getLogger(__name__)

STRATEGY_SCHEMA_VERSION = 1

BUG_TYPES = {"OOB", "DBZ", "MLK", "NPD", "custom"}
TARGETS = {"call", "binary_op", "declaration", "parameter", "allocation", "index_access"}
SEED_KINDS = {"faulty_value", "dangerous_operand"}
_CAPTURES_BY_TARGET = {
    "call": {"arg", "lhs"},
    "allocation": {"arg", "lhs"},
    "binary_op": {"lhs", "rhs"},
    "declaration": {"declared_ident"},
    "parameter": {"declared_ident"},
    "index_access": {"base", "index"},
}
_DEFAULT_ALLOCATORS = "malloc|calloc|realloc|strdup|strndup|aligned_alloc"

_BUG_MARKER = re.compile(r"//\s*BUG\b|/\*\s*BUG\b")


@dataclass(frozen=True)
class ExampleSnippet:
    code: str
    bug_lines: tuple[int, ...] = ()

    @classmethod
    def from_code(cls, code: str) -> "ExampleSnippet":
        marks = tuple(
            i + 1 for i, line in enumerate(code.splitlines()) if _BUG_MARKER.search(line)
        )
        return cls(code=code, bug_lines=marks)


@dataclass(frozen=True)
class AntiPatternSpec:
    name: str
    bug_type: str
    description: str
    buggy_examples: tuple[ExampleSnippet, ...]
    nonbuggy_examples: tuple[ExampleSnippet, ...] = ()

    def validate(self) -> None:
        if not self.name:
            raise ConfigurationError("anti-pattern spec needs a name")
        if self.bug_type not in BUG_TYPES:
            raise ConfigurationError(f"unknown bug type {self.bug_type!r}")
        if not self.buggy_examples:
            raise ConfigurationError(f"{self.name}: at least one buggy example is required")


@dataclass(frozen=True)
class MatcherRule:
    target: str
    capture: str  # lhs | rhs | declared_ident | base | index | arg(k)
    seed_kind: str
    name_pattern: str | None = None
    operator: str | None = None

    def arg_index(self) -> int | None:
        m = re.fullmatch(r"arg\((\d+)\)", self.capture)
        return int(m.group(1)) if m else None

    def validate(self) -> None:
        if self.target not in TARGETS:
            raise ConfigurationError(f"unknown matcher target {self.target!r}")
        if self.seed_kind not in SEED_KINDS:
            raise ConfigurationError(f"unknown seed kind {self.seed_kind!r}")
        legal = _CAPTURES_BY_TARGET[self.target]
        cap = "arg" if self.arg_index() is not None else self.capture
        if cap not in legal:
            raise ConfigurationError(
                f"capture {self.capture!r} is not legal for target {self.target!r}")
        if self.target == "binary_op" and not self.operator:
            raise ConfigurationError("binary_op rules need an operator token")


@dataclass(frozen=True)
class SeedExtractorSpec:
    rules: tuple[MatcherRule, ...]

    def validate(self) -> None:
        if not self.rules:
            raise ConfigurationError("extractor needs at least one rule")
        for rule in self.rules:
            rule.validate()


@dataclass(frozen=True)
class RetrievalStrategy:
    extractor: SeedExtractorSpec
    direction: str  # forward | backward
    anti_pattern: str
    provenance: str = "handwritten"

    def validate(self) -> None:
        if self.direction not in ("forward", "backward"):
            raise ConfigurationError(f"unknown direction {self.direction!r}")
        self.extractor.validate()
        wanted = "faulty_value" if self.direction == "forward" else "dangerous_operand"
        for rule in self.extractor.rules:
            if rule.seed_kind != wanted:
                raise ConfigurationError(
                    f"direction {self.direction} requires seed_kind {wanted}, "
                    f"rule has {rule.seed_kind}")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()

    def to_json(self) -> dict:
        return {
            "schema_version": STRATEGY_SCHEMA_VERSION,
            "anti_pattern": self.anti_pattern,
            "direction": self.direction,
            "provenance": self.provenance,
            "rules": [
                {
                    "target": r.target,
                    "capture": r.capture,
                    "seed_kind": r.seed_kind,
                    "name_pattern": r.name_pattern,
                    "operator": r.operator,
                }
                for r in self.extractor.rules
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RetrievalStrategy":
        if doc.get("schema_version") != STRATEGY_SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported strategy schema version: {doc.get('schema_version')!r}")
        rules = tuple(
            MatcherRule(
                target=r["target"],
                capture=r["capture"],
                seed_kind=r["seed_kind"],
                name_pattern=r.get("name_pattern"),
                operator=r.get("operator"),
            )
            for r in doc.get("rules", [])
        )
        strategy = cls(
            extractor=SeedExtractorSpec(rules=rules),
            direction=doc.get("direction", ""),
            anti_pattern=doc.get("anti_pattern", ""),
            provenance=doc.get("provenance", "file"),
        )
        strategy.validate()
        return strategy

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RetrievalStrategy":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class Seed:
    statement: tuple[str, int]  # (function id, statement id)
    captured_ident: str
    seed_kind: str
    rule_index: int


# ---------------------------------------------------------------------------
# matching


def _name_matches(name: str, pattern: str | None) -> bool:
    if pattern is None:
        return True
    return any(fnmatch.fnmatch(name, alt) for alt in pattern.split("|"))


def _first_ident(expr: str) -> str | None:
    ids = identifiers_in(expr)
    return ids[0] if ids else None


def _operand_ident(text: str, operator: str, side: str) -> list[str]:
    """Identifier captured on one side of each top-level ``operator`` token."""
    toks = tokenize(text)
    found: list[str] = []
    for i, t in enumerate(toks):
        if t.kind != "punct" or t.text != operator:
            continue
        if side == "rhs":
            j = i + 1
            while j < len(toks) and toks[j].kind == "punct" and toks[j].text in ("*", "&", "-", "+", "!", "~", "("):
                if toks[j].text == "(":
                    close = match_bracket(toks, j)
                    inner = text[toks[j].offset + 1: toks[close].offset]
                    ident = _first_ident(inner)
                    if ident:
                        found.append(ident)
                    j = None  # handled
                    break
                j += 1
            if j is None:
                continue
            if j < len(toks) and toks[j].kind == "ident":
                ids = identifiers_in(toks[j].text)
                if ids:
                    found.append(ids[0])
        else:  # lhs
            j = i - 1
            if j < 0:
                continue
            if toks[j].kind == "punct" and toks[j].text in (")", "]"):
                depth = 0
                k = j
                while k >= 0:
                    if toks[k].text in (")", "]"):
                        depth += 1
                    elif toks[k].text in ("(", "["):
                        depth -= 1
                        if depth == 0:
                            break
                    k -= 1
                base = k - 1
                # indexed or called expression: prefer the base identifier
                while base >= 0 and toks[base].kind == "punct" and toks[base].text in ("->", "."):
                    base -= 1
                if base >= 0 and toks[base].kind == "ident":
                    j = base
                else:
                    inner = text[toks[k].offset: toks[j].offset + 1]
                    ident = _first_ident(inner)
                    if ident:
                        found.append(ident)
                    continue
            # walk member chains back to the owning object
            while j - 1 >= 0 and toks[j - 1].kind == "punct" and toks[j - 1].text in ("->", "."):
                j -= 2
            if j >= 0 and toks[j].kind == "ident":
                ids = identifiers_in(toks[j].text)
                if ids:
                    found.append(ids[0])
    return found


def _index_accesses(text: str) -> list[tuple[str | None, str | None]]:
    """(base ident, index ident) pairs for each subscript in ``text``."""
    toks = tokenize(text)
    out: list[tuple[str | None, str | None]] = []
    for i, t in enumerate(toks):
        if t.kind != "punct" or t.text != "[":
            continue
        j = i - 1
        while j - 1 >= 0 and toks[j - 1].kind == "punct" and toks[j - 1].text in ("->", "."):
            j -= 2
        base = toks[j].text if j >= 0 and toks[j].kind == "ident" else None
        close = match_bracket(toks, i)
        inner = text[t.offset + 1: toks[close].offset] if close > i else ""
        out.append((base, _first_ident(inner)))
    return out


def _match_rule(fn: FunctionRecord, stmt: StatementNode, rule: MatcherRule,
                rule_index: int) -> list[Seed]:
    mentioned = set(stmt.defs) | set(stmt.uses) | set(identifiers_in(stmt.text))
    seeds: list[Seed] = []

    def add(ident: str | None) -> None:
        if ident and ident in mentioned:
            seeds.append(Seed(statement=(fn.id, stmt.id), captured_ident=ident,
                              seed_kind=rule.seed_kind, rule_index=rule_index))

    if rule.target in ("call", "allocation"):
        pattern = rule.name_pattern
        if rule.target == "allocation" and pattern is None:
            pattern = _DEFAULT_ALLOCATORS
        for callee in sorted(stmt.callee_names):
            if not _name_matches(callee, pattern):
                continue
            arg_k = rule.arg_index()
            if arg_k is not None:
                for args in split_call_arguments(stmt.text, callee):
                    if arg_k < len(args):
                        add(_first_ident(args[arg_k]))
            elif rule.capture == "lhs":
                for name in sorted(stmt.defs):
                    add(name)
    elif rule.target == "binary_op":
        assert rule.operator is not None
        for ident in _operand_ident(stmt.text, rule.operator, rule.capture):
            add(ident)
    elif rule.target == "declaration":
        if stmt.kind == "decl":
            for name, _ty in stmt.decl_types:
                if _name_matches(name, rule.name_pattern):
                    add(name)
    elif rule.target == "index_access":
        for base, idx in _index_accesses(stmt.text):
            add(base if rule.capture == "base" else idx)
    return seeds


def _match_parameter_rule(fn: FunctionRecord, rule: MatcherRule, rule_index: int) -> list[Seed]:
    seeds: list[Seed] = []
    for pname, _ty in fn.params:
        if not pname or not _name_matches(pname, rule.name_pattern):
            continue
        for stmt in fn.statements:
            if pname in stmt.uses or pname in stmt.defs:
                seeds.append(Seed(statement=(fn.id, stmt.id), captured_ident=pname,
                                  seed_kind=rule.seed_kind, rule_index=rule_index))
                break
    return seeds


def seed_satisfies_rule(index: CodeIndex, seed: Seed, strategy: RetrievalStrategy) -> bool:
    """Re-check that a seed is reproduced by the rule that captured it."""
    fn = index.function(seed.statement[0])
    rule = strategy.extractor.rules[seed.rule_index]
    if rule.target == "parameter":
        return seed in _match_parameter_rule(fn, rule, seed.rule_index)
    stmt = fn.statement(seed.statement[1])
    return seed in _match_rule(fn, stmt, rule, seed.rule_index)


def default_rng_seed(strategy: RetrievalStrategy, index: CodeIndex) -> int:
    """Sampling seed derived from the strategy and index digests, so reruns
    over the same inputs sample identically."""
    basis = strategy.digest() + index.digest()
    return int(hashlib.sha256(basis.encode()).hexdigest()[:16], 16)


def extract_seeds(
    index: CodeIndex,
    strategy: RetrievalStrategy,
    scope: list[str] | None = None,
    cap: int = 100,
    rng_seed: int | None = None,
) -> list[Seed]:
    """Run every rule over every statement in scope, deterministically.

    When matches exceed ``cap`` a uniformly random sample of size ``cap`` is
    taken with a run-seeded RNG (default seed derives from the strategy and
    index digests), and the sample is returned in original match order.
    """
    if cap < 1:
        raise ContractViolationError("cap must be >= 1")
    strategy.validate()
    seeds: list[Seed] = []
    functions = sorted(index.functions, key=lambda f: (f.file, f.body_span[0], f.name))
    for fn in functions:
        if scope and not any(
            fnmatch.fnmatch(fn.file, pat) or fn.file == pat for pat in scope
        ):
            continue
        for rule_index, rule in enumerate(strategy.extractor.rules):
            if rule.target == "parameter":
                seeds.extend(_match_parameter_rule(fn, rule, rule_index))
                continue
            for stmt in fn.statements:
                seeds.extend(_match_rule(fn, stmt, rule, rule_index))
    if len(seeds) <= cap:
        return seeds
    if rng_seed is None:
        rng_seed = default_rng_seed(strategy, index)
    rng = random.Random(rng_seed)
    picked = sorted(rng.sample(range(len(seeds)), cap))
    log.info("seed cap hit: sampled %d of %d seeds (rng seed %d)", cap, len(seeds), rng_seed)
    return [seeds[i] for i in picked]


# ---------------------------------------------------------------------------
# synthesis

_RULE_SCHEMA_DOC = """\
Respond with a single JSON object, no prose, shaped exactly like this:
{
  "direction": "forward" | "backward",
  "rules": [
    {
      "target": "call" | "binary_op" | "declaration" | "parameter" | "allocation" | "index_access",
      "name_pattern": <glob over callee/identifier names, alternatives separated by "|", or null>,
      "operator": <operator token such as "/" for binary_op targets, else null>,
      "capture": "lhs" | "rhs" | "declared_ident" | "base" | "index" | "arg(k)",
      "seed_kind": "faulty_value" | "dangerous_operand"
    }
  ]
}
Pick "forward" with seed_kind "faulty_value" when the bug is triggered by a value
propagating onward (start of the flow, e.g. an allocation result). Pick
"backward" with seed_kind "dangerous_operand" when the bug manifests at an
operand that receives the value (end of the flow, e.g. a divisor or a buffer
offset). Every rule's seed_kind must agree with the chosen direction.
"""


def _synthesis_messages(spec: AntiPatternSpec) -> list[dict]:
    parts = [
        f"Anti-pattern: {spec.name} (bug type {spec.bug_type})",
        f"Description: {spec.description}",
        "",
        "Buggy examples:",
    ]
    for i, ex in enumerate(spec.buggy_examples, 1):
        parts.append(f"--- buggy example {i} ---")
        parts.append(ex.code)
    parts.append("Non-buggy examples:")
    for i, ex in enumerate(spec.nonbuggy_examples, 1):
        parts.append(f"--- non-buggy example {i} ---")
        parts.append(ex.code)
    parts.append("")
    parts.append("Derive the seed-extraction strategy for this anti-pattern.")
    return [
        {"role": "system",
         "content": "You design seed extractors for a code auditing tool. "
                    "A seed is the statement-level starting point for slicing. "
                    + _RULE_SCHEMA_DOC},
        {"role": "user", "content": "\n".join(parts)},
    ]


def extract_json_block(text: str) -> dict:
    """Pull the first JSON object out of an LLM response."""
    start = text.find("{")
    if start == -1:
        raise ValueError("no JSON object in response")
    depth = 0
    in_str = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return json.loads(text[start: i + 1])
    raise ValueError("unbalanced JSON object in response")


def _strategy_from_response(text: str, spec: AntiPatternSpec, provenance: str) -> RetrievalStrategy:
    doc = extract_json_block(text)
    rules = tuple(
        MatcherRule(
            target=r.get("target", ""),
            capture=r.get("capture", ""),
            seed_kind=r.get("seed_kind", ""),
            name_pattern=r.get("name_pattern"),
            operator=r.get("operator"),
        )
        for r in doc.get("rules", [])
    )
    strategy = RetrievalStrategy(
        extractor=SeedExtractorSpec(rules=rules),
        direction=doc.get("direction", ""),
        anti_pattern=spec.name,
        provenance=provenance,
    )
    strategy.validate()
    return strategy


def synthesize_retrieval_strategy(spec: AntiPatternSpec, llm) -> RetrievalStrategy:
    """Ask the LLM for a MatcherRule-schema strategy, with up to 2 re-prompts
    on schema violations. Three consecutive bad responses raise SynthesisError
    carrying the raw texts."""
    spec.validate()
    messages = _synthesis_messages(spec)
    raw: list[str] = []
    for attempt in range(3):
        exchange = llm.complete(messages, stage="strategy-synthesis", anti_pattern=spec.name)
        raw.append(exchange.response_text)
        try:
            return _strategy_from_response(exchange.response_text, spec, exchange.request_digest)
        except (ValueError, ConfigurationError, json.JSONDecodeError) as exc:
            log.warning("strategy synthesis attempt %d invalid: %s", attempt + 1, exc)
            messages = messages + [
                {"role": "assistant", "content": exchange.response_text},
                {"role": "user",
                 "content": f"That response was invalid ({exc}). "
                            "Reply again with only the JSON object, matching the schema exactly."},
            ]
    raise SynthesisError(
        f"strategy synthesis for {spec.name} failed schema validation 3 times", raw)


# ---------------------------------------------------------------------------
# spec directory loading


def load_anti_pattern_specs(directory: str | Path) -> list[AntiPatternSpec]:
    """Read AntiPatternSpecs from a directory holding manifest.json plus
    example files."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise ConfigurationError(f"no manifest.json under {directory}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    specs: list[AntiPatternSpec] = []
    for entry in manifest.get("anti_patterns", []):
        def _load(names: list[str]) -> tuple[ExampleSnippet, ...]:
            out = []
            for name in names:
                p = directory / name
                if not p.is_file():
                    raise ConfigurationError(f"example file missing: {p}")
                out.append(ExampleSnippet.from_code(p.read_text(encoding="utf-8")))
            return tuple(out)

        spec = AntiPatternSpec(
            name=entry.get("name", ""),
            bug_type=entry.get("bug_type", "custom"),
            description=entry.get("description", ""),
            buggy_examples=_load(entry.get("buggy", [])),
            nonbuggy_examples=_load(entry.get("nonbuggy", [])),
        )
        spec.validate()
        specs.append(spec)
    if not specs:
        raise ConfigurationError(f"manifest at {directory} lists no anti-patterns")
    return specs
