"""Detection prompt synthesis with value-category reasoning hints and a
reflection pass."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from patscout.errors import ConfigurationError, GatewayError, SynthesisError
from patscout.strategy import AntiPatternSpec, extract_json_block

log = logging.getLogger(__name__)

PROMPT_SCHEMA_VERSION = 1

HINT_CATEGORIES = ("primitive", "pointer", "buffer")

# The structured candidate schema every detector response must follow. It is
# identical for every prompt of a run; the detector's parser depends on it.
OUTPUT_SCHEMA: dict = {
    "type": "object",
    "required": ["verdict", "path_steps", "explanation"],
    "properties": {
        "verdict": {"enum": ["bug", "no_bug"]},
        "path_steps": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["file", "line", "note"],
                "properties": {
                    "file": {"type": "string"},
                    "line": {"type": "integer"},
                    "note": {"type": "string"},
                },
            },
        },
        "explanation": {"type": "string"},
    },
}


def _load_hint(name: str, override_dir: str | Path | None) -> str:
    if override_dir is not None:
        p = Path(override_dir) / f"{name}.txt"
        if p.is_file():
            return p.read_text(encoding="utf-8")
    return resources.files("patscout").joinpath(f"data/hints/{name}.txt").read_text(encoding="utf-8")


@dataclass(frozen=True)
class ReasoningHintSet:
    primitive_hint: str
    pointer_hint: str
    buffer_hint: str
    enabled: frozenset[str]

    def __post_init__(self) -> None:
        if not self.enabled:
            raise ConfigurationError("hint set needs at least one enabled category")
        unknown = self.enabled - set(HINT_CATEGORIES)
        if unknown:
            raise ConfigurationError(f"unknown hint categories: {sorted(unknown)}")
        for cat in self.enabled:
            if not self.text_for(cat).strip():
                raise ConfigurationError(f"enabled hint {cat!r} has empty text")

    def text_for(self, category: str) -> str:
        return {
            "primitive": self.primitive_hint,
            "pointer": self.pointer_hint,
            "buffer": self.buffer_hint,
        }[category]

    @classmethod
    def default(cls, enabled: set[str] | None = None,
                template_dir: str | Path | None = None) -> "ReasoningHintSet":
        """Hints loaded from the editable template files; all three value
        categories are enabled unless narrowed."""
        return cls(
            primitive_hint=_load_hint("primitive", template_dir),
            pointer_hint=_load_hint("pointer", template_dir),
            buffer_hint=_load_hint("buffer", template_dir),
            enabled=frozenset(enabled if enabled is not None else HINT_CATEGORIES),
        )


@dataclass(frozen=True)
class FewShotBlock:
    label: str  # buggy | nonbuggy
    code: str
    reasoning: str


@dataclass(frozen=True)
class DetectionPrompt:
    anti_pattern: str
    semantics_summary: str
    few_shot_blocks: tuple[FewShotBlock, ...]
    hints: ReasoningHintSet
    output_schema: dict
    reflection_log: tuple[tuple[str, str, str], ...] = ()  # (draft digest, critique, revision digest)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_json(), sort_keys=True).encode("utf-8")).hexdigest()

    def render_system_text(self) -> str:
        parts = [
            f"You audit C/C++ code for one specific bug anti-pattern: {self.anti_pattern}.",
            "",
            "Anti-pattern semantics:",
            self.semantics_summary.strip(),
            "",
            "Reasoning strategies:",
        ]
        for cat in HINT_CATEGORIES:
            if cat in self.hints.enabled:
                parts.append(f"[{cat} values]")
                parts.append(self.hints.text_for(cat).strip())
        parts.append("")
        parts.append("Worked examples:")
        for i, block in enumerate(self.few_shot_blocks, 1):
            parts.append(f"--- example {i} ({block.label}) ---")
            parts.append(block.code)
            if block.reasoning:
                parts.append(f"reasoning: {block.reasoning}")
        parts.append("")
        parts.append(
            "You will be shown one self-contained function assembled from program "
            "slices. Lines carry origin comments of the form /* origin: file:line */; "
            "cite those coordinates. Decide whether the function exhibits the "
            "anti-pattern. Respond with a single JSON object only, matching this "
            "schema (verdict \"no_bug\" needs an empty path_steps list):")
        parts.append(json.dumps(self.output_schema, indent=2, sort_keys=True))
        return "\n".join(parts)

    def to_json(self) -> dict:
        return {
            "schema_version": PROMPT_SCHEMA_VERSION,
            "anti_pattern": self.anti_pattern,
            "semantics_summary": self.semantics_summary,
            "few_shot_blocks": [
                {"label": b.label, "code": b.code, "reasoning": b.reasoning}
                for b in self.few_shot_blocks
            ],
            "hints": {
                "primitive": self.hints.primitive_hint,
                "pointer": self.hints.pointer_hint,
                "buffer": self.hints.buffer_hint,
                "enabled": sorted(self.hints.enabled),
            },
            "output_schema": self.output_schema,
            "reflection_log": [list(entry) for entry in self.reflection_log],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DetectionPrompt":
        if doc.get("schema_version") != PROMPT_SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported prompt schema version: {doc.get('schema_version')!r}")
        hints = doc["hints"]
        return cls(
            anti_pattern=doc["anti_pattern"],
            semantics_summary=doc["semantics_summary"],
            few_shot_blocks=tuple(
                FewShotBlock(label=b["label"], code=b["code"], reasoning=b.get("reasoning", ""))
                for b in doc["few_shot_blocks"]
            ),
            hints=ReasoningHintSet(
                primitive_hint=hints["primitive"],
                pointer_hint=hints["pointer"],
                buffer_hint=hints["buffer"],
                enabled=frozenset(hints["enabled"]),
            ),
            output_schema=doc["output_schema"],
            reflection_log=tuple(tuple(entry) for entry in doc.get("reflection_log", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DetectionPrompt":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# synthesis


def _example_blocks(spec: AntiPatternSpec) -> list[tuple[str, str]]:
    blocks = [("buggy", ex.code) for ex in spec.buggy_examples]
    blocks += [("nonbuggy", ex.code) for ex in spec.nonbuggy_examples]
    return blocks


def _synthesis_messages(spec: AntiPatternSpec) -> list[dict]:
    blocks = _example_blocks(spec)
    lines = [
        f"Anti-pattern: {spec.name} (bug type {spec.bug_type})",
        f"Description: {spec.description}",
        "",
    ]
    for i, (label, code) in enumerate(blocks, 1):
        lines.append(f"--- example {i} ({label}) ---")
        lines.append(code)
    lines.append("")
    lines.append(
        "Produce (1) a low-level semantics summary of the anti-pattern: the concrete "
        "condition under which the bug fires, phrased so it can be checked against "
        "code, and (2) one short reasoning note per example, in order, explaining why "
        "it is or is not an instance.")
    schema = (
        'Respond with one JSON object only: {"semantics_summary": "...", '
        f'"example_reasoning": [exactly {len(blocks)} strings, one per example in order]}}')
    return [
        {"role": "system",
         "content": "You distill bug anti-patterns into detection logic for a code "
                    "auditing tool. " + schema},
        {"role": "user", "content": "\n".join(lines)},
    ]


def synthesize_detection_prompt(spec: AntiPatternSpec, hints: ReasoningHintSet,
                                llm) -> DetectionPrompt:
    """LLM produces the semantics summary and per-example reasoning; the
    assembled prompt embeds the examples verbatim, the enabled hints, and the
    fixed output schema. Two re-prompts on schema violations."""
    spec.validate()
    blocks = _example_blocks(spec)
    messages = _synthesis_messages(spec)
    raw: list[str] = []
    for attempt in range(3):
        exchange = llm.complete(messages, stage="prompt-synthesis", anti_pattern=spec.name)
        raw.append(exchange.response_text)
        try:
            doc = extract_json_block(exchange.response_text)
            summary = doc["semantics_summary"]
            reasoning = doc["example_reasoning"]
            if not isinstance(summary, str) or not summary.strip():
                raise ValueError("semantics_summary must be non-empty text")
            if not isinstance(reasoning, list) or len(reasoning) != len(blocks):
                raise ValueError(f"example_reasoning must have {len(blocks)} entries")
            return DetectionPrompt(
                anti_pattern=spec.name,
                semantics_summary=summary,
                few_shot_blocks=tuple(
                    FewShotBlock(label=label, code=code, reasoning=str(note))
                    for (label, code), note in zip(blocks, reasoning)
                ),
                hints=hints,
                output_schema=OUTPUT_SCHEMA,
            )
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            log.warning("prompt synthesis attempt %d invalid: %s", attempt + 1, exc)
            messages = messages + [
                {"role": "assistant", "content": exchange.response_text},
                {"role": "user",
                 "content": f"That response was invalid ({exc}). "
                            "Reply again with only the JSON object."},
            ]
    raise SynthesisError(f"prompt synthesis for {spec.name} failed schema validation 3 times", raw)


# ---------------------------------------------------------------------------
# reflection


def _reflection_messages(draft: DetectionPrompt, spec: AntiPatternSpec) -> list[dict]:
    blocks = _example_blocks(spec)
    lines = [
        "Here is a drafted detection prompt and the labeled examples it was built from.",
        "",
        "--- draft prompt ---",
        draft.render_system_text(),
        "",
        "For each example below, state the verdict this prompt would lead a careful "
        "reviewer to (\"bug\" or \"no_bug\"), then critique the prompt: would it "
        "misclassify any example, and why? If the semantics summary needs fixing, "
        "supply a revised one.",
    ]
    for i, (label, code) in enumerate(blocks, 1):
        lines.append(f"--- example {i} (expected: {'bug' if label == 'buggy' else 'no_bug'}) ---")
        lines.append(code)
    schema = (
        'Respond with one JSON object only: {"example_verdicts": ["bug"|"no_bug", ...], '
        '"critique": "...", "revised_semantics_summary": "..." or null}')
    return [
        {"role": "system", "content": "You review detection prompts for blind spots. " + schema},
        {"role": "user", "content": "\n".join(lines)},
    ]


def reflect_and_refine(draft: DetectionPrompt, spec: AntiPatternSpec, llm,
                       enabled: bool = True) -> DetectionPrompt:
    """One self-critique round against the examples; best-effort, a failed
    critique call returns the draft unchanged with a warning."""
    if not enabled:
        return draft
    blocks = _example_blocks(spec)
    expected = ["bug" if label == "buggy" else "no_bug" for label, _ in blocks]
    messages = _reflection_messages(draft, spec)
    for attempt in range(3):
        try:
            exchange = llm.complete(messages, stage="prompt-reflection", anti_pattern=spec.name)
        except GatewayError as exc:
            log.warning("reflection call failed (%s); keeping draft prompt", exc)
            return draft
        try:
            doc = extract_json_block(exchange.response_text)
            verdicts = doc["example_verdicts"]
            critique = str(doc.get("critique", ""))
            revised = doc.get("revised_semantics_summary")
            if not isinstance(verdicts, list) or len(verdicts) != len(expected):
                raise ValueError(f"example_verdicts must have {len(expected)} entries")
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            log.warning("reflection attempt %d invalid: %s", attempt + 1, exc)
            messages = messages + [
                {"role": "assistant", "content": exchange.response_text},
                {"role": "user",
                 "content": f"That response was invalid ({exc}). "
                            "Reply again with only the JSON object."},
            ]
            continue
        draft_digest = draft.digest()
        misclassified = [i for i, (got, want) in enumerate(zip(verdicts, expected)) if got != want]
        if misclassified and isinstance(revised, str) and revised.strip():
            refined = replace(draft, semantics_summary=revised)
            entry = (draft_digest, critique or f"revised after misclassifying examples {misclassified}",
                     refined.digest())
            return replace(refined, reflection_log=draft.reflection_log + (entry,))
        note = critique or "self-check passed; no revision needed"
        entry = (draft_digest, note, draft_digest)
        return replace(draft, reflection_log=draft.reflection_log + (entry,))
    log.warning("reflection produced no valid critique; keeping draft prompt")
    return draft
