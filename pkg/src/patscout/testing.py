"""Deterministic offline stand-in for an LLM transport.

ScriptedTransport answers the pipeline's own prompts with rule-based logic:
strategy synthesis picks a direction and matcher rules from the anti-pattern
name and bug type, detection scans the rendered context for the planted
shape, validation re-checks claimed origins against the context text. It
exists so the full pipeline can run, record cassettes, and be tested with no
network and no nondeterminism. It is not a detector; its verdicts are only
as good as its tiny pattern table.
"""

from __future__ import annotations

import json
import math
import re

from patscout.errors import GatewayError

_ORIGIN = re.compile(r"/\*\s*origin:\s*(\S+?):(\d+)\s*\*/")
_SPEC_HEADER = re.compile(r"Anti-pattern:\s*(\S+)\s*\(bug type\s*(\S+)\)")
_EXPECTED = re.compile(r"\(expected:\s*(bug|no_bug)\)")
_CLAIM = re.compile(r"^\s*\d+\.\s*(\S+?):(\d+)\s*--", re.MULTILINE)
_AUDIT_AP = re.compile(r"bug anti-pattern:\s*(\S+?)\.")

_STRATEGIES = {
    "OSO": {"direction": "backward", "rules": [
        {"target": "call", "name_pattern": "memset|memcpy|memmove", "operator": None,
         "capture": "arg(2)", "seed_kind": "dangerous_operand"}]},
    "NOF": {"direction": "backward", "rules": [
        {"target": "index_access", "name_pattern": None, "operator": None,
         "capture": "index", "seed_kind": "dangerous_operand"}]},
    "ASO": {"direction": "backward", "rules": [
        {"target": "call", "name_pattern": "malloc|calloc|realloc", "operator": None,
         "capture": "arg(0)", "seed_kind": "dangerous_operand"}]},
    "IZC": {"direction": "backward", "rules": [
        {"target": "binary_op", "name_pattern": None, "operator": "/",
         "capture": "rhs", "seed_kind": "dangerous_operand"},
        {"target": "binary_op", "name_pattern": None, "operator": "%",
         "capture": "rhs", "seed_kind": "dangerous_operand"}]},
    "UEC": {"direction": "forward", "rules": [
        {"target": "call", "name_pattern": "malloc|calloc|strdup|realloc", "operator": None,
         "capture": "lhs", "seed_kind": "faulty_value"}]},
}
_STRATEGIES["LZD"] = _STRATEGIES["IZC"]
_STRATEGIES["MSC"] = _STRATEGIES["UEC"]

_BY_BUG_TYPE = {
    "OOB": _STRATEGIES["OSO"],
    "DBZ": _STRATEGIES["IZC"],
    "MLK": _STRATEGIES["UEC"],
    "NPD": _STRATEGIES["UEC"],
    "custom": {"direction": "forward", "rules": [
        {"target": "parameter", "name_pattern": None, "operator": None,
         "capture": "declared_ident", "seed_kind": "faulty_value"}]},
}

_SUMMARIES = {
    "OSO": "An offset or size computed for a buffer operation exceeds the capacity "
           "of the destination buffer, so the write runs past the end of the object.",
    "NOF": "An index used in a buffer read or write can become negative, moving the "
           "access before the start of the object.",
    "ASO": "A size computation feeding an allocation can overflow and wrap, so the "
           "allocated buffer is smaller than later accesses assume.",
    "IZC": "A conditional check on an unconstrained divisor is insufficient to rule "
           "out zero, so the division can still fault.",
    "LZD": "A literal zero value is used as a divisor without validation, directly "
           "or through a variable that holds the literal zero.",
    "UEC": "Cleanup code for an allocation exists but an early return or error exit "
           "can bypass it, leaking the object on that path.",
    "MSC": "An allocation has no corresponding cleanup anywhere on the path, so the "
           "object is always leaked.",
}


def _origins(text: str) -> list[tuple[str, int, str]]:
    """(file, line, rendered line text) for every origin-annotated line."""
    out = []
    for line in text.splitlines():
        m = _ORIGIN.search(line)
        if m:
            out.append((m.group(1), int(m.group(2)), line))
    return out


class ScriptedTransport:
    """Callable transport: request doc -> (text, tokens_in, tokens_out, latency_ms)."""

    def __init__(self, latency_ms: int = 250, fail_times: int = 0):
        self.latency_ms = latency_ms
        self.calls = 0
        self._fail_times = fail_times

    def __call__(self, request: dict) -> tuple[str, int, int, int]:
        self.calls += 1
        if self._fail_times > 0:
            self._fail_times -= 1
            raise GatewayError("scripted transport failure")
        system = request["messages"][0]["content"] if request["messages"] else ""
        user = request["messages"][-1]["content"] if request["messages"] else ""
        if "seed extractors" in system:
            text = self._strategy(user)
        elif "distill bug anti-patterns" in system:
            text = self._prompt_synthesis(user)
        elif "review detection prompts" in system:
            text = self._reflection(user)
        elif "independently verify claimed bug paths" in system:
            text = self._validate(user)
        elif "You audit C/C++ code" in system:
            text = self._detect(system, user)
        else:
            text = json.dumps({"error": "unrecognized request"})
        tokens_in = math.ceil(sum(len(m["content"]) for m in request["messages"]) / 4)
        tokens_out = math.ceil(len(text) / 4)
        return text, tokens_in, tokens_out, self.latency_ms

    # -- per-stage logic ----------------------------------------------------

    def _strategy(self, user: str) -> str:
        m = _SPEC_HEADER.search(user)
        name = m.group(1) if m else "custom"
        bug_type = m.group(2) if m else "custom"
        table = _STRATEGIES.get(name) or _BY_BUG_TYPE.get(bug_type) or _BY_BUG_TYPE["custom"]
        return json.dumps(table, indent=2)

    def _prompt_synthesis(self, user: str) -> str:
        m = _SPEC_HEADER.search(user)
        name = m.group(1) if m else "custom"
        labels = re.findall(r"--- example \d+ \((buggy|nonbuggy)\) ---", user)
        summary = _SUMMARIES.get(
            name, "The labeled examples share one concrete faulty shape; flag code "
                  "that reproduces it and pass otherwise.")
        reasoning = [
            ("exhibits the anti-pattern: the faulty shape is reachable"
             if label == "buggy" else
             "does not exhibit the anti-pattern: the dangerous value is properly handled")
            for label in labels
        ]
        return json.dumps({"semantics_summary": summary, "example_reasoning": reasoning},
                          indent=2)

    def _reflection(self, user: str) -> str:
        expected = _EXPECTED.findall(user)
        if "INTENTIONALLY-WEAK" in user and expected:
            flipped = list(expected)
            flipped[-1] = "bug" if flipped[-1] == "no_bug" else "no_bug"
            return json.dumps({
                "example_verdicts": flipped,
                "critique": "the summary is too permissive and would misclassify the "
                            "last example; tightened the firing condition",
                "revised_semantics_summary":
                    "Flag only code where the dangerous value reaches the operation "
                    "with no intervening check that excludes the faulty case.",
            }, indent=2)
        return json.dumps({
            "example_verdicts": list(expected),
            "critique": "prompt classifies every provided example correctly; no revision",
            "revised_semantics_summary": None,
        }, indent=2)

    def _detect(self, system: str, user: str) -> str:
        m = _AUDIT_AP.search(system)
        name = m.group(1) if m else ""
        origins = _origins(user)
        verdict, steps, why = _scan_context(name, user, origins)
        if not verdict:
            return json.dumps({"verdict": "no_bug", "path_steps": [], "explanation": why})
        return json.dumps({
            "verdict": "bug",
            "path_steps": [
                {"file": f, "line": n, "note": note} for f, n, note in steps
            ],
            "explanation": why,
        }, indent=2)

    def _validate(self, user: str) -> str:
        claims = _CLAIM.findall(user)
        known = {(f, int(n)) for f, n, _ in _origins(user)}
        checks = []
        for f, n in claims:
            ok = (f, int(n)) in known
            checks.append({
                "claim": f"{f}:{n}",
                "upheld": ok,
                "reason": "origin present in the audited code" if ok
                          else "cited origin does not appear in the audited code",
            })
        all_ok = bool(checks) and all(c["upheld"] for c in checks)
        return json.dumps({
            "checks": checks,
            "summary": "every step re-derived from the code" if all_ok
                       else "at least one claimed step is not grounded in the code",
        }, indent=2)


def _scan_context(name: str, text: str, origins: list[tuple[str, int, str]]):
    """Tiny per-anti-pattern pattern table over the rendered context."""

    def lines_matching(pattern: str) -> list[tuple[str, int, str]]:
        rx = re.compile(pattern)
        return [(f, n, line) for f, n, line in origins if rx.search(line)]

    def step(entry: tuple[str, int, str], note: str) -> tuple[str, int, str]:
        return entry[0], entry[1], note

    if name in ("LZD", "IZC"):
        divisions = lines_matching(r"/(?!\*)\s*\w|%\s*\w")
        if not divisions:
            return False, [], "no division in context"
        div = divisions[-1]
        divisor = re.search(r"[/%](?!\*)\s*(\w+)", div[2])
        var = divisor.group(1) if divisor else ""
        if name == "LZD":
            zero = lines_matching(rf"\b{re.escape(var)}\s*=\s*0\s*[;,)]")
            if zero:
                return True, [step(zero[0], f"{var} holds the literal zero"),
                              step(div, f"division by {var}")], \
                    f"{var} is assigned literal zero and used as a divisor without validation"
            return False, [], "divisor is not a literal zero"
        guards_ok = lines_matching(rf"\b{re.escape(var)}\s*(!=\s*0|>\s*0)")
        if guards_ok:
            return False, [], "divisor is checked against zero before use"
        weak = lines_matching(rf"\b{re.escape(var)}\s*(>=|<=|<|>)")
        if weak:
            return True, [step(weak[0], f"check on {var} still allows zero"),
                          step(div, f"division by {var}")], \
                f"the guard on {var} does not exclude zero, division can fault"
        return True, [step(div, f"unvalidated division by {var}")], \
            f"{var} is used as a divisor with no zero check"
    if name == "OSO":
        writes = lines_matching(r"\b(memset|memcpy|memmove)\s*\(")
        grown = lines_matching(r"=\s*\w+\s*\+")
        if writes and grown:
            return True, [step(grown[0], "size grows past the buffer capacity"),
                          step(writes[0], "oversized write")], \
                "the computed size exceeds the destination capacity"
        return False, [], "no oversized write shape"
    if name == "NOF":
        neg = lines_matching(r"=\s*\w+\s*-\s*\d")
        access = lines_matching(r"\w+\s*\[")
        if neg and access:
            return True, [step(neg[0], "offset can become negative"),
                          step(access[-1], "negative offset used in access")], \
                "the index can be negative when the guard admits small inputs"
        return False, [], "no negative offset shape"
    if name == "ASO":
        mul = lines_matching(r"=\s*\w+\s*\*")
        alloc = lines_matching(r"\bmalloc|\bcalloc|\brealloc")
        if mul and alloc:
            return True, [step(mul[0], "allocation size can overflow and wrap"),
                          step(alloc[0], "under-allocation")], \
                "the size multiplication can wrap, allocating less than intended"
        return False, [], "no overflowable allocation size"
    if name == "UEC":
        alloc = lines_matching(r"=\s*(malloc|calloc|strdup)")
        free_ = lines_matching(r"\bfree\s*\(")
        guard = lines_matching(r"\bif\s*\(")
        if alloc and free_ and guard:
            return True, [step(alloc[0], "allocation"),
                          step(guard[-1], "early exit can bypass the cleanup"),
                          step(free_[0], "cleanup exists but is not on every path")], \
                "an early return path skips the existing cleanup, leaking the object"
        return False, [], "allocation and cleanup are balanced"
    if name == "MSC":
        alloc = lines_matching(r"=\s*(malloc|calloc|strdup)")
        free_ = lines_matching(r"\bfree\s*\(")
        if alloc and not free_:
            last = origins[-1] if origins else alloc[0]
            return True, [step(alloc[0], "allocation with no cleanup"),
                          step(last, "function ends without releasing the object")], \
                "nothing in the context releases the allocation"
        return False, [], "cleanup present"
    return False, [], "no matching anti-pattern shape"
