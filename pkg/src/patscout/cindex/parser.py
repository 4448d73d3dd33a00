"""Tokenizer and structural parser for C/C++ sources.

This is a deliberately syntactic parser: no preprocessing, no type checking.
It recovers what the rest of the pipeline needs and nothing more: function
definitions with parameter lists, a statement-level segmentation of each
body, and per-statement identifier facts (defs, uses, callee names).

Macros and preprocessor lines are treated as opaque text. C++ constructs
(templates, classes, namespaces) are handled as plain syntax: method bodies
are indexed like free functions, template angle brackets are ordinary
tokens.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, NamedTuple


class Token(NamedTuple):
    kind: str  # ident | num | str | char | punct | preproc
    text: str
    line: int  # 1-based
    offset: int  # byte offset into the source string


# Longest-match-first operator table.
_OPERATORS = [
    "<<=", ">>=", "...", "->*",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", ".*",
]

CONTROL_KEYWORDS = {
    "if", "else", "for", "while", "do", "switch", "case", "default",
    "return", "break", "continue", "goto",
}

TYPE_KEYWORDS = {
    "void", "char", "short", "int", "long", "float", "double", "signed",
    "unsigned", "bool", "_Bool", "struct", "union", "enum", "const",
    "volatile", "static", "extern", "register", "auto", "inline",
    "restrict", "typedef", "size_t", "ssize_t", "ptrdiff_t", "wchar_t",
    "int8_t", "int16_t", "int32_t", "int64_t",
    "uint8_t", "uint16_t", "uint32_t", "uint64_t",
    "intptr_t", "uintptr_t", "FILE",
}

# Identifiers that can never be a callee or a plain variable use.
_RESERVED = CONTROL_KEYWORDS | TYPE_KEYWORDS | {
    "sizeof", "alignof", "_Alignof", "defined", "new", "delete", "throw",
    "operator", "public", "private", "protected", "class", "namespace",
    "template", "typename", "using", "nullptr", "NULL", "true", "false",
}

ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="}

_OPENERS = "([{"
_CLOSERS = ")]}"

_QUALIFIERS_AFTER_PARAMS = {"const", "noexcept", "override", "final", "volatile", "restrict"}


def tokenize(source: str) -> list[Token]:
    """Lex a C/C++ source string. Comments are dropped, preprocessor lines
    become single ``preproc`` tokens (honoring backslash continuations)."""
    toks: list[Token] = []
    i = 0
    n = len(source)
    line = 1
    at_line_start = True
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            i += 1
            at_line_start = True
            continue
        if ch in " \t\r\f\v":
            i += 1
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "*":
            j = source.find("*/", i + 2)
            if j == -1:
                j = n
            line += source.count("\n", i, j)
            i = j + 2 if j < n else n
            continue
        if ch == "#" and at_line_start:
            start = i
            start_line = line
            while i < n:
                if source[i] == "\\" and i + 1 < n and source[i + 1] == "\n":
                    line += 1
                    i += 2
                    continue
                if source[i] == "\n":
                    break
                i += 1
            toks.append(Token("preproc", source[start:i], start_line, start))
            continue
        at_line_start = False
        if ch in "\"'":
            quote = ch
            start = i
            i += 1
            while i < n:
                if source[i] == "\\":
                    i += 2
                    continue
                if source[i] == quote:
                    i += 1
                    break
                if source[i] == "\n":
                    line += 1
                i += 1
            kind = "str" if quote == '"' else "char"
            toks.append(Token(kind, source[start:i], line, start))
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            start = i
            while i < n and (source[i].isalnum() or source[i] in "._'" or
                             (source[i] in "+-" and source[i - 1] in "eEpP")):
                i += 1
            toks.append(Token("num", source[start:i], line, start))
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            toks.append(Token("ident", source[start:i], line, start))
            continue
        matched = False
        for op in _OPERATORS:
            if source.startswith(op, i):
                toks.append(Token("punct", op, line, i))
                i += len(op)
                matched = True
                break
        if not matched:
            toks.append(Token("punct", ch, line, i))
            i += 1
    return toks


def match_bracket(toks: list[Token], i: int) -> int:
    """Index of the token closing the bracket opened at ``i``.

    Tracks all three bracket kinds with one depth counter; returns the last
    token index if the source is unbalanced.
    """
    depth = 0
    j = i
    while j < len(toks):
        t = toks[j].text
        if toks[j].kind == "punct":
            if t in _OPENERS:
                depth += 1
            elif t in _CLOSERS:
                depth -= 1
                if depth == 0:
                    return j
        j += 1
    return len(toks) - 1


@dataclass
class RawStatement:
    kind: str
    span: tuple[int, int]
    defs: set[str]
    uses: set[str]
    callee_names: set[str]
    text: str
    guard_ids: tuple[int, ...]
    decl_types: tuple[tuple[str, str], ...]


@dataclass
class RawFunction:
    name: str
    params: list[tuple[str, str]]
    start_line: int
    end_line: int
    statements: list[RawStatement]


def _is_member_name(toks: list[Token], idx: int) -> bool:
    return idx > 0 and toks[idx - 1].kind == "punct" and toks[idx - 1].text in (".", "->")


def _is_tag_name(toks: list[Token], idx: int) -> bool:
    return idx > 0 and toks[idx - 1].kind == "ident" and toks[idx - 1].text in ("struct", "union", "enum")


def _callee_positions(toks: list[Token]) -> dict[int, str]:
    """Map token index -> callee name for every syntactic call in ``toks``."""
    out: dict[int, str] = {}
    for i, t in enumerate(toks):
        if t.kind == "ident" and t.text not in _RESERVED:
            if i + 1 < len(toks) and toks[i + 1].text == "(" and toks[i + 1].kind == "punct":
                out[i] = t.text
        # function-pointer call: ( * fp ) ( ... )
        if (t.kind == "punct" and t.text == "(" and i + 4 < len(toks)
                and toks[i + 1].text == "*" and toks[i + 2].kind == "ident"
                and toks[i + 3].text == ")" and toks[i + 4].text == "("):
            out[i + 2] = toks[i + 2].text
    return out


def _looks_like_cast(toks: list[Token], idx: int) -> bool:
    """True when the identifier at ``idx`` sits inside a cast like (T *)x."""
    if idx == 0 or toks[idx - 1].text != "(":
        return False
    j = idx + 1
    while j < len(toks) and toks[j].text == "*":
        j += 1
    if j >= len(toks) or toks[j].text != ")":
        return False
    if j + 1 >= len(toks):
        return False
    nxt = toks[j + 1]
    return nxt.kind in ("ident", "num", "str") or nxt.text == "("


_TYPE_PREFIX = TYPE_KEYWORDS | {"*", "&"}


def _split_top_level(toks: list[Token], seps: set[str]) -> list[list[int]]:
    """Split token indices on top-level separator tokens."""
    groups: list[list[int]] = [[]]
    depth = 0
    for i, t in enumerate(toks):
        if t.kind == "punct":
            if t.text in _OPENERS:
                depth += 1
            elif t.text in _CLOSERS:
                depth -= 1
            elif depth == 0 and t.text in seps:
                groups.append([])
                continue
        groups[-1].append(i)
    return groups


class StatementFacts(NamedTuple):
    kind: str
    defs: set[str]
    uses: set[str]
    callees: set[str]
    decl_types: tuple[tuple[str, str], ...]


def statement_facts(toks: list[Token]) -> StatementFacts:
    """Syntactic def/use/call extraction over one statement's tokens.

    Left sides of assignment operators and declarators become defs; all other
    identifier reads become uses; member names after ``.``/``->``, type
    keywords, cast targets and callee names are excluded from uses.
    """
    callees = _callee_positions(toks)
    defs: set[str] = set()
    uses: set[str] = set()
    decl_types: list[tuple[str, str]] = []
    excluded: set[int] = set(callees)

    def idents_of(indices: Iterable[int]) -> set[str]:
        found = set()
        for i in indices:
            t = toks[i]
            if t.kind != "ident" or t.text in _RESERVED or i in excluded:
                continue
            if _is_member_name(toks, i) or _is_tag_name(toks, i) or _looks_like_cast(toks, i):
                continue
            found.add(t.text)
        return found

    # Declaration detection: a leading run of type keywords, or two adjacent
    # plain identifiers at the start (``MyType x``).
    is_decl = False
    type_end = 0
    significant = [i for i, t in enumerate(toks) if t.kind in ("ident", "punct")]
    if significant:
        first = significant[0]
        if toks[first].kind == "ident" and toks[first].text in TYPE_KEYWORDS:
            is_decl = True
            j = first
            while j < len(toks) and (
                (toks[j].kind == "ident" and toks[j].text in TYPE_KEYWORDS)
                or toks[j].text in ("*", "&")
                or (toks[j].kind == "ident" and _is_tag_name(toks, j))
            ):
                j += 1
            type_end = j
        elif (toks[first].kind == "ident" and toks[first].text not in _RESERVED
              and first + 1 < len(toks)
              and (toks[first + 1].kind == "ident"
                   or (toks[first + 1].text in ("*", "&") and first + 2 < len(toks)
                       and toks[first + 2].kind == "ident"))
              and first not in callees):
            # ``MyType x ...`` or ``MyType *x ...``
            is_decl = True
            type_end = first + 1

    if is_decl:
        type_text = " ".join(t.text for t in toks[:type_end])
        rest = toks[type_end:]
        for group in _split_top_level(rest, {","}):
            if not group:
                continue
            stars = 0
            name: str | None = None
            init_start: int | None = None
            for gi in group:
                t = rest[gi]
                if t.text in ("*", "&") and name is None:
                    stars += 1
                elif t.kind == "ident" and name is None and t.text not in _RESERVED:
                    name = t.text
                elif t.kind == "punct" and t.text in ASSIGN_OPS:
                    init_start = gi
                    break
            if name is None:
                continue
            defs.add(name)
            decl_types.append((name, (type_text + " " + "*" * stars).strip()))
            if init_start is not None:
                sub = [rest[gi] for gi in group if gi > init_start]
                sub_facts = statement_facts(sub)
                uses |= sub_facts.uses | sub_facts.defs
            else:
                # array extents etc. still read identifiers
                tail = [rest[gi] for gi in group if rest[gi].kind == "ident" and rest[gi].text != name]
                uses |= {t.text for t in tail if t.text not in _RESERVED}
        callee_names = set(_callee_positions(toks).values())
        return StatementFacts("decl", defs, uses, callee_names, tuple(decl_types))

    # Assignment splitting at top level.
    assign_positions = [
        i for i, t in enumerate(toks)
        if t.kind == "punct" and t.text in ASSIGN_OPS and _at_top_level(toks, i)
    ]
    kind = "other"
    if assign_positions:
        kind = "assign"
        prev = 0
        for pos in assign_positions:
            lhs = list(range(prev, pos))
            base = None
            for i in lhs:
                t = toks[i]
                if (t.kind == "ident" and t.text not in _RESERVED and i not in excluded
                        and not _is_member_name(toks, i) and not _looks_like_cast(toks, i)):
                    base = (i, t.text)
                    break
            if base is not None:
                defs.add(base[1])
                excluded.add(base[0])
                if toks[pos].text != "=":
                    uses.add(base[1])  # compound ops read the target too
            uses |= idents_of(lhs)
            prev = pos + 1
        uses |= idents_of(range(prev, len(toks)))
    else:
        uses |= idents_of(range(len(toks)))

    # ++ / -- update expressions
    for i, t in enumerate(toks):
        if t.kind == "punct" and t.text in ("++", "--"):
            for j in (i - 1, i + 1):
                if 0 <= j < len(toks) and toks[j].kind == "ident" and toks[j].text not in _RESERVED:
                    if not _is_member_name(toks, j):
                        defs.add(toks[j].text)
                        uses.add(toks[j].text)
            kind = "assign"

    callee_names = set(_callee_positions(toks).values())
    if kind == "other" and callee_names:
        kind = "call"
    return StatementFacts(kind, defs, uses, callee_names, ())


def _at_top_level(toks: list[Token], idx: int) -> bool:
    depth = 0
    for i in range(idx):
        t = toks[i]
        if t.kind == "punct":
            if t.text in _OPENERS:
                depth += 1
            elif t.text in _CLOSERS:
                depth -= 1
    return depth == 0


class _BodyParser:
    """Turns the token range of one function body into RawStatements."""

    def __init__(self, source: str, toks: list[Token], start: int, end: int):
        self.src = source
        self.toks = toks
        self.i = start
        self.end = end
        self.stmts: list[RawStatement] = []
        self.guards: list[int] = []

    def _text(self, a: int, b: int) -> str:
        first, last = self.toks[a], self.toks[b]
        return self.src[first.offset: last.offset + len(last.text)]

    def _emit(self, kind: str, a: int, b: int, facts: StatementFacts | None = None) -> int:
        toks = self.toks[a: b + 1]
        f = facts if facts is not None else statement_facts(toks)
        stmt = RawStatement(
            kind=kind,
            span=(self.toks[a].line, self.toks[b].line),
            defs=set(f.defs),
            uses=set(f.uses),
            callee_names=set(f.callees),
            text=self._text(a, b),
            guard_ids=tuple(self.guards),
            decl_types=f.decl_types,
        )
        self.stmts.append(stmt)
        return len(self.stmts) - 1

    def parse_block(self, limit: int) -> None:
        while self.i < limit:
            t = self.toks[self.i]
            if t.kind == "preproc":
                self._emit("other", self.i, self.i, StatementFacts("other", set(), set(), set(), ()))
                self.i += 1
                continue
            if t.kind == "punct":
                if t.text == ";":
                    self.i += 1
                    continue
                if t.text == "{":
                    close = match_bracket(self.toks, self.i)
                    self.i += 1
                    self.parse_block(min(close, limit))
                    self.i = close + 1
                    continue
                self._simple(limit)
                continue
            if t.kind == "ident":
                word = t.text
                if word == "if":
                    self._if(limit)
                    continue
                if word in ("for", "while"):
                    self._loop(word, limit)
                    continue
                if word == "do":
                    self._do(limit)
                    continue
                if word == "switch":
                    self._switch(limit)
                    continue
                if word == "return":
                    self._return(limit)
                    continue
                if word in ("break", "continue"):
                    end = self._seek(";", limit)
                    self._emit("other", self.i, end, StatementFacts("other", set(), set(), set(), ()))
                    self.i = end + 1
                    continue
                if word == "goto":
                    end = self._seek(";", limit)
                    self._emit("other", self.i, end, StatementFacts("other", set(), set(), set(), ()))
                    self.i = end + 1
                    continue
                if word in ("case", "default"):
                    while self.i < limit and self.toks[self.i].text != ":":
                        self.i += 1
                    self.i += 1
                    continue
                if (self.i + 1 < limit and self.toks[self.i + 1].text == ":"
                        and self.toks[self.i + 1].kind == "punct"
                        and word not in _RESERVED):
                    self.i += 2  # goto label
                    continue
            self._simple(limit)

    def _seek(self, what: str, limit: int) -> int:
        """Token index of the next top-level ``what``; clamps to limit - 1."""
        depth = 0
        j = self.i
        while j < limit:
            t = self.toks[j]
            if t.kind == "punct":
                if t.text in _OPENERS:
                    depth += 1
                elif t.text in _CLOSERS:
                    if depth == 0:
                        return j - 1 if j > self.i else j
                    depth -= 1
                elif t.text == what and depth == 0:
                    return j
            j += 1
        return limit - 1

    def _substatement(self, limit: int) -> None:
        if self.i < limit and self.toks[self.i].text == "{":
            close = match_bracket(self.toks, self.i)
            self.i += 1
            self.parse_block(min(close, limit))
            self.i = close + 1
        else:
            before = self.i
            self._one(limit)
            if self.i == before:  # safety: never loop in place
                self.i += 1

    def _one(self, limit: int) -> None:
        # Parse exactly one statement via the main dispatch.
        t = self.toks[self.i]
        if t.kind == "ident" and t.text == "if":
            self._if(limit)
        elif t.kind == "ident" and t.text in ("for", "while"):
            self._loop(t.text, limit)
        elif t.kind == "ident" and t.text == "do":
            self._do(limit)
        elif t.kind == "ident" and t.text == "switch":
            self._switch(limit)
        elif t.kind == "ident" and t.text == "return":
            self._return(limit)
        elif t.kind == "preproc":
            self._emit("other", self.i, self.i, StatementFacts("other", set(), set(), set(), ()))
            self.i += 1
        else:
            self._simple(limit)

    def _cond(self, start: int) -> tuple[int, int]:
        """Given ``start`` at a control keyword, return (open, close) paren indices."""
        j = start + 1
        while j < self.end and self.toks[j].text != "(":
            j += 1
        close = match_bracket(self.toks, j)
        return j, close

    def _if(self, limit: int) -> None:
        start = self.i
        op, cl = self._cond(start)
        cond = self.toks[op + 1: cl]
        guard = self._emit("branch_guard", start, cl, _guard_facts(cond))
        self.i = cl + 1
        self.guards.append(guard)
        self._substatement(limit)
        if self.i < limit and self.toks[self.i].kind == "ident" and self.toks[self.i].text == "else":
            self.i += 1
            self._substatement(limit)
        self.guards.pop()

    def _loop(self, word: str, limit: int) -> None:
        start = self.i
        op, cl = self._cond(start)
        header = self.toks[op + 1: cl]
        guard = self._emit("loop_guard", start, cl, _guard_facts(header))
        self.i = cl + 1
        if word == "while" and self.i < limit and self.toks[self.i].text == ";":
            self.i += 1  # do-while tail handled by _do; bare ``while(x);``
            return
        self.guards.append(guard)
        self._substatement(limit)
        self.guards.pop()

    def _do(self, limit: int) -> None:
        start = self.i
        guard = self._emit("loop_guard", start, start, StatementFacts("loop_guard", set(), set(), set(), ()))
        self.i += 1
        self.guards.append(guard)
        self._substatement(limit)
        self.guards.pop()
        if self.i < limit and self.toks[self.i].kind == "ident" and self.toks[self.i].text == "while":
            op, cl = self._cond(self.i)
            facts = _guard_facts(self.toks[op + 1: cl])
            g = self.stmts[guard]
            g.uses |= facts.uses
            g.callee_names |= facts.callees
            g.span = (g.span[0], self.toks[cl].line)
            g.text = self._text(start, cl)
            self.i = cl + 1
            if self.i < limit and self.toks[self.i].text == ";":
                self.i += 1

    def _switch(self, limit: int) -> None:
        start = self.i
        op, cl = self._cond(start)
        guard = self._emit("branch_guard", start, cl, _guard_facts(self.toks[op + 1: cl]))
        self.i = cl + 1
        self.guards.append(guard)
        self._substatement(limit)
        self.guards.pop()

    def _return(self, limit: int) -> None:
        start = self.i
        end = self._seek(";", limit)
        expr_stop = end if self.toks[end].text == ";" else end + 1
        facts = statement_facts(self.toks[start + 1: expr_stop])
        self._emit("return", start, end, StatementFacts("return", set(), facts.uses | facts.defs, facts.callees, ()))
        self.i = end + 1

    def _simple(self, limit: int) -> None:
        start = self.i
        end = self._seek(";", limit)
        facts = statement_facts(self.toks[start: end + 1])
        self._emit(facts.kind, start, end, facts)
        self.i = end + 1


def _guard_facts(cond: list[Token]) -> StatementFacts:
    f = statement_facts(cond)
    kind = "branch_guard"  # overwritten by the emitter's explicit kind
    return StatementFacts(kind, f.defs, f.uses, f.callees, f.decl_types)


def _param_list(toks: list[Token]) -> list[tuple[str, str]]:
    """Parse the tokens between the signature parens into (name, type) pairs."""
    if not toks or (len(toks) == 1 and toks[0].text == "void"):
        return []
    params: list[tuple[str, str]] = []
    for group in _split_top_level(toks, {","}):
        seg = [toks[i] for i in group]
        if not seg or (len(seg) == 1 and seg[0].text == "..."):
            continue
        name = ""
        name_idx = -1
        # function-pointer parameter: T (*name)(...)
        for i in range(len(seg) - 2):
            if seg[i].text == "(" and seg[i + 1].text == "*" and seg[i + 2].kind == "ident":
                name = seg[i + 2].text
                name_idx = i + 2
                break
        if not name:
            depth = 0
            for i, t in enumerate(seg):
                if t.kind == "punct":
                    if t.text in _OPENERS:
                        depth += 1
                    elif t.text in _CLOSERS:
                        depth -= 1
                elif t.kind == "ident" and depth == 0:
                    name_idx = i
            if name_idx >= 0:
                cand = seg[name_idx].text
                if cand not in TYPE_KEYWORDS:
                    name = cand
        type_text = " ".join(t.text for i, t in enumerate(seg) if i != name_idx)
        params.append((name, type_text.strip()))
    return params


def _signature_prefix_ok(toks: list[Token], name_idx: int) -> bool:
    """Heuristic filter: the tokens before a candidate function name must look
    like a declaration prefix, not an expression."""
    if name_idx == 0:
        return False
    prev = toks[name_idx - 1]
    if prev.kind == "preproc":
        return False
    if prev.kind == "ident":
        return prev.text not in CONTROL_KEYWORDS and prev.text not in ("sizeof", "return", "new", "delete", "case", "goto")
    if prev.kind == "punct":
        return prev.text in ("*", "&", "::", "~", ">")
    return False


def parse_source(source: str, path: str = "<mem>") -> tuple[list[RawFunction], list[str]]:
    """Extract function definitions and their statements from one source text.

    Returns (functions, diagnostics). Unparseable regions are skipped, never
    fatal; truly malformed files just yield zero functions.
    """
    toks = tokenize(source)
    functions: list[RawFunction] = []
    diagnostics: list[str] = []
    i = 0
    n = len(toks)
    while i < n:
        t = toks[i]
        if not (t.kind == "punct" and t.text == "(" and i > 0 and toks[i - 1].kind == "ident"):
            i += 1
            continue
        name_tok = toks[i - 1]
        if name_tok.text in _RESERVED or not _signature_prefix_ok(toks, i - 1):
            i += 1
            continue
        close = match_bracket(toks, i)
        k = close + 1
        # Skip trailing qualifiers, attribute parens, ctor-init lists and
        # trailing return types until the body brace or a terminator.
        while k < n:
            tk = toks[k]
            if tk.kind == "ident" and tk.text in _QUALIFIERS_AFTER_PARAMS:
                k += 1
                if k < n and toks[k].text == "(":
                    k = match_bracket(toks, k) + 1
                continue
            if tk.kind == "ident" and tk.text.startswith("__"):
                k += 1
                if k < n and toks[k].text == "(":
                    k = match_bracket(toks, k) + 1
                continue
            if tk.text == "->":
                k += 1
                while k < n and toks[k].text not in ("{", ";"):
                    k += 1
                continue
            if tk.text == ":":
                k += 1
                depth = 0
                while k < n:
                    txt = toks[k].text
                    if txt in "([":
                        depth += 1
                    elif txt in ")]":
                        depth -= 1
                    elif txt == "{" and depth == 0:
                        break
                    elif txt == ";" and depth == 0:
                        break
                    k += 1
                continue
            break
        if k >= n or toks[k].text != "{":
            i += 1
            continue
        body_open = k
        body_close = match_bracket(toks, body_open)
        params = _param_list(toks[i + 1: close])
        start_line = _declaration_start_line(toks, i - 1)
        parser = _BodyParser(source, toks, body_open + 1, body_close)
        try:
            parser.parse_block(body_close)
        except RecursionError:  # pragma: no cover - defensive
            diagnostics.append(f"{path}: statement parse overflow in {name_tok.text}")
            parser.stmts = []
        functions.append(
            RawFunction(
                name=name_tok.text,
                params=params,
                start_line=start_line,
                end_line=toks[body_close].line,
                statements=parser.stmts,
            )
        )
        i = body_close + 1
    return functions, diagnostics


def _declaration_start_line(toks: list[Token], name_idx: int) -> int:
    """Walk back over the declaration prefix to find its first line."""
    j = name_idx
    while j > 0:
        prev = toks[j - 1]
        if prev.kind == "ident" and prev.text not in CONTROL_KEYWORDS:
            j -= 1
            continue
        if prev.kind == "punct" and prev.text in ("*", "&", "::", "~", ">", "<", ","):
            j -= 1
            continue
        break
    return toks[j].line


def rename_identifiers(text: str, mapping: dict[str, str]) -> str:
    """Rewrite identifier tokens in ``text`` per ``mapping``.

    Member names after ``.``/``->`` are left alone; spacing is preserved.
    """
    toks = tokenize(text)
    out: list[str] = []
    pos = 0
    for i, t in enumerate(toks):
        out.append(text[pos: t.offset])
        if t.kind == "ident" and t.text in mapping and not _is_member_name(toks, i):
            out.append(mapping[t.text])
        else:
            out.append(t.text)
        pos = t.offset + len(t.text)
    out.append(text[pos:])
    return "".join(out)


def split_call_arguments(text: str, callee: str) -> list[list[str]]:
    """Argument text lists for every call to ``callee`` inside ``text``."""
    toks = tokenize(text)
    results: list[list[str]] = []
    for i, t in enumerate(toks):
        if t.kind != "ident" or t.text != callee:
            continue
        if i + 1 >= len(toks) or toks[i + 1].text != "(":
            continue
        close = match_bracket(toks, i + 1)
        inner = toks[i + 2: close]
        args: list[str] = []
        for group in _split_top_level(inner, {","}):
            if not group:
                continue
            first, last = inner[group[0]], inner[group[-1]]
            args.append(text[first.offset: last.offset + len(last.text)])
        results.append(args)
    return results


def identifiers_in(text: str) -> list[str]:
    """Ordered unique variable-like identifiers in an expression snippet."""
    toks = tokenize(text)
    callees = _callee_positions(toks)
    seen: list[str] = []
    for i, t in enumerate(toks):
        if t.kind != "ident" or t.text in _RESERVED or i in callees:
            continue
        if _is_member_name(toks, i) or _is_tag_name(toks, i) or _looks_like_cast(toks, i):
            continue
        if t.text not in seen:
            seen.append(t.text)
    return seen


def content_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
