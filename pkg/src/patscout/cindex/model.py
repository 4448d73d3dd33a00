"""Data model for indexed repositories.

Everything here is immutable once construction finishes; a CodeIndex can be
shared freely across threads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from patscout.errors import IndexLookupError

Span = tuple[int, int]  # 1-based (start line, end line), inclusive


@dataclass(frozen=True)
class SourceFile:
    """One indexed file. ``lines`` keeps the stored content for later rendering."""

    path: str
    content_hash: str
    language: str  # "c" | "cpp"
    line_count: int
    lines: tuple[str, ...] = field(repr=False)


@dataclass(frozen=True)
class StatementNode:
    """A statement-level fact record produced by the syntactic walk.

    ``defs`` holds identifiers written (left side of assignment operators and
    declarators), ``uses`` identifiers read, ``callee_names`` called
    identifiers. ``guard_ids`` lists enclosing branch/loop guard statements,
    innermost last. ``decl_types`` maps declared names to their type text for
    ``decl`` statements.
    """

    id: int
    kind: str  # decl | assign | call | return | branch_guard | loop_guard | other
    span: Span
    defs: frozenset[str]
    uses: frozenset[str]
    callee_names: frozenset[str]
    text: str = field(repr=False, default="")
    guard_ids: tuple[int, ...] = ()
    decl_types: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class FunctionRecord:
    """A parsed function definition."""

    id: str  # path::name::start_line
    name: str
    params: tuple[tuple[str, str], ...]  # (name, declared-type text), in order
    body_span: Span
    statements: tuple[StatementNode, ...]
    file: str

    def statement(self, stmt_id: int) -> StatementNode:
        try:
            return self.statements[stmt_id]
        except IndexError:
            raise IndexLookupError(f"no statement {stmt_id} in {self.id}") from None

    def pointer_vars(self) -> frozenset[str]:
        """Identifiers declared with a pointer type (params and locals)."""
        out = {name for name, ty in self.params if "*" in ty}
        for stmt in self.statements:
            for name, ty in stmt.decl_types:
                if "*" in ty:
                    out.add(name)
        return frozenset(out)


@dataclass(frozen=True)
class CallGraph:
    """Name-resolved call graph over one CodeIndex.

    ``edges`` holds (caller id, call-site statement id, callee id);
    ``unresolved`` holds (caller id, call-site statement id, callee name) for
    calls with no indexed definition.
    """

    nodes: frozenset[str]
    edges: frozenset[tuple[str, int, str]]
    unresolved: frozenset[tuple[str, int, str]]


@dataclass(frozen=True)
class CodeIndex:
    """Immutable snapshot of one repository parse."""

    root: str
    files: tuple[SourceFile, ...]
    functions: tuple[FunctionRecord, ...]
    call_graph: CallGraph
    diagnostics: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_id", {f.id: f for f in self.functions})
        by_name: dict[str, list[str]] = {}
        for f in self.functions:
            by_name.setdefault(f.name, []).append(f.id)
        object.__setattr__(self, "_by_name", by_name)
        object.__setattr__(self, "_file_by_path", {s.path: s for s in self.files})

    def function(self, fn_id: str) -> FunctionRecord:
        try:
            return self._by_id[fn_id]  # type: ignore[attr-defined]
        except KeyError:
            raise IndexLookupError(f"unknown function id: {fn_id}") from None

    def functions_named(self, name: str) -> list[str]:
        return list(self._by_name.get(name, ()))  # type: ignore[attr-defined]

    def source(self, path: str) -> SourceFile:
        try:
            return self._file_by_path[path]  # type: ignore[attr-defined]
        except KeyError:
            raise IndexLookupError(f"unknown file: {path}") from None

    def digest(self) -> str:
        h = hashlib.sha256()
        for src in sorted(self.files, key=lambda s: s.path):
            h.update(src.path.encode())
            h.update(src.content_hash.encode())
        return h.hexdigest()
