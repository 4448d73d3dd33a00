"""Build a CodeIndex from a repository snapshot."""

from __future__ import annotations

import fnmatch
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from patscout.cindex.model import CallGraph, CodeIndex, FunctionRecord, SourceFile, StatementNode
from patscout.cindex.parser import content_digest, parse_source
from patscout.errors import ConfigurationError

log = logging.getLogger(__name__)

_C_EXTS = {".c", ".h"}
_CPP_EXTS = {".cc", ".cpp", ".cxx", ".hpp", ".hh", ".hxx"}
DEFAULT_INCLUDE = ["*.c", "*.h", "*.cc", "*.cpp", "*.cxx", "*.hpp", "*.hh", "*.hxx"]


def _language_of(path: Path) -> str | None:
    ext = path.suffix.lower()
    if ext in _C_EXTS:
        return "c"
    if ext in _CPP_EXTS:
        return "cpp"
    return None


def _matches(rel: str, patterns: list[str]) -> bool:
    return any(fnmatch.fnmatch(rel, pat) or fnmatch.fnmatch(Path(rel).name, pat) for pat in patterns)


def _parse_file(root: Path, rel: str) -> tuple[SourceFile | None, list[FunctionRecord], list[str]]:
    full = root / rel
    try:
        data = full.read_bytes()
        text = data.decode("utf-8", errors="replace")
    except OSError as exc:
        return None, [], [f"{rel}: unreadable ({exc})"]
    language = _language_of(full) or "c"
    lines = tuple(text.splitlines())
    try:
        raw_functions, diags = parse_source(text, rel)
    except Exception as exc:  # per-file diagnostic, never fatal
        return None, [], [f"{rel}: parse failure ({exc})"]
    src = SourceFile(
        path=rel,
        content_hash=content_digest(data),
        language=language,
        line_count=len(lines),
        lines=lines,
    )
    records: list[FunctionRecord] = []
    for raw in raw_functions:
        statements = tuple(
            StatementNode(
                id=sid,
                kind=s.kind,
                span=s.span,
                defs=frozenset(s.defs),
                uses=frozenset(s.uses),
                callee_names=frozenset(s.callee_names),
                text=s.text,
                guard_ids=s.guard_ids,
                decl_types=s.decl_types,
            )
            for sid, s in enumerate(raw.statements)
        )
        records.append(
            FunctionRecord(
                id=f"{rel}::{raw.name}::{raw.start_line}",
                name=raw.name,
                params=tuple(raw.params),
                body_span=(raw.start_line, raw.end_line),
                statements=statements,
                file=rel,
            )
        )
    return src, records, [f"{rel}: {d}" for d in diags]


def index_repository(
    root: str | Path,
    include_globs: list[str] | None = None,
    exclude_globs: list[str] | None = None,
    jobs: int = 1,
) -> CodeIndex:
    """Parse every matching file under ``root`` into one immutable CodeIndex.

    Files that fail to parse are skipped and recorded as diagnostics. A
    missing root is a fatal configuration error.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigurationError(f"repository root does not exist: {root}")
    include = include_globs or DEFAULT_INCLUDE
    exclude = exclude_globs or []

    rels = []
    for p in sorted(root.rglob("*")):
        if not p.is_file():
            continue
        rel = p.relative_to(root).as_posix()
        if not _matches(rel, include) or _matches(rel, exclude):
            continue
        rels.append(rel)

    files: list[SourceFile] = []
    functions: list[FunctionRecord] = []
    diagnostics: list[str] = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda r: _parse_file(root, r), rels))
    else:
        results = [_parse_file(root, r) for r in rels]
    for src, records, diags in results:  # rels are pre-sorted, merge is deterministic
        diagnostics.extend(diags)
        if src is None:
            continue
        files.append(src)
        functions.extend(records)

    graph = _build_call_graph(functions)
    return CodeIndex(
        root=str(root),
        files=tuple(files),
        functions=tuple(functions),
        call_graph=graph,
        diagnostics=tuple(diagnostics),
    )


def _build_call_graph(functions: list[FunctionRecord]) -> CallGraph:
    by_name: dict[str, list[str]] = {}
    for f in functions:
        by_name.setdefault(f.name, []).append(f.id)
    edges: set[tuple[str, int, str]] = set()
    unresolved: set[tuple[str, int, str]] = set()
    for f in functions:
        for stmt in f.statements:
            for callee in sorted(stmt.callee_names):
                targets = by_name.get(callee)
                if targets:
                    # overload sets fan out to every same-name definition
                    for target in targets:
                        edges.add((f.id, stmt.id, target))
                else:
                    unresolved.add((f.id, stmt.id, callee))
    return CallGraph(
        nodes=frozenset(f.id for f in functions),
        edges=frozenset(edges),
        unresolved=frozenset(unresolved),
    )


def callees_of(index: CodeIndex, fn_id: str) -> list[tuple[int, str]]:
    """Resolved and unresolved callees of ``fn_id`` in statement order.

    Returns (call-site statement id, callee id or external name) pairs;
    resolved targets are function ids, externals are bare names.
    """
    fn = index.function(fn_id)  # raises IndexLookupError for unknown ids
    out: list[tuple[int, str]] = []
    for caller, site, callee in index.call_graph.edges:
        if caller == fn_id:
            out.append((site, callee))
    for caller, site, name in index.call_graph.unresolved:
        if caller == fn_id:
            out.append((site, name))
    out.sort(key=lambda pair: (pair[0], pair[1]))
    return out


def callers_of(index: CodeIndex, fn_id: str) -> list[tuple[str, int]]:
    """(caller id, call-site statement id) pairs targeting ``fn_id``."""
    index.function(fn_id)
    out = [(caller, site) for caller, site, callee in index.call_graph.edges if callee == fn_id]
    out.sort()
    return out


def dump_index(index: CodeIndex, path: str | Path) -> None:
    """Write the debugging ``index.json`` dump."""
    doc = {
        "root": index.root,
        "files": [
            {"path": s.path, "hash": s.content_hash, "language": s.language, "lines": s.line_count}
            for s in index.files
        ],
        "functions": [
            {
                "id": f.id,
                "name": f.name,
                "file": f.file,
                "span": list(f.body_span),
                "params": [list(p) for p in f.params],
                "statements": [
                    {
                        "id": s.id,
                        "kind": s.kind,
                        "span": list(s.span),
                        "defs": sorted(s.defs),
                        "uses": sorted(s.uses),
                        "calls": sorted(s.callee_names),
                    }
                    for s in f.statements
                ],
            }
            for f in index.functions
        ],
        "edges": sorted([list(e) for e in index.call_graph.edges]),
        "unresolved": sorted([list(u) for u in index.call_graph.unresolved]),
        "diagnostics": list(index.diagnostics),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_index_dump(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
