"""Forward/backward inter-procedural slicing and context inlining.

Data dependence is a flow-ordered def-use approximation: a definition at an
earlier statement reaches a use at a later statement when no intervening
statement redefines the identifier, on the linear statement order. Pointer
aliasing collapses identifiers into classes formed by union-find over direct
pointer-to-pointer assignments; deeper alias reasoning is left to the
detection prompt. Control dependence is the enclosing-guard closure; renders
rebuild guard nesting from it, so then/else branches of one guard merge into
a single block (an over-approximation the detection prompt can see through).

Boundary crossings follow values across calls and are bounded by
``k_max`` crossings per slice; the k = 3 default mirrors the usual
call-stack-depth bound for this kind of analysis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from patscout.cindex.model import CodeIndex, FunctionRecord
from patscout.cindex.parser import (
    identifiers_in,
    parse_source,
    rename_identifiers,
    split_call_arguments,
)
from patscout.errors import ContractViolationError, RenderError
from patscout.strategy import Seed

log = logging.getLogger(__name__)

ELISION_MARKER = "/* ... omitted ... */"


@dataclass(frozen=True)
class SlicerConfig:
    k_max: int = 3
    context_char_budget: int = 24000
    include_control_deps: bool = True

    def __post_init__(self) -> None:
        if self.k_max < 0:
            raise ContractViolationError("k_max must be >= 0")
        if self.context_char_budget <= 0:
            raise ContractViolationError("context_char_budget must be positive")


@dataclass
class SliceFrame:
    """One function's contribution to a slice, linked to its parent by the
    crossing that created it."""

    fn_id: str
    depth: int
    kind: str  # root | call_arg | return_flow | arg_def | ret_def
    parent: int | None = None
    link_stmt: int | None = None  # call statement id; in the parent for
    # call_arg/ret_def, in this frame for return_flow/arg_def
    param: str | None = None  # bound parameter name (call_arg/arg_def)
    arg_text: str | None = None  # argument expression text at the call site
    members: list[int] = field(default_factory=list)


@dataclass
class Slice:
    seed: Seed
    direction: str
    members: dict[tuple[str, int], int]  # (function id, statement id) -> crossing depth
    frames: list[SliceFrame]
    diagnostics: list[str] = field(default_factory=list)

    def member_set(self) -> set[tuple[str, int]]:
        return set(self.members)


@dataclass(frozen=True)
class DetectionContext:
    rendered: str
    origin_map: tuple[tuple[int, str, int], ...]  # (rendered line, path, line)
    seed_marker: int
    truncated: bool

    def origin_pairs(self) -> set[tuple[str, int]]:
        return {(path, line) for _, path, line in self.origin_map}


# ---------------------------------------------------------------------------
# alias classes


def alias_representatives(fn: FunctionRecord) -> dict[str, str]:
    """Union-find over direct pointer-to-pointer assignments.

    Only ``p = q;`` style statements (plain copy, both sides pointer
    variables) merge classes. The representative is the lexicographically
    smallest member, which keeps the mapping deterministic.
    """
    pointers = fn.pointer_vars()
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra == rb:
            return
        lo, hi = sorted((ra, rb))
        parent[hi] = lo

    for stmt in fn.statements:
        if stmt.kind not in ("assign", "decl"):
            continue
        if len(stmt.defs) != 1 or len(stmt.uses) != 1 or stmt.callee_names:
            continue
        (lhs,) = stmt.defs
        (rhs,) = stmt.uses
        if lhs in pointers and rhs in pointers and _is_plain_copy(stmt.text):
            union(lhs, rhs)

    return {name: find(name) for name in parent}


def _is_plain_copy(text: str) -> bool:
    # ``p = q;`` or ``T *p = q;``: right-hand side is one bare identifier
    body = text.rstrip().rstrip(";")
    if "=" not in body:
        return False
    rhs = body.rsplit("=", 1)[1].strip()
    return rhs.isidentifier()


# ---------------------------------------------------------------------------
# intra-procedural closure


def _mapped(names: frozenset[str], rep: dict[str, str]) -> set[str]:
    return {rep.get(n, n) for n in names}


def _forward_pass(fn: FunctionRecord, rep: dict[str, str], anchor: int | None,
                  vars_: set[str]) -> set[int]:
    joined: set[int] = set()
    tainted = {rep.get(v, v) for v in vars_}
    if anchor is not None:
        joined.add(anchor)
        start = anchor + 1
    else:
        start = 0
    for j in range(start, len(fn.statements)):
        s = fn.statements[j]
        uses = _mapped(s.uses, rep)
        defs = _mapped(s.defs, rep)
        if uses & tainted:
            joined.add(j)
            tainted |= defs
        elif defs & tainted:
            tainted -= defs  # reassignment from an untainted source kills
    return joined


def _backward_pass(fn: FunctionRecord, rep: dict[str, str], anchor: int | None,
                   vars_: set[str]) -> set[int]:
    joined: set[int] = set()
    wanted = {rep.get(v, v) for v in vars_}
    if anchor is not None:
        joined.add(anchor)
        start = anchor - 1
    else:
        start = len(fn.statements) - 1
    for j in range(start, -1, -1):
        s = fn.statements[j]
        defs = _mapped(s.defs, rep)
        if defs & wanted:
            joined.add(j)
            wanted -= defs
            wanted |= _mapped(s.uses, rep)
    return joined


def _guard_closure(fn: FunctionRecord, members: set[int]) -> set[int]:
    out = set(members)
    frontier = list(members)
    while frontier:
        sid = frontier.pop()
        for gid in fn.statements[sid].guard_ids:
            if gid not in out:
                out.add(gid)
                frontier.append(gid)
    return out


def intra_slice(fn: FunctionRecord, ident: str, stmt_id: int, direction: str,
                include_control_deps: bool = True) -> set[int]:
    """Intra-procedural slice from (identifier, statement) in ``fn``.

    The criterion statement always belongs to the slice; the closure follows
    the materialized def-use relation forward or backward from it.
    """
    stmt = fn.statement(stmt_id)
    mentioned = set(stmt.defs) | set(stmt.uses) | set(stmt.callee_names) | set(identifiers_in(stmt.text))
    if ident not in mentioned:
        raise ContractViolationError(
            f"criterion identifier {ident!r} does not occur in statement {stmt_id} of {fn.id}")
    rep = alias_representatives(fn)
    if direction == "forward":
        members = _forward_pass(fn, rep, stmt_id, {ident} | set(stmt.defs))
    elif direction == "backward":
        members = _backward_pass(fn, rep, stmt_id, set(stmt.uses))
    else:
        raise ContractViolationError(f"unknown direction: {direction}")
    if include_control_deps:
        members = _guard_closure(fn, members)
    return members


# ---------------------------------------------------------------------------
# inter-procedural traversal


def _carried_vars(fn: FunctionRecord, members: set[int], seed_vars: set[str]) -> set[str]:
    carried = set(seed_vars)
    for sid in members:
        carried |= set(fn.statements[sid].defs)
    return carried


def _call_args_at(fn: FunctionRecord, stmt_id: int, callee: str) -> list[list[str]]:
    return split_call_arguments(fn.statements[stmt_id].text, callee)


def interprocedural_slice(index: CodeIndex, seed: Seed, cfg: SlicerConfig) -> Slice:
    """Slice across function boundaries, spending one unit of ``k_max`` per
    crossing. Crossings past the budget are pruned and recorded; unresolved
    callees at a needed crossing are skipped with a diagnostic."""
    direction = "forward" if seed.seed_kind == "faulty_value" else "backward"
    fn_id, stmt_id = seed.statement
    root_fn = index.function(fn_id)
    stmt = root_fn.statement(stmt_id)

    members: dict[tuple[str, int], int] = {}
    diagnostics: list[str] = []
    frames: list[SliceFrame] = []

    if direction == "forward":
        root_vars = {seed.captured_ident} | set(stmt.defs)
    else:
        root_vars = set(stmt.uses) or {seed.captured_ident}

    # Work items: (fn_id, seeds=[(anchor, vars)], depth, frame template)
    queue: list[tuple[str, list[tuple[int | None, set[str]]], SliceFrame]] = [
        (fn_id, [(stmt_id, root_vars)], SliceFrame(fn_id=fn_id, depth=0, kind="root"))
    ]
    visited: set[tuple[str, str, tuple]] = set()

    while queue:
        cur_fn_id, seeds, frame = queue.pop(0)
        key = (cur_fn_id, frame.kind, tuple(sorted((a if a is not None else -1, tuple(sorted(v))) for a, v in seeds)))
        if key in visited:
            continue
        visited.add(key)
        fn = index.function(cur_fn_id)
        rep = alias_representatives(fn)
        local: set[int] = set()
        seed_vars: set[str] = set()
        for anchor, vars_ in seeds:
            seed_vars |= vars_
            if direction == "forward":
                local |= _forward_pass(fn, rep, anchor, vars_)
            else:
                local |= _backward_pass(fn, rep, anchor, vars_)
        if cfg.include_control_deps:
            local = _guard_closure(fn, local)
        frame.members = sorted(local)
        frame_idx = len(frames)
        frames.append(frame)
        for sid in local:
            k = (cur_fn_id, sid)
            if k not in members or members[k] > frame.depth:
                members[k] = frame.depth
        carried = _carried_vars(fn, local, seed_vars)
        carried_reps = {rep.get(v, v) for v in carried}

        next_depth = frame.depth + 1
        crossings = (_forward_crossings if direction == "forward" else _backward_crossings)(
            index, fn, local, carried_reps, rep
        )
        for crossing in crossings:
            if next_depth > cfg.k_max:
                diagnostics.append(f"pruned at k={cfg.k_max}: {crossing['note']}")
                continue
            if crossing.get("unresolved"):
                diagnostics.append(f"unresolved callee skipped: {crossing['note']}")
                continue
            child = SliceFrame(
                fn_id=crossing["fn"],
                depth=next_depth,
                kind=crossing["kind"],
                parent=frame_idx,
                link_stmt=crossing.get("link_stmt"),
                param=crossing.get("param"),
                arg_text=crossing.get("arg_text"),
            )
            queue.append((crossing["fn"], crossing["seeds"], child))

    return Slice(seed=seed, direction=direction, members=members, frames=frames,
                 diagnostics=diagnostics)


def _forward_crossings(index: CodeIndex, fn: FunctionRecord, local: set[int],
                       carried_reps: set[str], rep: dict[str, str]) -> list[dict]:
    out: list[dict] = []
    for sid in sorted(local):
        stmt = fn.statements[sid]
        for callee in sorted(stmt.callee_names):
            targets = index.functions_named(callee)
            occurrences = _call_args_at(fn, sid, callee)
            tainted_args: list[tuple[int, str]] = []
            for args in occurrences:
                for pos, arg in enumerate(args):
                    arg_ids = {rep.get(v, v) for v in identifiers_in(arg)}
                    if arg_ids & carried_reps:
                        tainted_args.append((pos, arg))
            if not tainted_args:
                continue
            if not targets:
                out.append({"unresolved": True, "note": f"{callee} at {fn.id}:{sid}"})
                continue
            for target in targets:
                callee_fn = index.function(target)
                for pos, arg in tainted_args:
                    if pos >= len(callee_fn.params):
                        continue
                    pname = callee_fn.params[pos][0]
                    if not pname:
                        continue
                    out.append({
                        "kind": "call_arg",
                        "fn": target,
                        "seeds": [(None, {pname})],
                        "link_stmt": sid,
                        "param": pname,
                        "arg_text": arg,
                        "note": f"{callee}({pname}) from {fn.id}:{sid}",
                    })
    # return flow back to callers
    returns_tainted = any(
        fn.statements[sid].kind == "return" and _mapped(fn.statements[sid].uses, rep) & carried_reps
        for sid in local
    )
    if returns_tainted:
        for caller_id, site, callee_id in sorted(index.call_graph.edges):
            if callee_id != fn.id:
                continue
            caller = index.function(caller_id)
            call_stmt = caller.statements[site]
            result_vars = set(call_stmt.defs)
            out.append({
                "kind": "return_flow",
                "fn": caller_id,
                "seeds": [(site, result_vars)],
                "link_stmt": site,
                "note": f"return of {fn.name} into {caller_id}:{site}",
            })
    return out


def _backward_crossings(index: CodeIndex, fn: FunctionRecord, local: set[int],
                        carried_reps: set[str], rep: dict[str, str]) -> list[dict]:
    out: list[dict] = []
    used_reps: set[str] = set()
    for sid in local:
        used_reps |= _mapped(fn.statements[sid].uses, rep)
    # parameters feeding the slice: continue at argument expressions in callers
    for pos, (pname, _ty) in enumerate(fn.params):
        if not pname or rep.get(pname, pname) not in used_reps:
            continue
        for caller_id, site in sorted(
            (c, s) for c, s, callee in index.call_graph.edges if callee == fn.id
        ):
            caller = index.function(caller_id)
            occurrences = split_call_arguments(caller.statements[site].text, fn.name)
            arg_vars: set[str] = set()
            arg_text = None
            for args in occurrences:
                if pos < len(args):
                    arg_text = args[pos]
                    arg_vars |= set(identifiers_in(args[pos]))
            if arg_text is None:
                continue
            out.append({
                "kind": "arg_def",
                "fn": caller_id,
                "seeds": [(site, arg_vars)],
                "link_stmt": site,
                "param": pname,
                "arg_text": arg_text,
                "note": f"param {pname} of {fn.name} from {caller_id}:{site}",
            })
    # call results feeding the slice: continue at the callee's returns
    for sid in sorted(local):
        stmt = fn.statements[sid]
        if not stmt.defs or not stmt.callee_names:
            continue
        for callee in sorted(stmt.callee_names):
            targets = index.functions_named(callee)
            if not targets:
                # externals (malloc etc.) are not crossings, no diagnostic
                continue
            for target in targets:
                callee_fn = index.function(target)
                ret_ids = [s.id for s in callee_fn.statements if s.kind == "return"]
                if not ret_ids:
                    continue
                seeds = [(rid, set(callee_fn.statements[rid].uses)) for rid in ret_ids]
                out.append({
                    "kind": "ret_def",
                    "fn": target,
                    "seeds": seeds,
                    "link_stmt": sid,
                    "note": f"returns of {callee} feeding {fn.id}:{sid}",
                })
    return out


# ---------------------------------------------------------------------------
# inlining


def _frame_prefix(index: CodeIndex, frame: SliceFrame, idx: int) -> dict[str, str]:
    if frame.kind == "root":
        return {}
    fn = index.function(frame.fn_id)
    locals_ = {name for name, _ in fn.params if name}
    for stmt in fn.statements:
        for name, _ty in stmt.decl_types:
            locals_.add(name)
    prefix = f"{fn.name}_{idx}_"
    return {name: prefix + name for name in sorted(locals_)}


def _stmt_lines(index: CodeIndex, frame: SliceFrame, sid: int,
                renames: dict[str, str]) -> list[tuple[str, str, int]]:
    """(text, path, line) triples for one member statement, renamed."""
    fn = index.function(frame.fn_id)
    stmt = fn.statements[sid]
    text = rename_identifiers(stmt.text, renames) if renames else stmt.text
    out = []
    for k, raw in enumerate(text.split("\n")):
        line_no = stmt.span[0] + k
        out.append((raw.strip(), fn.file, line_no))
    return out


def inline_slices(index: CodeIndex, slice_: Slice, cfg: SlicerConfig) -> DetectionContext:
    """Render a slice as one self-contained synthetic function.

    Frames render depth-first along the crossing tree; inlined frames get a
    per-call-site identifier prefix; parameters are bound to argument
    expressions via synthetic assignments. Deepest frames are dropped first
    when the render exceeds the character budget.
    """
    if not slice_.members:
        raise ContractViolationError("cannot inline an empty slice")

    max_depth = max(f.depth for f in slice_.frames)
    keep_depth = max_depth
    trimmed_root: list[int] | None = None
    truncated = False
    while True:
        ctx = _render(index, slice_, keep_depth, trimmed_root)
        if len(ctx.rendered) <= cfg.context_char_budget:
            break
        truncated = True
        if keep_depth > 0:
            keep_depth -= 1
            continue
        root = slice_.frames[0]
        seed_sid = slice_.seed.statement[1]
        fn = index.function(root.fn_id)
        keep = trimmed_root if trimmed_root is not None else list(root.members)
        if len(keep) <= 1:
            break  # nothing left to drop; emit over-budget seed line, flagged
        ordered = sorted(keep, key=lambda sid: (-abs(sid - seed_sid), sid))
        protected = {seed_sid} | set(fn.statements[seed_sid].guard_ids)
        dropped = next((sid for sid in ordered if sid not in protected), None)
        if dropped is None:
            break
        keep.remove(dropped)
        trimmed_root = keep
    if truncated:
        ctx = DetectionContext(ctx.rendered, ctx.origin_map, ctx.seed_marker, True)

    reparsed, _ = parse_source(ctx.rendered)
    if len(reparsed) != 1:
        raise RenderError(
            f"rendered context did not re-parse as one function ({len(reparsed)} found)")
    return ctx


def _render(index: CodeIndex, slice_: Slice, keep_depth: int,
            trimmed_root: list[int] | None) -> DetectionContext:
    children: dict[int, list[int]] = {}
    for i, f in enumerate(slice_.frames):
        if f.parent is not None and f.depth <= keep_depth:
            children.setdefault(f.parent, []).append(i)
    if trimmed_root is not None:
        children.pop(0, None)  # a trimmed root drops its inlined frames too

    renames = {i: _frame_prefix(index, f, i) for i, f in enumerate(slice_.frames)}
    members_of = {i: list(f.members) for i, f in enumerate(slice_.frames)}
    if trimmed_root is not None:
        members_of[0] = sorted(trimmed_root)

    lines: list[tuple[str, str | None, int | None]] = []  # (text, path, line)
    seed_fn_id, seed_sid = slice_.seed.statement
    seed_marker_holder = {"line": 0}

    def emit(text: str, path: str | None = None, line: int | None = None) -> None:
        lines.append((text, path, line))

    def mark_seed_if_needed(fi: int, sid: int) -> None:
        # marks the line emitted immediately before this call; root frame only
        f = slice_.frames[fi]
        if fi == 0 and (f.fn_id, sid) == (seed_fn_id, seed_sid) and seed_marker_holder["line"] == 0:
            seed_marker_holder["line"] = len(lines)

    def render_frame(fi: int, indent: str) -> None:
        f = slice_.frames[fi]
        fn = index.function(f.fn_id)
        my_renames = renames[fi]
        kids = children.get(fi, [])
        arg_def_kids = [k for k in kids if slice_.frames[k].kind == "arg_def"]
        ret_flow_kids = [k for k in kids if slice_.frames[k].kind == "return_flow"]
        by_link: dict[int, list[int]] = {}
        for k in kids:
            kf = slice_.frames[k]
            if kf.kind in ("call_arg", "ret_def") and kf.link_stmt is not None:
                by_link.setdefault(kf.link_stmt, []).append(k)

        for k in arg_def_kids:
            kf = slice_.frames[k]
            caller = index.function(kf.fn_id)
            emit(f"{indent}/* caller context: {caller.name} ({caller.file}) */")
            render_frame(k, indent)
            bound = rename_identifiers(kf.arg_text or "", renames[k])
            target = my_renames.get(kf.param or "", kf.param or "")
            emit(f"{indent}{target} = {bound}; /* bound at call site */")

        mems = members_of[fi]
        member_guards = {sid for sid in mems if fn.statements[sid].kind in ("branch_guard", "loop_guard")}
        guard_stack: list[int] = []
        prev_sid: int | None = None

        def pad() -> str:
            return indent + "    " * len(guard_stack)

        def close_guards(keep: tuple[int, ...]) -> None:
            while guard_stack and guard_stack[-1] not in keep:
                gid = guard_stack.pop()
                g = fn.statements[gid]
                if g.kind == "loop_guard" and g.text.lstrip().startswith("do"):
                    tail = g.text[g.text.rfind("while"):].rstrip().rstrip(";")
                    emit(f"{pad()}}} {rename_identifiers(tail, my_renames)};")
                else:
                    emit(f"{pad()}}}")

        def emit_guard(sid: int) -> None:
            stmt = fn.statements[sid]
            if stmt.text.lstrip().startswith("do"):
                emit(f"{pad()}do {{ /* origin: {fn.file}:{stmt.span[0]} */", fn.file, stmt.span[0])
                mark_seed_if_needed(fi, sid)
                return
            parts = _stmt_lines(index, f, sid, my_renames)
            for k, (text, path, line) in enumerate(parts):
                suffix = " {" if k == len(parts) - 1 else ""
                emit(f"{pad()}{text}{suffix} /* origin: {path}:{line} */", path, line)
                if k == 0:
                    mark_seed_if_needed(fi, sid)

        for sid in mems:
            stmt = fn.statements[sid]
            close_guards(tuple(g for g in stmt.guard_ids if g in member_guards))
            if prev_sid is not None and sid - prev_sid > 1:
                emit(f"{pad()}{ELISION_MARKER}")
            prev_sid = sid
            for k in by_link.get(sid, []):
                if slice_.frames[k].kind == "ret_def":
                    callee = index.function(slice_.frames[k].fn_id)
                    emit(f"{pad()}/* inlined from {callee.name} ({callee.file}); its return feeds the call below */")
                    render_frame(k, pad())
            if stmt.kind in ("branch_guard", "loop_guard"):
                emit_guard(sid)
                guard_stack.append(sid)
            else:
                for k, (text, path, line) in enumerate(_stmt_lines(index, f, sid, my_renames)):
                    rendered = f"{pad()}{text}"
                    if not text.endswith(";") and not text.endswith("}") and not text.endswith("{"):
                        rendered += ";"
                    rendered += f" /* origin: {path}:{line} */"
                    emit(rendered, path, line)
                    if k == 0:
                        mark_seed_if_needed(fi, sid)
            for k in by_link.get(sid, []):
                kf = slice_.frames[k]
                if kf.kind == "call_arg":
                    callee = index.function(kf.fn_id)
                    target = renames[k].get(kf.param or "", kf.param or "")
                    bound = rename_identifiers(kf.arg_text or "", my_renames)
                    emit(f"{pad()}{target} = {bound}; /* argument binding into {callee.name} */")
                    emit(f"{pad()}/* inlined from {callee.name} ({callee.file}) */")
                    render_frame(k, pad())
        close_guards(())

        for k in ret_flow_kids:
            caller = index.function(slice_.frames[k].fn_id)
            emit(f"{indent}/* value returned into {caller.name} ({caller.file}) */")
            render_frame(k, indent)

    root_fn = index.function(slice_.frames[0].fn_id)
    emit(f"void __ctx_{root_fn.name}(void)")
    emit("{")
    emit(f"    /* sliced from {root_fn.name} ({root_fn.file}) */")
    render_frame(0, "    ")
    emit("}")

    text = "\n".join(t for t, _, _ in lines) + "\n"
    origin = tuple(
        (i + 1, path, line)
        for i, (_, path, line) in enumerate(lines)
        if path is not None and line is not None
    )
    return DetectionContext(
        rendered=text,
        origin_map=origin,
        seed_marker=seed_marker_holder["line"],
        truncated=False,
    )
