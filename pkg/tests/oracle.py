"""Independent brute-force slicing oracle.

Materializes the dependency edge list explicitly (quadratic scans, naive
fixpoint closure) and re-implements the crossing rules with its own text
handling, so it shares only the CodeIndex facts with the production slicer.
"""

from __future__ import annotations

import re
from collections import deque

_KEYWORDS = {
    "if", "else", "for", "while", "do", "switch", "case", "default", "return",
    "break", "continue", "goto", "sizeof", "int", "char", "long", "short",
    "float", "double", "void", "unsigned", "signed", "const", "static",
    "struct", "union", "enum", "NULL", "bool", "size_t",
}

_IDENT = re.compile(r"[A-Za-z_]\w*")
_MEMBER = re.compile(r"(?:->|\.)\s*[A-Za-z_]\w*")


def text_idents(text: str) -> list[str]:
    """Ordered unique identifiers in an expression, member names stripped."""
    stripped = _MEMBER.sub("", text)
    seen: list[str] = []
    for name in _IDENT.findall(stripped):
        if name not in _KEYWORDS and name not in seen:
            seen.append(name)
    return seen


def call_args(text: str, callee: str) -> list[list[str]]:
    """Argument substrings for each call to ``callee``, by paren counting."""
    results = []
    pos = 0
    while True:
        hit = re.search(rf"\b{re.escape(callee)}\s*\(", text[pos:])
        if not hit:
            break
        open_at = pos + hit.end() - 1
        depth = 0
        args: list[str] = []
        start = open_at + 1
        i = open_at
        while i < len(text):
            ch = text[i]
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth == 0:
                    if text[start:i].strip():
                        args.append(text[start:i].strip())
                    break
            elif ch == "," and depth == 1:
                args.append(text[start:i].strip())
                start = i + 1
            i += 1
        results.append(args)
        pos = i + 1
    return results


def alias_map(fn) -> dict[str, str]:
    """Naive alias classes: repeatedly merge over direct pointer copies."""
    pointers = set()
    for name, ty in fn.params:
        if "*" in ty:
            pointers.add(name)
    for stmt in fn.statements:
        for name, ty in stmt.decl_types:
            if "*" in ty:
                pointers.add(name)
    classes: list[set[str]] = [{p} for p in pointers]

    def merge(a: str, b: str) -> None:
        ca = next(c for c in classes if a in c)
        cb = next(c for c in classes if b in c)
        if ca is not cb:
            ca |= cb
            classes.remove(cb)

    copy_rx = re.compile(r"(?:^|[\s*])([A-Za-z_]\w*)\s*=\s*([A-Za-z_]\w*)\s*;")
    for stmt in fn.statements:
        if stmt.kind not in ("assign", "decl"):
            continue
        m = copy_rx.search(stmt.text)
        if m and m.group(1) in pointers and m.group(2) in pointers:
            merge(m.group(1), m.group(2))
    out: dict[str, str] = {}
    for cls in classes:
        rep = min(cls)
        for name in cls:
            out[name] = rep
    return out


def _facts(fn):
    rep = alias_map(fn)
    defs = [frozenset(rep.get(v, v) for v in s.defs) for s in fn.statements]
    uses = [frozenset(rep.get(v, v) for v in s.uses) for s in fn.statements]
    return rep, defs, uses


def def_use_edges(fn) -> set[tuple[int, int, str]]:
    """(i, j, var): def at i reaches a use at j with no intervening redef."""
    _rep, defs, uses = _facts(fn)
    n = len(fn.statements)
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            for v in defs[i]:
                if v not in uses[j]:
                    continue
                if any(v in defs[k] for k in range(i + 1, j)):
                    continue
                edges.add((i, j, v))
    return edges


def _seed_edges(fn, anchor: int | None, vars_: set[str], forward: bool) -> set[tuple[int, str]]:
    """Targets reachable directly from the (virtual) seed definition/use."""
    rep, defs, uses = _facts(fn)
    wanted = {rep.get(v, v) for v in vars_}
    n = len(fn.statements)
    hits = set()
    if forward:
        start = -1 if anchor is None else anchor
        for j in range(start + 1, n):
            for v in wanted & uses[j]:
                if not any(v in defs[k] for k in range(start + 1, j)):
                    hits.add((j, v))
    else:
        stop = n if anchor is None else anchor
        for i in range(stop - 1, -1, -1):
            for v in wanted & defs[i]:
                if not any(v in defs[k] for k in range(i + 1, stop)):
                    hits.add((i, v))
    return hits


def closure(fn, seeds: list[tuple[int | None, set[str]]], direction: str,
            include_control_deps: bool = True) -> set[int]:
    """Brute-force transitive closure over the materialized edge list."""
    edges = def_use_edges(fn)
    members: set[int] = set()
    for anchor, vars_ in seeds:
        local: set[int] = set()
        if anchor is not None:
            local.add(anchor)
        for j, _v in _seed_edges(fn, anchor, vars_, forward=(direction == "forward")):
            local.add(j)
        changed = True
        while changed:
            changed = False
            for (i, j, _v) in edges:
                if direction == "forward":
                    if i in local and i != anchor and j not in local:
                        local.add(j)
                        changed = True
                else:
                    if j in local and j != anchor and i not in local:
                        local.add(i)
                        changed = True
        members |= local
    if include_control_deps:
        changed = True
        while changed:
            changed = False
            for sid in list(members):
                for gid in fn.statements[sid].guard_ids:
                    if gid not in members:
                        members.add(gid)
                        changed = True
    return members


def interprocedural(index, seed, k_max: int, include_control_deps: bool = True
                    ) -> dict[tuple[str, int], int]:
    """Brute-force inter-procedural slice: same crossing rules, naive engine."""
    direction = "forward" if seed.seed_kind == "faulty_value" else "backward"
    fn_id, sid = seed.statement
    fn = index.function(fn_id)
    stmt = fn.statements[sid]
    if direction == "forward":
        root_vars = {seed.captured_ident} | set(stmt.defs)
    else:
        root_vars = set(stmt.uses) or {seed.captured_ident}

    members: dict[tuple[str, int], int] = {}
    queue = deque([(fn_id, [(sid, root_vars)], 0, "root")])
    visited: set = set()
    while queue:
        cur_id, seeds, depth, kind = queue.popleft()
        key = (cur_id, kind, tuple(sorted((a if a is not None else -1, tuple(sorted(v)))
                                          for a, v in seeds)))
        if key in visited:
            continue
        visited.add(key)
        cur = index.function(cur_id)
        local = closure(cur, seeds, direction, include_control_deps)
        for s in local:
            k = (cur_id, s)
            if k not in members or members[k] > depth:
                members[k] = depth
        if depth + 1 > k_max:
            continue
        rep = alias_map(cur)
        carried = set()
        for a, vs in seeds:
            carried |= {rep.get(v, v) for v in vs}
        for s in local:
            carried |= {rep.get(v, v) for v in cur.statements[s].defs}

        if direction == "forward":
            for s in sorted(local):
                st = cur.statements[s]
                for callee in sorted(st.callee_names):
                    targets = index.functions_named(callee)
                    if not targets:
                        continue
                    for occ in call_args(st.text, callee):
                        for pos, arg in enumerate(occ):
                            arg_ids = {rep.get(v, v) for v in text_idents(arg)}
                            if not (arg_ids & carried):
                                continue
                            for target in targets:
                                callee_fn = index.function(target)
                                if pos < len(callee_fn.params) and callee_fn.params[pos][0]:
                                    pname = callee_fn.params[pos][0]
                                    queue.append((target, [(None, {pname})], depth + 1, "call_arg"))
            ret_tainted = any(
                cur.statements[s].kind == "return"
                and {rep.get(v, v) for v in cur.statements[s].uses} & carried
                for s in local
            )
            if ret_tainted:
                for caller_id, site, callee_id in sorted(index.call_graph.edges):
                    if callee_id != cur_id:
                        continue
                    caller = index.function(caller_id)
                    rvars = set(caller.statements[site].defs)
                    queue.append((caller_id, [(site, rvars)], depth + 1, "return_flow"))
        else:
            used = set()
            for s in local:
                used |= {rep.get(v, v) for v in cur.statements[s].uses}
            for pos, (pname, _ty) in enumerate(cur.params):
                if not pname or rep.get(pname, pname) not in used:
                    continue
                for caller_id, site in sorted(
                    (c, s) for c, s, callee in index.call_graph.edges if callee == cur_id
                ):
                    caller = index.function(caller_id)
                    arg_vars: set[str] = set()
                    got = False
                    for occ in call_args(caller.statements[site].text, cur.name):
                        if pos < len(occ):
                            got = True
                            arg_vars |= set(text_idents(occ[pos]))
                    if got:
                        queue.append((caller_id, [(site, arg_vars)], depth + 1, "arg_def"))
            for s in sorted(local):
                st = cur.statements[s]
                if not st.defs or not st.callee_names:
                    continue
                for callee in sorted(st.callee_names):
                    for target in index.functions_named(callee):
                        callee_fn = index.function(target)
                        rets = [(r.id, set(r.uses)) for r in callee_fn.statements
                                if r.kind == "return"]
                        if rets:
                            queue.append((target, rets, depth + 1, "ret_def"))
    return members
