"""code-index: parsing, call graph construction, lookup operations."""

from __future__ import annotations

import json

import pytest

from conftest import function_named, write_repo
from patscout.cindex.build import callees_of, callers_of, dump_index, index_repository
from patscout.cindex.parser import parse_source, rename_identifiers, split_call_arguments
from patscout.errors import ConfigurationError, IndexLookupError

TWO_FN = "int f(){return g();} int g(){return 1;}"


def test_empty_directory_yields_empty_index(tmp_path):
    root = tmp_path / "empty"
    root.mkdir()
    index = index_repository(root)
    assert index.files == ()
    assert index.functions == ()
    assert index.call_graph.edges == frozenset()


def test_missing_root_is_fatal(tmp_path):
    with pytest.raises(ConfigurationError):
        index_repository(tmp_path / "nope")


def test_two_function_file_resolves_edge(tmp_path):
    root = write_repo(tmp_path, {"two.c": TWO_FN})
    index = index_repository(root)
    assert len(index.functions) == 2
    f = function_named(index, "f")
    g = function_named(index, "g")
    assert index.call_graph.edges == frozenset({(f.id, 0, g.id)})
    assert index.call_graph.unresolved == frozenset()


def test_external_call_lands_in_unresolved(tmp_path):
    root = write_repo(tmp_path, {"ext.c": "void h(char *p){ memset(p, 0, 4); }"})
    index = index_repository(root)
    h = function_named(index, "h")
    assert index.call_graph.edges == frozenset()
    assert index.call_graph.unresolved == frozenset({(h.id, 0, "memset")})


def test_callees_of_two_function_fixture(tmp_path):
    root = write_repo(tmp_path, {"two.c": TWO_FN})
    index = index_repository(root)
    f = function_named(index, "f")
    g = function_named(index, "g")
    assert callees_of(index, f.id) == [(0, g.id)]
    assert callees_of(index, g.id) == []  # leaf function
    assert callers_of(index, g.id) == [(f.id, 0)]
    assert callers_of(index, f.id) == []  # never called


def test_callees_unknown_id_raises(tmp_path):
    root = write_repo(tmp_path, {"two.c": TWO_FN})
    index = index_repository(root)
    with pytest.raises(IndexLookupError):
        callees_of(index, "nope::f::1")
    with pytest.raises(IndexLookupError):
        callers_of(index, "nope::f::1")


def test_duplicate_call_sites_stay_distinct(tmp_path):
    src = "int w(int a){ int x = probe(a); int y = probe(x); return y; } int probe(int v){ return v+1; }"
    root = write_repo(tmp_path, {"dup.c": src})
    index = index_repository(root)
    w = function_named(index, "w")
    p = function_named(index, "probe")
    sites = callees_of(index, w.id)
    assert sites == [(0, p.id), (1, p.id)]


def test_callers_across_files(tmp_path):
    root = write_repo(tmp_path, {
        "a.c": "void a1(void){ core(1); } void a2(void){ core(2); }",
        "b.c": "void b1(void){ core(3); }",
        "core.c": "void core(int v){ int keep = v; }",
    })
    index = index_repository(root)
    core = function_named(index, "core")
    assert len(callers_of(index, core.id)) == 3


def test_duality_of_callers_and_callees(corpus_index):
    nodes = corpus_index.call_graph.nodes
    for caller, site, callee in corpus_index.call_graph.edges:
        assert caller in nodes and callee in nodes
        assert site < len(corpus_index.function(caller).statements)
        assert (site, callee) in callees_of(corpus_index, caller)
        assert (caller, site) in callers_of(corpus_index, callee)


def test_indexing_is_deterministic(tmp_path):
    files = {
        "one.c": TWO_FN,
        "two.c": "void h(int n){ int k = n; if (k > 0) { k = 0; } }",
    }
    a = index_repository(write_repo(tmp_path / "l", files))
    b = index_repository(write_repo(tmp_path / "r", files), jobs=4)  # parallel parse, same result
    assert a.digest() == b.digest()
    assert [f.id for f in a.functions] == [f.id for f in b.functions]
    assert {e[1:] for e in a.call_graph.edges} == {e[1:] for e in b.call_graph.edges}
    for fa, fb in zip(a.functions, b.functions):
        assert [s.kind for s in fa.statements] == [s.kind for s in fb.statements]
        assert [s.defs for s in fa.statements] == [s.defs for s in fb.statements]


def test_resolution_soundness_on_corpus(corpus_index):
    """Every syntactic call whose name has exactly one definition resolves."""
    by_name = {}
    for fn in corpus_index.functions:
        by_name.setdefault(fn.name, []).append(fn.id)
    edges = corpus_index.call_graph.edges
    for fn in corpus_index.functions:
        for stmt in fn.statements:
            for callee in stmt.callee_names:
                if len(by_name.get(callee, [])) == 1:
                    assert (fn.id, stmt.id, by_name[callee][0]) in edges


def test_parse_failure_is_diagnostic_not_fatal(tmp_path):
    root = write_repo(tmp_path, {
        "good.c": TWO_FN,
        "bad.c": "\x00\x01\x02 not c at all {{{",
    })
    index = index_repository(root)
    assert len(index.functions) == 2  # good.c still indexed


def test_unreadable_statements_inside_macros_are_opaque(tmp_path):
    src = """
    void m(int n) {
    #ifdef FAST
        int q = n;
    #endif
        int r = n;
    }
    """
    root = write_repo(tmp_path, {"m.c": src})
    index = index_repository(root)
    fn = function_named(index, "m")
    kinds = [s.kind for s in fn.statements]
    assert kinds.count("other") == 2  # the two preprocessor lines
    assert "decl" in kinds


def test_source_file_invariants(corpus_index):
    paths = [src.path for src in corpus_index.files]
    assert len(paths) == len(set(paths))
    for src in corpus_index.files:
        assert src.line_count == len(src.lines)
        assert src.language in ("c", "cpp")


def test_statement_spans_inside_body(corpus_index):
    for fn in corpus_index.functions:
        lo, hi = fn.body_span
        assert lo <= hi
        for stmt in fn.statements:
            assert lo <= stmt.span[0] <= stmt.span[1] <= hi


def test_defs_uses_textual_containment(corpus_index):
    for fn in corpus_index.functions:
        for stmt in fn.statements:
            for name in stmt.defs | stmt.uses:
                assert name in stmt.text


def test_index_dump_roundtrip(tmp_path, corpus_index):
    path = tmp_path / "index.json"
    dump_index(corpus_index, path)
    doc = json.loads(path.read_text())
    assert len(doc["functions"]) == len(corpus_index.functions)
    assert doc["files"][0]["path"].endswith(".c")


def test_same_name_definitions_fan_out(tmp_path):
    # overload sets resolve to every same-name definition
    root = write_repo(tmp_path, {"ov.cpp": """
    int widen(int v) { return v * 2; }
    long widen(long v) { return v * 2; }
    int caller(int n) { return widen(n); }
    """})
    index = index_repository(root)
    caller = function_named(index, "caller")
    targets = {callee for site, callee in callees_of(index, caller.id)}
    assert len(targets) == 2
    assert all(t.split("::")[1] == "widen" for t in targets)


def test_function_pointer_call_is_unresolved(tmp_path):
    root = write_repo(tmp_path, {"fp.c": "void t(void (*cb)(int)){ (*cb)(1); }"})
    index = index_repository(root)
    t = function_named(index, "t")
    assert any(name == "cb" for _, _, name in index.call_graph.unresolved)
    assert not index.call_graph.edges
    assert t.params == (("cb", "void ( * ) ( int )"),)


def test_cpp_method_indexed_like_function(tmp_path):
    src = """
    class Counter {
    public:
        int bump(int by) {
            total = total + by;
            return total;
        }
    private:
        int total;
    };
    """
    root = write_repo(tmp_path, {"counter.cpp": src})
    index = index_repository(root)
    fn = function_named(index, "bump")
    assert fn.params == (("by", "int"),)
    assert index.source("counter.cpp").language == "cpp"


def test_rename_identifiers_preserves_members():
    out = rename_identifiers("x = s->x + x2;", {"x": "p_x", "s": "p_s"})
    assert out == "p_x = p_s->x + x2;"


def test_split_call_arguments_nested():
    args = split_call_arguments("take(a, g(b, c), d[2]);", "take")
    assert args == [["a", "g(b, c)", "d[2]"]]
    inner = split_call_arguments("take(a, g(b, c), d[2]);", "g")
    assert inner == [["b", "c"]]


def test_else_if_chain_guards():
    fns, _ = parse_source("""
    int pick(int m, int a, int b) {
        int out = 0;
        if (m == 1) {
            out = a;
        } else if (m == 2) {
            out = b;
        } else {
            out = a + b;
        }
        return out;
    }
    """)
    stmts = fns[0].statements
    guard_ids = [i for i, s in enumerate(stmts) if s.kind == "branch_guard"]
    assert len(guard_ids) == 2  # the if and the else-if
    by_text = {s.text: s for s in stmts}
    assert by_text["out = a;"].guard_ids == (guard_ids[0],)
    # the else-if body and the final else both nest under the chain's guards
    assert by_text["out = b;"].guard_ids == (guard_ids[0], guard_ids[1])
    assert by_text["out = a + b;"].guard_ids == (guard_ids[0], guard_ids[1])


def test_multiple_declarators_in_one_statement():
    fns, _ = parse_source("void m(int n){ int a = n, b = a + 1, c; }")
    (stmt,) = fns[0].statements
    assert stmt.kind == "decl"
    assert stmt.defs == {"a", "b", "c"}
    assert "n" in stmt.uses and "a" in stmt.uses
    assert dict(stmt.decl_types) == {"a": "int", "b": "int", "c": "int"}


def test_nested_call_collects_both_callees():
    fns, _ = parse_source("void m(int x){ int r = outer(inner(x), 2); }")
    (stmt,) = fns[0].statements
    assert stmt.callee_names == {"outer", "inner"}
    assert stmt.uses == {"x"}
    assert stmt.defs == {"r"}


def test_string_and_char_literals_are_opaque():
    fns, _ = parse_source(r'''
    void s(void) {
        const char *msg = "if (fake) { call(me); }";
        char c = '}';
        int after = 1;
    }
    ''')
    stmts = fns[0].statements
    assert len(stmts) == 3  # literal braces must not derail statement parsing
    assert stmts[0].callee_names == set()


def test_ternary_statement_reads_all_operands():
    fns, _ = parse_source("void t(int a, int b){ int m = a > b ? a : b; }")
    (stmt,) = fns[0].statements
    assert stmt.defs == {"m"}
    assert stmt.uses == {"a", "b"}


def test_struct_member_write_defines_base_object():
    fns, _ = parse_source("void w(struct pkt *p, int n){ p->len = n; p->data[0] = n; }")
    stmts = fns[0].statements
    assert stmts[0].defs == {"p"} and stmts[0].uses == {"n"}
    assert stmts[1].defs == {"p"} and stmts[1].uses == {"n"}


def test_statement_facts_shapes():
    fns, _ = parse_source("""
    void shapes(int n, int *p) {
        int a = n + 1;
        a += 2;
        *p = a;
        p[1] = a;
        helper(a, n);
        return;
    }
    """)
    stmts = fns[0].statements
    by_text = {s.text: s for s in stmts}
    decl = by_text["int a = n + 1;"]
    assert decl.kind == "decl" and decl.defs == {"a"} and decl.uses == {"n"}
    plus = by_text["a += 2;"]
    assert plus.kind == "assign" and plus.defs == {"a"} and "a" in plus.uses
    deref = by_text["*p = a;"]
    assert deref.defs == {"p"} and deref.uses == {"a"}
    sub = by_text["p[1] = a;"]
    assert sub.defs == {"p"} and sub.uses == {"a"}
    call = by_text["helper(a, n);"]
    assert call.kind == "call" and call.callee_names == {"helper"}
    assert call.uses == {"a", "n"}
