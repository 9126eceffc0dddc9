from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen import slice_fixture
from transplantc.depgraph import backward_slice, build_sdg, forward_slice
from transplantc.errors import NoPathFromMain, UnknownEntryPoint, UnresolvedSymbol
from transplantc.frontend import FUNCTION_DEFINITION, GLOBAL_VARIABLE, from_texts


def named(sdg, ids, kinds=(FUNCTION_DEFINITION, GLOBAL_VARIABLE)) -> set[str]:
    return {sdg.nodes[i].name for i in ids if sdg.nodes[i].kind in kinds}


def text_scan_calls(project) -> set[tuple[str, str]]:
    """Call edges found by scanning each function body for ``name(``."""
    defined = {e.name for e in project.elements() if e.kind == FUNCTION_DEFINITION}
    out = set()
    for e in project.elements():
        if e.kind == FUNCTION_DEFINITION:
            body = e.text[e.text.index("{"):]
            for m in re.finditer(r"\b([A-Za-z_]\w*)\s*\(", body):
                if m.group(1) in defined:
                    out.add((e.name, m.group(1)))
    return out


def test_d1_call_edges(d1):
    sdg = build_sdg(d1)
    assert sdg.call_edges() == {("twice", "add"), ("feat_sum", "add"), ("main", "feat_sum")}
    assert sdg.call_edges() == text_scan_calls(d1)


def test_empty_main_has_no_dependencies():
    sdg = build_sdg(from_texts({"m.c": "int main(){return 0;}"}))
    elements = [n for n in sdg.nodes if n.kind != "statement"]
    assert len(elements) == 1
    # the only edges are body-membership edges to main's own statement
    assert [e for e in sdg.edges if e.kind != "control"] == []


def test_global_read_by_two_functions():
    src = "int g;\nint a(void) { return g; }\nint b(void) { return g + 1; }\nint main(void) { return a() + b(); }\n"
    sdg = build_sdg(from_texts({"m.c": src}))
    data = {(sdg.nodes[e.src].name, sdg.nodes[e.dst].name) for e in sdg.edges if e.kind == "data"}
    assert {("a", "g"), ("b", "g")} <= data


def test_forward_slice_d1(d1):
    sdg = build_sdg(d1)
    assert named(sdg, forward_slice(sdg, "feat_sum")) == {"feat_sum", "add"}
    assert named(sdg, forward_slice(sdg, "add")) == {"add"}
    assert named(sdg, forward_slice(sdg, "main")) == {"main", "feat_sum", "add"}


def test_unknown_entry(d1):
    with pytest.raises(UnknownEntryPoint):
        forward_slice(build_sdg(d1), "nope")


def test_unresolved_call():
    with pytest.raises(UnresolvedSymbol) as exc:
        build_sdg(from_texts({"m.c": "int main(void)\n{\n    return missing(1);\n}\n"}))
    assert exc.value.line == 3


def test_libc_calls_become_boundary_nodes(d1):
    sdg = build_sdg(d1)
    assert [n.name for n in sdg.nodes if n.kind == "boundary"] == ["printf"]
    assert all(sdg.nodes[i].kind != "boundary" for i in forward_slice(sdg, "feat_sum"))


def test_backward_slice_d1(d1):
    sdg = build_sdg(d1)
    vein = [sdg.nodes[i] for i in backward_slice(sdg, "feat_sum")]
    assert [(n.name, n.statement_index) for n in vein] == [("main", 0), ("main", 1)]


def test_backward_slice_of_main_is_empty(d1):
    assert backward_slice(build_sdg(d1), "main") == []


def test_no_path_from_main():
    sdg = build_sdg(from_texts({"m.c": "int f(void) { return 1; }\nint main(void) { return 0; }\n"}))
    with pytest.raises(NoPathFromMain):
        backward_slice(sdg, "f")


def test_dot_output(d1):
    dot = build_sdg(d1).to_dot()
    assert dot.startswith("digraph sdg {") and 'label="call"' in dot and "main.c:feat_sum" in dot


# Slices against the generator's own reachability.
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1_000_000))
def test_forward_slice_matches_reachability_oracle(seed):
    fx = slice_fixture(seed)
    sdg = build_sdg(from_texts(fx.files))
    assert named(sdg, forward_slice(sdg, fx.entry)) == fx.expected()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1_000_000))
def test_slice_monotone_over_call_edges(seed):
    fx = slice_fixture(seed)
    sdg = build_sdg(from_texts(fx.files))
    for e in sdg.edges:
        if e.kind == "call" and sdg.nodes[e.dst].kind == FUNCTION_DEFINITION:
            caller, callee = sdg.nodes[e.src].name, sdg.nodes[e.dst].name
            assert forward_slice(sdg, callee) <= forward_slice(sdg, caller)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1_000_000))
def test_builds_are_deterministic(seed):
    fx = slice_fixture(seed)
    a, b = build_sdg(from_texts(fx.files)), build_sdg(from_texts(dict(reversed(list(fx.files.items())))))
    assert a.nodes == b.nodes and a.edges == b.edges
    assert forward_slice(a, fx.entry) == forward_slice(b, fx.entry)


def test_node_ids_sorted_by_file_and_span(d1):
    sdg = build_sdg(d1)
    order = [(n.file, n.id) for n in sdg.nodes if n.kind != "boundary"]
    assert [f for f, _ in order] == sorted(f for f, _ in order)
    assert set(sdg.name_index.values()) == {n.id for n in sdg.nodes}
    assert all(0 <= e.src < len(sdg.nodes) and 0 <= e.dst < len(sdg.nodes) for e in sdg.edges)
