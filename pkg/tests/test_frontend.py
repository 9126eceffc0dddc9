from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES
from gen import slice_fixture
from transplantc.errors import CSyntaxError, UnsupportedConstruct
from transplantc.frontend import (
    FUNCTION_DEFINITION,
    GLOBAL_VARIABLE,
    append_text,
    delete_span,
    from_texts,
    load_project,
    normalize,
    parse_file,
    print_ast,
)

CORPUS = sorted(p for p in FIXTURES.rglob("*") if p.suffix in (".c", ".h"))


def test_single_function_definition():
    ast = parse_file("a.c", "int add(int a,int b){return a+b;}")
    assert [(e.kind, e.name) for e in ast.elements] == [(FUNCTION_DEFINITION, "add")]
    assert ast.elements[0].span == ("a.c", 1, 1)


def test_empty_file_has_no_elements():
    assert parse_file("e.c", "").elements == ()


def test_function_pointer_is_unsupported():
    with pytest.raises(UnsupportedConstruct) as exc:
        parse_file("f.c", "void f(void (*cb)(int));")
    assert exc.value.line == 1


def test_goto_is_unsupported():
    with pytest.raises(UnsupportedConstruct):
        parse_file("g.c", "void f(void)\n{\nagain:\n    goto again;\n}\n")


def test_syntax_error_names_line():
    with pytest.raises(CSyntaxError) as exc:
        parse_file("s.c", "int x = 1;\nint f(void) {\n    return 1\n}\n")
    assert exc.value.line == 3 and "';'" in str(exc.value)


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: str(p.relative_to(FIXTURES)))
def test_round_trip_on_fixture_corpus(path: Path):
    text = path.read_text()
    assert print_ast(parse_file(path.name, text)) == text


def test_crlf_is_normalized():
    ast = parse_file("w.c", "int a;\r\nint b;\r\n")
    assert print_ast(ast) == "int a;\nint b;\n"


def test_element_order_and_spans_are_textual():
    text = (FIXTURES / "d1" / "util.c").read_text()
    ast = parse_file("util.c", text)
    names = [e.name for e in ast.elements if e.kind == FUNCTION_DEFINITION]
    assert names == ["add", "twice"]
    starts = [e.start for e in ast.elements]
    assert starts == sorted(starts)


def test_span_reparses_to_single_element():
    text = (FIXTURES / "e2e" / "donor" / "archive.c").read_text()
    for e in parse_file("archive.c", text).elements:
        again = parse_file("x.c", text[e.start:e.end]).elements
        assert len(again) == 1 and again[0].kind == e.kind and again[0].name == e.name


def test_deleting_element_removes_span_and_trailing_blank():
    text = "int a;\n\nint b;\n\nint c;\n"
    b = parse_file("x.c", text).elements[1]
    assert delete_span(text, b.start, b.end) == "int a;\n\nint c;\n"


def test_inserted_element_is_separated_by_one_blank_line():
    assert append_text("int a;\n", "int z = 0;") == "int a;\n\nint z = 0;\n"


def test_normalize_whitespace_and_comments():
    assert normalize("int  x=1 ;") == normalize("int x = 1;") == "int x = 1;"
    assert normalize("int x=1; /*c*/") == "int x = 1;"


def test_normalize_ignores_inner_indentation():
    a = parse_file("a.c", "int f(int x)\n{\n    if (x) {\n        return 1;\n    }\n    return 0;\n}\n").elements[0]
    b = parse_file("b.c", "int f(int x)\n{\n  if (x) {\n\t    return 1;\n  }\n  return 0;\n}\n").elements[0]
    assert normalize(a) == normalize(b)


@pytest.mark.parametrize("path", [p for p in CORPUS if p.suffix == ".c"], ids=lambda p: p.name)
def test_normalize_is_idempotent_on_corpus(path: Path):
    for e in parse_file(path.name, path.read_text()).elements:
        if e.kind in (FUNCTION_DEFINITION, GLOBAL_VARIABLE):
            once = normalize(e)
            again = parse_file("n.c", once + "\n").elements[0]
            assert normalize(again) == once


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_generated_projects_round_trip(seed):
    fx = slice_fixture(seed, n_funcs=6, n_globals=2, n_files=2)
    project = from_texts(fx.files)
    for u in project.units:
        assert print_ast(project.ast(u.path)) == u.text


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([" ", "  ", "\t", "\n", " /* c */ "]), min_size=6, max_size=6))
def test_normalize_invariant_under_spacing(gaps):
    g = gaps
    text = f"int{g[0]}f(int{g[1]}x){g[2]}{{{g[3]}return{g[4]}x+1;{g[5]}}}"
    base = parse_file("a.c", "int f(int x) { return x + 1; }").elements[0]
    assert normalize(parse_file("b.c", text).elements[0]) == normalize(base)


def test_project_paths_are_relative_and_unique():
    project = load_project(FIXTURES / "e2e" / "donor")
    paths = [u.path for u in project.units]
    assert len(set(paths)) == len(paths)
    assert all("\\" not in p and not p.startswith("/") for p in paths)
    assert {u.kind for u in load_project(FIXTURES / "d1").units} == {"header", "implementation"}
