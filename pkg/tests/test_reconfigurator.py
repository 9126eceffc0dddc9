from __future__ import annotations

import subprocess
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen import FEATURES, ifdef_text
from transplantc.errors import UnbalancedDirective
from transplantc.frontend import CONDITIONAL_BLOCK, from_texts
from transplantc.reconfigurator import (
    KEEP_STRIP_GUARDS,
    FeatureDirectiveList,
    UnknownFeatureWarning,
    remove_features,
    strip_dead_directives,
)


def cpp_lines(text: str, defined) -> list[str]:
    """Non-blank lines kept by the system preprocessor."""
    proc = subprocess.run(
        ["cpp", "-P", *[f"-D{d}" for d in sorted(defined)]],
        input=text, capture_output=True, text=True, check=True,
    )
    return [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]


def code_lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def one(text: str, path: str = "f.c"):
    return from_texts({path: text})


def test_single_guard_removed():
    out = remove_features(one("#ifdef FEAT_A\nint a;\n#endif\nint b;"), FeatureDirectiveList(("FEAT_A",)))
    assert out.text("f.c") == "int b;"


def test_empty_list_is_identity():
    text = "#ifdef FEAT_A\nint a;\n#endif\nint b;"
    assert remove_features(one(text), FeatureDirectiveList(())).text("f.c") == text


def test_else_branch_is_retained():
    text = "#ifdef FEAT_A\nint a;\n#else\nint c;\n#endif\n"
    out = remove_features(one(text), FeatureDirectiveList(("FEAT_A",))).text("f.c")
    assert out == "int c;\n"
    assert code_lines(out) == cpp_lines(text, ())


def test_keep_mode_strips_guards_only():
    text = "int z;\n#ifdef FEAT_A\nint a;\n#endif\n"
    out = remove_features(one(text), FeatureDirectiveList(("FEAT_A",), KEEP_STRIP_GUARDS)).text("f.c")
    assert out == "int z;\nint a;\n"


def test_untouched_guards_keep_their_bytes():
    text = "#ifdef KEEP\nint k;\n#endif\n#ifdef GONE\nint g;\n#endif\nint x;\n"
    out = remove_features(one(text), FeatureDirectiveList(("GONE",))).text("f.c")
    assert out == "#ifdef KEEP\nint k;\n#endif\nint x;\n"


def test_unknown_identifier_warns_but_does_not_fail():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = remove_features(one("int b;\n"), FeatureDirectiveList(("NOPE",)))
    assert out.text("f.c") == "int b;\n"
    assert any(issubclass(w.category, UnknownFeatureWarning) for w in caught)


@pytest.mark.parametrize("text", ["#ifdef A\nint a;\n", "int a;\n#endif\n", "#else\n", "#ifdef A\n#else\n#else\n#endif\n"])
def test_unbalanced_directives(text):
    with pytest.raises(UnbalancedDirective):
        strip_dead_directives(one(text), ())


def test_directive_list_validation_and_parsing():
    fl = FeatureDirectiveList.parse("FEAT_A\n# comment\nFEAT_B  # trailing\n\nFEAT_A\n")
    assert fl.removals == ("FEAT_A", "FEAT_B")
    with pytest.raises(ValueError):
        FeatureDirectiveList(("1bad",))
    with pytest.raises(ValueError):
        FeatureDirectiveList(("A", "A"))


def test_strip_all_enabled_keeps_code():
    text = "#ifdef A\nint a;\n#endif\n#ifdef B\nint b;\n#endif\n#ifndef C\nint c;\n#endif\nint d;\n"
    out = strip_dead_directives(one(text), {"A", "B", "C"})
    assert out.text("f.c") == "int a;\nint b;\nint d;\n"
    assert not [e for e in out.ast("f.c").flat() if e.kind == CONDITIONAL_BLOCK]


def test_strip_nested_inner_removed():
    text = "#ifdef B\nint outer;\n#ifdef A\nint inner;\n#endif\n#endif\n"
    out = strip_dead_directives(one(text), {"B"}).text("f.c")
    assert out == "int outer;\n"
    assert code_lines(out) == cpp_lines(text, {"B"})


def test_strip_identity_on_guard_free_file():
    text = "int a;\n\n/* c */\nint f(void) { return 0; }\n"
    assert strip_dead_directives(one(text), ()).text("f.c") == text


# The reconfigurator against the system preprocessor on generated fixtures.
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.sets(st.sampled_from(FEATURES)))
def test_strip_matches_cpp(seed, enabled):
    text = ifdef_text(seed)
    out = strip_dead_directives(one(text), enabled).text("f.c")
    assert code_lines(out) == cpp_lines(text, enabled)
    assert len(out) <= len(text)
    assert not [e for e in one(out).ast("f.c").flat() if e.kind == CONDITIONAL_BLOCK]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.sets(st.sampled_from(FEATURES), min_size=1), st.sets(st.sampled_from(FEATURES)))
def test_removal_matches_cpp_for_remaining_features(seed, removed, defined):
    text = ifdef_text(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnknownFeatureWarning)
        out = remove_features(one(text), FeatureDirectiveList(tuple(sorted(removed)))).text("f.c")
    rest = defined - removed
    assert cpp_lines(out, rest) == cpp_lines(text, rest)
    assert len(out) <= len(text)
    one(out)  # still parses
