"""Regenerate the test suites of the bundled end-to-end fixture from the
Python editor model in tests/oracles.py."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from oracles import editor  # noqa: E402

from transplantc.suites import TestCase, TestSuite, save_suite  # noqa: E402

REGRESSION = {
    "append_print": ":a one\n:a two\n:p\n",
    "empty_print": ":p\n",
    "count_empty": ":n\n",
    "count_three": ":a a\n:a b\n:a c\n:n\n",
    "delete_first": ":a a\n:a b\n:d 1\n:p\n",
    "delete_last": ":a a\n:a b\n:d 2\n:p\n",
    "delete_bad_index": ":a a\n:d 5\n",
    "delete_zero": ":a a\n:d 0\n:n\n",
    "delete_text_arg": ":a a\n:d x\n",
    "upper": ":a hello world\n:u 1\n:p\n",
    "upper_bad": ":u 1\n",
    "reverse_odd": ":a abc\n:r 1\n:p\n",
    "reverse_even": ":a abcd\n:r 1\n:p\n",
    "reverse_bad": ":a abc\n:r 3\n",
    "unknown_command": ":x\n",
    "plain_text": "hello\n",
    "quit_stops": ":a a\n:q\n:p\n",
    "append_spaces": ":a a b  c\n:p\n",
    "append_empty": ":a\n:n\n:p\n",
    "mixed_edit": ":a one\n:a two\n:a three\n:d 2\n:u 2\n:r 1\n:p\n:n\n",
    "fill_buffer": "".join(f":a l{i}\n" for i in range(65)) + ":n\n",
    "leading_space_index": ":a a\n:a b\n:d  2\n:p\n",
}

REGRESSION_PLUS = {
    "sum_after_edit": ":a abc\n:u 1\n:sum ABC\n:p\n",
    "sum_keeps_buffer": ":a one\n:sum one\n:n\n",
    "sum_empty_arg": ":sum\n",
    "sum_with_spaces": ":sum a b\n",
    "sum_then_unknown": ":sum z\n:zz\n",
    "sum_twice": ":sum x\n:sum y\n",
    "sum_after_quit": ":q\n:sum x\n",
    "sum_long_word": ":sum abcdefghijklmnopqrstuvwxyz0123456789\n",
}

ACCEPTANCE = {
    "sum_hello": ":sum hello\n",
    "sum_archive_name": ":sum backup.tar\n",
    "sum_sequence": ":sum a\n:sum ab\n:sum abc\n",
}

ICEBOX = {
    "organ_abc": ":sum abc\n",
    "organ_two_words": ":sum hello world\n",
    "organ_single": ":sum x\n",
    "organ_empty": ":sum\n",
    "organ_mixed": ":sum Zz9\n",
}


def suite(kind: str, cases: dict[str, str], prefix: str, with_sum: bool) -> TestSuite:
    tests = [
        TestCase(f"{prefix}_{i + 1:02d}_{name}", (), text.encode(), 0, editor(text, with_sum).encode())
        for i, (name, text) in enumerate(cases.items())
    ]
    return TestSuite(kind, tests)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "tests" / "fixtures" / "e2e" / "suites"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    save_suite(suite("regression", REGRESSION, "reg", False), out / "regression")
    save_suite(suite("regression++", REGRESSION_PLUS, "regpp", True), out / "regression++")
    save_suite(suite("acceptance", ACCEPTANCE, "acc", True), out / "acceptance")
    save_suite(suite("icebox", ICEBOX, "ice", True), out / "icebox")
    print(f"wrote suites under {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
