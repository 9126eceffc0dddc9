"""Test suites on disk and their execution against a built binary.

A suite directory holds ``suite.json``::

    {"kind": "regression",
     "tests": [{"name": "t01", "args": ["-x"], "stdin": "t01.in",
                "expected_exit": 0, "expected_stdout": "t01.out"}]}

``stdin`` and ``expected_stdout`` name files next to ``suite.json`` and are
optional. Stdout matches when equal after stripping trailing newlines.
"""

from __future__ import annotations

import json
import os
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

KINDS = ("regression", "regression++", "acceptance", "icebox")


@dataclass(frozen=True)
class TestCase:
    name: str
    args: tuple[str, ...] = ()
    stdin: bytes | None = None
    expected_exit: int = 0
    expected_stdout: bytes | None = None

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class TestSuite:
    kind: str
    tests: tuple[TestCase, ...]
    coverage_note: float | None = None

    __test__ = False

    def names(self) -> list[str]:
        return [t.name for t in self.tests]

    def with_kind(self, kind: str) -> "TestSuite":
        return replace(self, kind=kind)


@dataclass(frozen=True)
class TestOutcome:
    name: str
    passed: bool
    exit_code: int | None
    detail: str = ""

    __test__ = False


@dataclass
class SuiteResult:
    kind: str
    passed: int
    total: int
    log: list[TestOutcome] = field(default_factory=list)
    seconds: float = 0.0
    built: bool = True


def load_suite(folder: str | os.PathLike) -> TestSuite:
    folder = Path(folder)
    doc = json.loads((folder / "suite.json").read_text(encoding="utf-8"))
    tests = []
    for t in doc["tests"]:
        stdin = (folder / t["stdin"]).read_bytes() if t.get("stdin") else None
        out = (folder / t["expected_stdout"]).read_bytes() if t.get("expected_stdout") else None
        tests.append(TestCase(t["name"], tuple(t.get("args", ())), stdin, int(t.get("expected_exit", 0)), out))
    return TestSuite(doc.get("kind", folder.name), tuple(tests), doc.get("coverage_note"))


def save_suite(suite: TestSuite, folder: str | os.PathLike) -> None:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    tests = []
    for t in suite.tests:
        entry: dict = {"name": t.name, "args": list(t.args), "expected_exit": t.expected_exit}
        if t.stdin is not None:
            (folder / f"{t.name}.in").write_bytes(t.stdin)
            entry["stdin"] = f"{t.name}.in"
        if t.expected_stdout is not None:
            (folder / f"{t.name}.out").write_bytes(t.expected_stdout)
            entry["expected_stdout"] = f"{t.name}.out"
        tests.append(entry)
    doc = {"kind": suite.kind, "tests": tests}
    if suite.coverage_note is not None:
        doc["coverage_note"] = suite.coverage_note
    (folder / "suite.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _norm(b: bytes) -> bytes:
    return b.rstrip(b"\n")


def run_test(binary: str, test: TestCase, timeout: float = 5.0) -> TestOutcome:
    with tempfile.TemporaryDirectory(prefix="tc-test-") as scratch:
        try:
            proc = subprocess.run(
                [binary, *test.args],
                input=test.stdin if test.stdin is not None else b"",
                capture_output=True,
                timeout=timeout,
                cwd=scratch,
            )
        except subprocess.TimeoutExpired:
            return TestOutcome(test.name, False, None, "timeout")
        except OSError as exc:
            return TestOutcome(test.name, False, None, f"could not run: {exc}")
    if proc.returncode != test.expected_exit:
        return TestOutcome(test.name, False, proc.returncode, f"exit {proc.returncode} != {test.expected_exit}")
    if test.expected_stdout is not None and _norm(proc.stdout) != _norm(test.expected_stdout):
        return TestOutcome(test.name, False, proc.returncode, "stdout differs")
    return TestOutcome(test.name, True, proc.returncode)


def run_tests(binary: str, suite: TestSuite, timeout: float = 5.0, jobs: int = 1) -> SuiteResult:
    tests = list(suite.tests)
    if jobs > 1 and len(tests) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            log = list(pool.map(lambda t: run_test(binary, t, timeout), tests))
    else:
        log = [run_test(binary, t, timeout) for t in tests]
    log.sort(key=lambda o: o.name)
    return SuiteResult(suite.kind, sum(o.passed for o in log), len(log), log)
