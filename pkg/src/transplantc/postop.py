"""Postoperative validation: regression, regression++ and acceptance suites,
and promotion of the new suites into the host's regression suite."""

from __future__ import annotations

import json
import re
import subprocess
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .build import DEFAULT_BUILD, build_tree
from .errors import MissingSuite, PromotionBeforeValidation
from .frontend import ProjectModel
from .suites import TestOutcome, TestSuite, run_tests
from .adaptation.sandbox import Sandbox, materialize

STEPS = ("regression", "regression++", "acceptance")
OK, BROKEN = "ok", "broken"


class DuplicateTestWarning(UserWarning):
    pass


@dataclass
class SuiteReport:
    kind: str
    passed: int
    total: int
    seconds: float
    built: bool = True
    skipped: bool = False
    failures: list[str] = field(default_factory=list)
    coverage_note: str | None = None

    @property
    def ok(self) -> bool:
        return self.built and not self.skipped and self.passed == self.total

    def to_json(self) -> dict:
        d = {
            "kind": self.kind,
            "passed": self.passed,
            "total": self.total,
            "built": self.built,
            "skipped": self.skipped,
            "failures": list(self.failures),
            "seconds": round(self.seconds, 3),
        }
        if self.coverage_note is not None:
            d["coverageNote"] = self.coverage_note
        return d


@dataclass
class ValidationReport:
    suites: list[SuiteReport]

    @property
    def verdict(self) -> str:
        return OK if self.suites and all(s.ok for s in self.suites) else BROKEN

    def get(self, kind: str) -> SuiteReport:
        for s in self.suites:
            if s.kind == kind:
                return s
        raise KeyError(kind)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "suites": [s.to_json() for s in self.suites]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def summary(self) -> str:
        parts = [f"{s.kind} {'skipped' if s.skipped else f'{s.passed}/{s.total}'}" for s in self.suites]
        return f"{self.verdict}: " + ", ".join(parts)


def strip_timings(doc):
    """A copy of a report document without wall-clock fields."""
    if isinstance(doc, dict):
        return {k: strip_timings(v) for k, v in doc.items() if k not in ("seconds", "timings", "createdAt")}
    if isinstance(doc, list):
        return [strip_timings(x) for x in doc]
    return doc


_GCOV = re.compile(r"File '([^']+)'\nLines executed:([\d.]+)% of (\d+)")


def _coverage(root: Path) -> str | None:
    gcda = sorted(str(p.relative_to(root)) for p in root.rglob("*.gcda"))
    if not gcda:
        return None
    proc = subprocess.run(["gcov", "-n", *gcda], cwd=root, capture_output=True, text=True)
    hit = total = 0.0
    for name, pct, n in _GCOV.findall(proc.stdout):
        if name.startswith("/"):
            continue
        hit += float(pct) * int(n) / 100
        total += int(n)
    return f"{100 * hit / total:.1f}% statement coverage" if total else None


def run_suite(
    project: ProjectModel,
    suite: TestSuite,
    build_command: str = DEFAULT_BUILD,
    timeout: float = 5.0,
    jobs: int = 1,
    coverage: bool = False,
    defines: list[str] = (),
) -> tuple[int, int, list[TestOutcome], bool, str | None]:
    """Build once and run every test. A build failure counts as 0 passed.

    Returns (passed, total, log, built, coverage note)."""
    with Sandbox(prefix="tc-postop-") as tmp:
        materialize(project, tmp)
        b = build_tree(tmp, build_command, defines=defines, flags=["--coverage"] if coverage else [])
        if not b.ok:
            return 0, len(suite.tests), [], False, None
        r = run_tests(b.binary, suite, timeout, jobs)
        note = _coverage(Path(tmp)) if coverage else None
    return r.passed, r.total, r.log, True, note


def validate(
    project: ProjectModel,
    suites: dict[str, TestSuite],
    build_command: str = DEFAULT_BUILD,
    timeout: float = 5.0,
    jobs: int = 1,
    coverage: bool = False,
    defines: list[str] = (),
) -> ValidationReport:
    """Regression, then regression++, then acceptance. A failing regression
    suite short-circuits: the later suites are reported as skipped.

    ``defines`` are macros set for every build, e.g. the feature flag of a
    guarded implant."""
    for kind in STEPS:
        if kind not in suites:
            raise MissingSuite(kind)
    reports: list[SuiteReport] = []
    stop = False
    for kind in STEPS:
        suite = suites[kind]
        if stop:
            reports.append(SuiteReport(kind, 0, len(suite.tests), 0.0, skipped=True))
            continue
        t0 = time.perf_counter()
        passed, total, log, built, note = run_suite(project, suite, build_command, timeout, jobs, coverage, defines)
        failures = [o.name for o in log if not o.passed]
        reports.append(SuiteReport(kind, passed, total, time.perf_counter() - t0, built, False, failures, note))
        if kind == "regression" and not reports[-1].ok:
            stop = True
    return ValidationReport(reports)


def write_report(report: ValidationReport, path: str | Path) -> None:
    Path(path).write_text(report.dumps(), encoding="utf-8")


def promote_tests(host_regression: TestSuite, new_suites: list[TestSuite], report: ValidationReport | None) -> TestSuite:
    """Union of the host regression suite and the new suites, by test name."""
    if report is None or report.verdict != OK:
        raise PromotionBeforeValidation("promotion requires a validation verdict of ok")
    seen: dict[str, object] = {}
    tests = []
    for suite in [host_regression, *new_suites]:
        for t in suite.tests:
            if t.name in seen:
                warnings.warn(f"duplicate test name {t.name!r}; keeping the first copy", DuplicateTestWarning, stacklevel=2)
                continue
            seen[t.name] = t
            tests.append(t)
    return TestSuite("regression", tests, host_regression.coverage_note)
