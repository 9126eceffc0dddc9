from __future__ import annotations

import shutil
import subprocess
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
FIXTURES = HERE / "fixtures"
sys.path.insert(0, str(HERE))

# PASS/FAIL lines from the acceptance run, printed in the terminal summary
ACCEPTANCE: list[str] = []

from transplantc.frontend import ProjectModel, load_project  # noqa: E402
from transplantc.suites import TestCase, TestSuite  # noqa: E402


def compile_files(files: dict[str, str], out_dir: Path, defines=(), flags=()) -> Path:
    """Write ``files`` and compile every .c among them; returns the binary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for rel, text in files.items():
        p = out_dir / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    srcs = sorted(str(out_dir / r) for r in files if r.endswith(".c"))
    binary = out_dir / "a.out"
    subprocess.run(["cc", "-o", str(binary), *flags, *[f"-D{d}" for d in defines], *srcs],
                   check=True, capture_output=True, text=True)
    return binary


def nm_symbols(binary: Path) -> list[str]:
    """Names of text and data symbols defined in ``binary``, with repeats."""
    out = subprocess.run(["nm", str(binary)], check=True, capture_output=True, text=True).stdout
    names = []
    for line in out.splitlines():
        parts = line.split()
        if len(parts) == 3 and parts[1] in "TtDdBbRr":
            names.append(parts[2])
    return names


def run(binary: Path, *args: str, stdin: str = "") -> str:
    return subprocess.run([str(binary), *args], input=stdin, capture_output=True, text=True, timeout=10).stdout


@pytest.fixture
def d1() -> ProjectModel:
    return load_project(FIXTURES / "d1")


@pytest.fixture
def tiny_host() -> ProjectModel:
    return load_project(FIXTURES / "tiny" / "host")


def sum_icebox() -> TestSuite:
    """Ice-box tests for the D1 ``feat_sum`` organ inside the tiny host."""
    return TestSuite("icebox", (
        TestCase("ice_3", ("3",), None, 0, b"host 3\nsum 6\n"),
        TestCase("ice_4", ("4",), None, 0, b"host 4\nsum 10\n"),
    ))


@pytest.fixture
def e2e_copy(tmp_path) -> Path:
    dst = tmp_path / "e2e"
    shutil.copytree(FIXTURES / "e2e", dst)
    return dst


@pytest.fixture(scope="session")
def transplanted(tmp_path_factory) -> Path:
    """Workspace of one seeded end-to-end transplant of the checksum feature."""
    from transplantc.pipeline import TransplantRequest, transplant

    ws = tmp_path_factory.mktemp("transplanted")
    e2e = FIXTURES / "e2e"
    transplant(TransplantRequest(
        donor_folder=str(e2e / "donor"), host_project=str(e2e / "host"), workspace=str(ws),
        seeds=[1], entry="checksum_report", suites_folder=str(e2e / "suites"),
    ))
    return ws


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
