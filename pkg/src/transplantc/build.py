"""Compiling a project tree with a configurable command template."""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .errors import BuildToolMissing

DEFAULT_BUILD = "cc -o {out} {sources}"


@dataclass(frozen=True)
class BuildResult:
    ok: bool
    binary: str | None
    log: str


def c_sources(root: str | os.PathLike) -> list[str]:
    root = Path(root)
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*.c") if p.is_file())


def build_argv(template: str, out: str, sources: list[str], defines: list[str] = (),
               flags: list[str] = ()) -> list[str]:
    srcs = " ".join(shlex.quote(s) for s in sources)
    defs = " ".join([shlex.quote(f) for f in flags] + [shlex.quote(f"-D{d}") for d in defines])
    if "{defines}" in template:
        cmd = template.format(out=shlex.quote(out), sources=srcs, defines=defs)
    else:
        cmd = template.format(out=shlex.quote(out), sources=(defs + " " + srcs).strip())
    return shlex.split(cmd)


def check_tool(template: str) -> None:
    argv = build_argv(template, "a.out", [])
    if not argv or shutil.which(argv[0]) is None:
        raise BuildToolMissing(f"build tool not found: {argv[0] if argv else template!r}")


def build_tree(
    root: str | os.PathLike,
    template: str = DEFAULT_BUILD,
    out: str = "program",
    defines: list[str] = (),
    timeout: float = 120.0,
    flags: list[str] = (),
) -> BuildResult:
    """Run the build command inside ``root`` over every .c file it holds."""
    root = Path(root)
    check_tool(template)
    argv = build_argv(template, out, c_sources(root), list(defines), list(flags))
    try:
        proc = subprocess.run(argv, cwd=root, capture_output=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        return BuildResult(False, None, "build timed out")
    log = (proc.stdout + proc.stderr).decode("utf-8", "replace")
    ok = proc.returncode == 0 and (root / out).exists()
    return BuildResult(ok, str(root / out) if ok else None, log)


def defined_symbols(binary: str | os.PathLike) -> set[str]:
    """Global and local text/data symbols of a binary, via ``nm``."""
    proc = subprocess.run(["nm", str(binary)], capture_output=True, check=True)
    names = set()
    for line in proc.stdout.decode().splitlines():
        parts = line.split()
        if len(parts) == 3 and parts[1] in "TtDdBbRr":
            names.add(parts[2])
    return names
