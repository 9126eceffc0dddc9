"""Scratch directories for candidate evaluation."""

from __future__ import annotations

import os
import shutil
import tempfile
from pathlib import Path

from ..errors import SandboxIoError
from ..frontend import ProjectModel


def materialize(project: ProjectModel, dest: str | os.PathLike, base_root: str | None = None) -> None:
    """Write ``project`` under ``dest``. Files whose text equals the copy in
    ``base_root`` are hard-linked (or copied when linking fails)."""
    dest = Path(dest)
    try:
        for unit in project.units:
            target = dest / unit.path
            target.parent.mkdir(parents=True, exist_ok=True)
            if base_root:
                src = Path(base_root) / unit.path
                if src.is_file() and src.read_text(encoding="utf-8") == unit.text:
                    try:
                        os.link(src, target)
                    except OSError:
                        shutil.copy2(src, target)
                    continue
            target.write_text(unit.text, encoding="utf-8")
    except OSError as exc:
        raise SandboxIoError(f"cannot materialize candidate in {dest}: {exc}") from exc


class Sandbox:
    """A private temporary directory, removed on exit."""

    def __init__(self, root: str | None = None, prefix: str = "tc-eval-"):
        self.root = root
        self.prefix = prefix
        self.path: str | None = None

    def __enter__(self) -> str:
        try:
            self.path = tempfile.mkdtemp(prefix=self.prefix, dir=self.root)
        except OSError as exc:
            raise SandboxIoError(f"cannot create sandbox: {exc}") from exc
        return self.path

    def __exit__(self, *exc) -> None:
        if self.path:
            shutil.rmtree(self.path, ignore_errors=True)
