"""Multi-file project model: every .c/.h file under a root, parsed."""

from __future__ import annotations

import os
import posixpath
import re
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .parser import parse_file
from .printer import print_ast
from .syntax import Ast, Element

_TYPEDEF_RE = re.compile(r"\btypedef\b[^;{]*(?:\{[^}]*\}[^;]*)?\b([A-Za-z_]\w*)\s*;")


@dataclass(frozen=True)
class SourceUnit:
    path: str
    text: str

    @property
    def kind(self) -> str:
        return "header" if self.path.endswith(".h") else "implementation"


@dataclass(frozen=True)
class ProjectModel:
    units: tuple[SourceUnit, ...]
    asts: dict = field(default_factory=dict, compare=False, hash=False)
    root: str = ""

    @property
    def paths(self) -> list[str]:
        return [u.path for u in self.units]

    def text(self, path: str) -> str:
        for u in self.units:
            if u.path == path:
                return u.text
        raise KeyError(path)

    def ast(self, path: str) -> Ast:
        return self.asts[path]

    def has(self, path: str) -> bool:
        return path in self.asts

    def elements(self) -> list[Element]:
        out: list[Element] = []
        for u in self.units:
            out.extend(self.asts[u.path].flat())
        return out

    def sources(self) -> list[str]:
        return [u.path for u in self.units if u.kind == "implementation"]

    def with_texts(self, changes: dict[str, str]) -> "ProjectModel":
        """New model with the given files replaced or added (re-parsed)."""
        units = {u.path: u.text for u in self.units}
        units.update(changes)
        return from_texts(units, root=self.root, previous=self, changed=set(changes))

    def without(self, paths: set[str]) -> "ProjectModel":
        units = {u.path: u.text for u in self.units if u.path not in paths}
        return from_texts(units, root=self.root, previous=self, changed=set())

    def write(self, root: str | os.PathLike) -> None:
        root = Path(root)
        for u in self.units:
            p = root / u.path
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(u.text, encoding="utf-8")

    def as_dict(self) -> dict[str, str]:
        return {u.path: u.text for u in self.units}

    def resolve_include(self, from_path: str, target: str) -> str | None:
        """Project-relative include resolution: the including file's directory
        first, then the project root."""
        base = posixpath.dirname(from_path)
        for cand in (posixpath.normpath(posixpath.join(base, target)), posixpath.normpath(target)):
            if cand in self.asts:
                return cand
        return None


def _typedef_names(texts: dict[str, str]) -> frozenset[str]:
    names: set[str] = set()
    for text in texts.values():
        names.update(_TYPEDEF_RE.findall(text))
    return frozenset(names)


_PARSED: OrderedDict = OrderedDict()
_PARSED_MAX = 512


def _parse_cached(path: str, text: str, typedefs: frozenset[str]) -> Ast:
    """Parse with a small LRU cache; ASTs are treated as immutable."""
    key = (path, text, typedefs)
    hit = _PARSED.get(key)
    if hit is not None:
        _PARSED.move_to_end(key)
        return hit
    ast = parse_file(path, text, typedefs)
    _PARSED[key] = ast
    if len(_PARSED) > _PARSED_MAX:
        _PARSED.popitem(last=False)
    return ast


def from_texts(
    texts: dict[str, str],
    root: str = "",
    previous: ProjectModel | None = None,
    changed: set[str] | None = None,
    jobs: int = 1,
) -> ProjectModel:
    texts = {p.replace(os.sep, "/"): t.replace("\r\n", "\n") for p, t in texts.items()}
    typedefs = _typedef_names(texts)
    paths = sorted(texts)
    asts: dict[str, Ast] = {}
    todo = []
    for p in paths:
        if previous is not None and changed is not None and p not in changed and p in previous.asts:
            old = previous.asts[p]
            if old.source == texts[p]:
                asts[p] = old
                continue
        todo.append(p)
    if jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            for p, a in zip(todo, pool.map(lambda q: _parse_cached(q, texts[q], typedefs), todo)):
                asts[p] = a
    else:
        for p in todo:
            asts[p] = _parse_cached(p, texts[p], typedefs)
    units = tuple(SourceUnit(p, texts[p]) for p in paths)
    return ProjectModel(units, asts, root)


def load_project(root: str | os.PathLike, jobs: int = 1) -> ProjectModel:
    root = Path(root)
    texts: dict[str, str] = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.suffix in (".c", ".h"):
            rel = p.relative_to(root).as_posix()
            texts[rel] = p.read_bytes().decode("utf-8")
    return from_texts(texts, root=str(root), jobs=jobs)


def print_project(project: ProjectModel) -> dict[str, str]:
    return {p: print_ast(project.asts[p]) for p in project.paths}
