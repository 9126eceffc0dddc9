"""Removal of preprocessor-guarded features and cleanup of leftover guards.

Both operations work line-wise on the lexer's directive tokens, so every byte
outside a touched conditional stays exactly as it was.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .errors import UnbalancedDirective
from .frontend import ProjectModel
from .frontend.lexer import directive_words, tokenize

DELETE_GUARDED = "delete-guarded-code"
KEEP_STRIP_GUARDS = "keep-code-strip-guards"

_IDENT = re.compile(r"[A-Za-z_]\w*\Z")


class UnknownFeatureWarning(UserWarning):
    """A requested identifier guards no conditional block in the project."""


@dataclass(frozen=True)
class FeatureDirectiveList:
    removals: tuple[str, ...]
    mode: str = DELETE_GUARDED

    def __post_init__(self):
        if self.mode not in (DELETE_GUARDED, KEEP_STRIP_GUARDS):
            raise ValueError(f"unknown mode {self.mode!r}")
        bad = [r for r in self.removals if not _IDENT.match(r)]
        if bad:
            raise ValueError(f"not C identifiers: {bad}")
        if len(set(self.removals)) != len(self.removals):
            raise ValueError("duplicate identifiers in feature list")

    @classmethod
    def parse(cls, text: str, mode: str = DELETE_GUARDED) -> "FeatureDirectiveList":
        """One identifier per line; ``#`` starts a comment. Duplicates collapse."""
        names: list[str] = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if line and line not in names:
                names.append(line)
        return cls(tuple(names), mode)

    @classmethod
    def load(cls, path: str | Path, mode: str = DELETE_GUARDED) -> "FeatureDirectiveList":
        return cls.parse(Path(path).read_text(encoding="utf-8"), mode)


# decide(kind, name) -> None (leave block untouched) or True/False meaning
# "the macro is defined" / "undefined" for the purpose of resolving it
Decider = Callable[[str, str], "bool | None"]


@dataclass
class _Frame:
    defined: bool | None
    kind: str
    in_else: bool = False

    def branch_alive(self) -> bool:
        if self.defined is None:
            return True
        then_alive = self.defined if self.kind == "ifdef" else not self.defined
        return then_alive != self.in_else


def conditional_names(text: str, file: str = "<input>") -> set[str]:
    names = set()
    for t in tokenize(text, file):
        if t.kind == "directive":
            w = directive_words(t)
            if w and w[0] in ("ifdef", "ifndef") and len(w) > 1:
                names.add(w[1].split()[0])
    return names


def resolve_text(text: str, decide: Decider, file: str = "<input>") -> str:
    """Apply ``decide`` to every #ifdef/#ifndef in ``text``, deleting whole lines."""
    text = text.replace("\r\n", "\n")
    lines = text.split("\n")
    directives = {}
    for t in tokenize(text, file):
        if t.kind == "directive":
            directives[t.line - 1] = t
    drop = [False] * len(lines)
    stack: list[_Frame] = []

    def alive(frames) -> bool:
        return all(f.branch_alive() for f in frames)

    k = 0
    while k < len(lines):
        t = directives.get(k)
        if t is None:
            drop[k] = not alive(stack)
            k += 1
            continue
        w = directive_words(t)
        kw = w[0] if w else ""
        resolved = False
        outer = alive(stack)
        if kw in ("ifdef", "ifndef"):
            name = w[1].split()[0] if len(w) > 1 else ""
            frame = _Frame(decide(kw, name), kw)
            stack.append(frame)
            resolved = frame.defined is not None
        elif kw == "if":
            stack.append(_Frame(None, "if"))
        elif kw in ("else", "elif"):
            if not stack:
                raise UnbalancedDirective(file, t.line, f"#{kw} without #ifdef")
            top = stack[-1]
            if kw == "elif" and top.defined is not None:
                raise UnbalancedDirective(file, t.line, "#elif after a resolvable #ifdef")
            if top.in_else and kw == "else":
                raise UnbalancedDirective(file, t.line, "duplicate #else")
            top.in_else = True
            resolved = top.defined is not None
            outer = alive(stack[:-1])
        elif kw == "endif":
            if not stack:
                raise UnbalancedDirective(file, t.line, "#endif without #ifdef")
            top = stack.pop()
            resolved = top.defined is not None
            outer = alive(stack)
        for j in range(t.line - 1, t.end_line):
            drop[j] = resolved or not outer
        k = t.end_line
    if stack:
        raise UnbalancedDirective(file, len(lines), "#ifdef without #endif")
    if not any(drop):
        return text
    out = "\n".join(ln for ln, d in zip(lines, drop) if not d)
    if text.endswith("\n") and out and not out.endswith("\n"):
        out += "\n"
    return out


def _apply(project: ProjectModel, decide: Decider) -> ProjectModel:
    changes = {}
    for unit in project.units:
        new = resolve_text(unit.text, decide, unit.path)
        if new != unit.text:
            changes[unit.path] = new
    return project.with_texts(changes) if changes else project


def remove_features(project: ProjectModel, features: FeatureDirectiveList) -> ProjectModel:
    """Resolve every guard on a listed identifier.

    In delete mode the identifier counts as undefined (guarded code goes,
    any ``#else`` branch stays); in keep mode it counts as defined.
    Identifiers guarding nothing are reported through ``UnknownFeatureWarning``.
    """
    wanted = set(features.removals)
    present: set[str] = set()
    for unit in project.units:
        present |= conditional_names(unit.text, unit.path)
    for name in features.removals:
        if name not in present:
            warnings.warn(UnknownFeatureWarning(name), stacklevel=2)
    defined = features.mode == KEEP_STRIP_GUARDS

    def decide(kind: str, name: str) -> bool | None:
        return defined if name in wanted else None

    return _apply(project, decide)


def strip_dead_directives(project: ProjectModel, enabled: Iterable[str]) -> ProjectModel:
    """Resolve all guards: enabled identifiers are defined, all others are not."""
    on = set(enabled)
    return _apply(project, lambda kind, name: name in on)


def unknown_features(project: ProjectModel, names: Iterable[str]) -> list[str]:
    present: set[str] = set()
    for unit in project.units:
        present |= conditional_names(unit.text, unit.path)
    return [n for n in names if n not in present]
