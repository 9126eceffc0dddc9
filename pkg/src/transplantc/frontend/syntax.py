"""Syntax tree types produced by the parser.

Every node keeps the exact character offsets it came from, so the original
text of any element or statement is always ``source[start:end]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .lexer import Token

FUNCTION_DEFINITION = "function-definition"
FUNCTION_DECLARATION = "function-declaration"
GLOBAL_VARIABLE = "global-variable"
TYPE_DEFINITION = "type-definition"
CONSTANT_DEFINITION = "constant-definition"
INCLUDE_DIRECTIVE = "include-directive"
CONDITIONAL_BLOCK = "conditional-directive-block"

ELEMENT_KINDS = (
    FUNCTION_DEFINITION,
    FUNCTION_DECLARATION,
    GLOBAL_VARIABLE,
    TYPE_DEFINITION,
    CONSTANT_DEFINITION,
    INCLUDE_DIRECTIVE,
    CONDITIONAL_BLOCK,
)


@dataclass(frozen=True)
class CType:
    """A declared type: base words, pointer depth and array dimensions."""

    base: str
    pointers: int = 0
    arrays: int = 0

    def __str__(self) -> str:
        s = self.base + (" " + "*" * self.pointers if self.pointers else "")
        return s + "[]" * self.arrays

    @property
    def decayed(self) -> str:
        """Type name after array-to-pointer decay, used for binding compatibility."""
        p = self.pointers + (1 if self.arrays else 0)
        return self.base + (" " + "*" * p if p else "")


@dataclass(frozen=True)
class Decl:
    name: str
    ctype: CType
    has_init: bool = False
    init: tuple[Token, ...] = ()


@dataclass(frozen=True)
class Signature:
    name: str
    return_type: CType
    params: tuple[Decl, ...]
    variadic: bool
    static: bool
    header: tuple[Token, ...]  # tokens up to, not including, the body brace

    def key(self) -> tuple:
        return (
            self.return_type.decayed,
            tuple(p.ctype.decayed for p in self.params),
            self.variadic,
        )


@dataclass(frozen=True)
class Stmt:
    kind: str  # block if while do for switch case default return break continue decl expr empty directive
    start: int
    end: int
    line: int
    end_line: int
    tokens: tuple[Token, ...]
    children: tuple["Stmt", ...] = ()
    decls: tuple[Decl, ...] = ()
    head: tuple[Token, ...] = ()

    def walk(self) -> Iterator["Stmt"]:
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass(frozen=True)
class Element:
    kind: str
    name: str | None
    file: str
    start: int
    end: int
    line: int
    end_line: int
    text: str
    tokens: tuple[Token, ...]
    key: str = ""
    defines: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()  # "struct x" style tags this element defines
    static: bool = False
    signature: Signature | None = None
    body: Stmt | None = None
    decls: tuple[Decl, ...] = ()
    children: tuple["Element", ...] = ()
    else_children: tuple["Element", ...] = ()
    directive: str | None = None  # include/define/ifdef/ifndef
    system: bool = False  # include of <...>
    base_type: str | None = None  # for typedefs: the aliased CType

    @property
    def span(self) -> tuple[str, int, int]:
        return (self.file, self.line, self.end_line)

    @property
    def statements(self) -> tuple[Stmt, ...]:
        return self.body.children if self.body is not None else ()

    def walk(self) -> Iterator["Element"]:
        yield self
        for c in self.children + self.else_children:
            yield from c.walk()


@dataclass(frozen=True)
class Ast:
    path: str
    source: str
    elements: tuple[Element, ...]
    trivia: tuple[str, ...] = field(default=())

    def flat(self) -> list[Element]:
        """All elements including those nested inside conditional blocks."""
        out: list[Element] = []
        for e in self.elements:
            out.extend(e.walk())
        return out

    def find(self, key: str) -> Element:
        for e in self.flat():
            if e.key == key:
                return e
        raise KeyError(f"{self.path}: no element {key!r}")

    def functions(self) -> list[Element]:
        return [e for e in self.flat() if e.kind == FUNCTION_DEFINITION]
