"""Identifier-level facts about parsed elements and statements.

These helpers answer "which names does this code mention, and how": called,
read, written, declared. The dependency graph and the vein construction both
build on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .frontend import Element, Stmt
from .frontend.lexer import ASSIGN_OPS, Token


@dataclass(frozen=True)
class Use:
    name: str
    call: bool
    token: Token
    tag: bool = False  # the name follows struct/union/enum


def identifier_uses(tokens: Sequence[Token], exclude: Iterable[str] = ()) -> list[Use]:
    """Identifiers mentioned in ``tokens`` that are not member names and not in
    ``exclude``. Tag names are returned as ``"struct x"``."""
    skip = set(exclude)
    out: list[Use] = []
    n = len(tokens)
    for i, t in enumerate(tokens):
        if t.kind != "ident":
            continue
        prev = tokens[i - 1] if i > 0 else None
        if prev is not None and prev.kind == "punct" and prev.text in (".", "->"):
            continue
        if prev is not None and prev.kind == "keyword" and prev.text in ("struct", "union", "enum"):
            out.append(Use(f"{prev.text} {t.text}", False, t, tag=True))
            continue
        if t.text in skip:
            continue
        nxt = tokens[i + 1] if i + 1 < n else None
        call = nxt is not None and nxt.kind == "punct" and nxt.text == "("
        out.append(Use(t.text, call, t))
    return out


def local_names(fn: Element) -> set[str]:
    """Parameters plus every name declared anywhere in the body."""
    names = {p.name for p in fn.signature.params if p.name} if fn.signature else set()
    if fn.body is not None:
        for s in fn.body.walk():
            names.update(d.name for d in s.decls)
    return names


def element_uses(e: Element) -> list[Use]:
    """Names an element depends on, excluding its own definitions and locals."""
    own = set(e.defines)
    if e.kind == "function-definition":
        own |= local_names(e)
    return identifier_uses(e.tokens, own)


def element_tag_defs(e: Element) -> set[str]:
    return set(e.tags)


def called_names(tokens: Sequence[Token]) -> list[str]:
    return [u.name for u in identifier_uses(tokens) if u.call]


# -- statement-level def/use -------------------------------------------------


def stmt_declared(s: Stmt) -> set[str]:
    names: set[str] = set()
    for x in s.walk():
        names.update(d.name for d in x.decls)
    return names


def stmt_uses(s: Stmt) -> set[str]:
    return {u.name for u in identifier_uses(s.tokens) if not u.tag}


def stmt_writes(s: Stmt) -> set[str]:
    """Names a statement may write: declared names, assignment and ++/--
    targets (by base identifier), and anything whose address or array value
    is handed to a call."""
    toks = s.tokens
    out = set(stmt_declared(s))
    n = len(toks)
    for i, t in enumerate(toks):
        if t.kind == "punct" and (t.text in ASSIGN_OPS or t.text in ("++", "--")):
            base = _lvalue_base(toks, i)
            if base:
                out.add(base)
            if t.text in ("++", "--") and i + 1 < n and toks[i + 1].kind == "ident":
                out.add(toks[i + 1].text)
        if t.kind == "punct" and t.text == "&" and i + 1 < n and toks[i + 1].kind == "ident":
            prev = toks[i - 1] if i > 0 else None
            if prev is None or prev.kind == "punct" and prev.text in ("(", ",", "=", "return"):
                out.add(toks[i + 1].text)
    # plain identifiers passed as call arguments may be arrays or pointers
    depth_call: list[bool] = []
    for i, t in enumerate(toks):
        if t.kind == "punct" and t.text == "(":
            prev = toks[i - 1] if i > 0 else None
            depth_call.append(prev is not None and prev.kind == "ident")
        elif t.kind == "punct" and t.text == ")":
            if depth_call:
                depth_call.pop()
        elif t.kind == "ident" and depth_call and depth_call[-1]:
            prev, nxt = toks[i - 1], toks[i + 1] if i + 1 < n else None
            if prev.text in ("(", ",") and nxt is not None and nxt.text in (")", ","):
                out.add(t.text)
    return out


def _lvalue_base(toks: Sequence[Token], op: int) -> str | None:
    """Leftmost identifier of the expression immediately before ``op``."""
    j = op - 1
    depth = 0
    base = None
    while j >= 0:
        t = toks[j]
        if t.kind == "punct" and t.text in (")", "]"):
            depth += 1
        elif t.kind == "punct" and t.text in ("(", "["):
            if depth == 0:
                break
            depth -= 1
        elif depth == 0 and t.kind == "punct" and t.text not in (".", "->", "*"):
            break
        elif depth == 0 and t.kind == "keyword":
            break
        if t.kind == "ident" and depth == 0:
            prev = toks[j - 1] if j > 0 else None
            if prev is None or prev.text not in (".", "->"):
                base = t.text
        j -= 1
    return base


def has_return(s: Stmt) -> bool:
    return any(x.kind == "return" for x in s.walk())
