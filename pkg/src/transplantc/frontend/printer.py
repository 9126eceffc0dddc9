"""Printing, canonical normalization and span-level editing of parsed sources."""

from __future__ import annotations

from .lexer import Token, tokenize
from .syntax import Ast, Element, Stmt

INDENT = "    "


def print_ast(ast: Ast) -> str:
    parts = [ast.trivia[0]]
    for e, tail in zip(ast.elements, ast.trivia[1:]):
        parts.append(e.text)
        parts.append(tail)
    return "".join(parts)


# -- canonical form ----------------------------------------------------------

_NO_SPACE_BEFORE = {")", "]", ";", ",", ".", "->", "++", "--"}
_NO_SPACE_AFTER = {"(", "[", ".", "->", "!", "~"}
_UNARY_CONTEXT = {
    "(", "[", ",", "=", "return", "{", ";", ":", "?", "&&", "||", "!", "~",
    "+", "-", "*", "/", "%", "<", ">", "<=", ">=", "==", "!=", "&", "|", "^",
    "<<", ">>", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=",
    "case", "sizeof",
}
_TYPE_WORDS = {"void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "const"}
_SPACE_BEFORE_PAREN = {"if", "while", "for", "switch", "return"}


def _is_unary(prev: Token | None) -> bool:
    return prev is None or prev.text in _UNARY_CONTEXT or prev.kind == "directive"


def format_tokens(tokens: list[Token] | tuple[Token, ...], indent: int = 0) -> str:
    """Deterministic layout of a token sequence: one statement per line.

    Comments must already be removed. The output depends only on the token
    texts, which is what makes normalization idempotent.
    """
    lines: list[str] = []
    cur: list[str] = []
    level = indent
    paren = 0
    prev: Token | None = None
    prev_unary = False
    pending_label = False

    def flush() -> None:
        nonlocal cur
        if cur:
            lines.append(INDENT * level + "".join(cur))
        cur = []

    for idx, t in enumerate(tokens):
        x = t.text
        if t.kind == "directive":
            flush()
            lines.append(" ".join(x.replace("\\\n", " ").split()))
            prev = t
            continue
        if t.kind == "punct" and x == "{" and paren == 0:
            flush()
            lines.append(INDENT * level + "{")
            level += 1
            prev = t
            continue
        if t.kind == "punct" and x == "}" and paren == 0:
            flush()
            level = max(level - 1, 0)
            cur = ["}"]
            nxt = tokens[idx + 1] if idx + 1 < len(tokens) else None
            if nxt is None or nxt.text not in (";", ","):
                flush()
            prev = t
            continue
        if t.kind == "keyword" and x in ("case", "default") and paren == 0:
            flush()
            pending_label = True
        # spacing
        if cur:
            space = True
            if x in _NO_SPACE_BEFORE and t.kind == "punct":
                space = False
                if x in ("++", "--") and _is_unary(prev):
                    space = True
            elif prev is not None and prev.text in _NO_SPACE_AFTER and prev.kind == "punct":
                space = False
            elif prev_unary:
                space = False
            elif x == "(" and prev is not None and prev.text not in _SPACE_BEFORE_PAREN and (
                prev.kind in ("ident",) or prev.text in (")", "]", "sizeof")
            ):
                space = False
            elif x == "[" and prev is not None and (prev.kind == "ident" or prev.text in (")", "]")):
                space = False
            elif x == ":" and pending_label:
                space = False
            if prev is not None and prev.text in ("++", "--") and prev_unary:
                space = False
            if x == "*" and prev is not None and prev.text == "*":
                space = False
            if space:
                cur.append(" ")
        cur.append(x)
        prev_unary = t.kind == "punct" and x in ("*", "&", "-", "+", "++", "--") and (
            _is_unary(prev) or (x == "*" and prev is not None and (prev.text in _TYPE_WORDS or prev.text == "*"))
        )
        if t.kind == "punct" and x in ("!", "~"):
            prev_unary = True
        if t.kind == "punct" and x in ("(", "["):
            paren += 1
        elif t.kind == "punct" and x in (")", "]"):
            paren = max(paren - 1, 0)
        elif t.kind == "punct" and x == ";" and paren == 0:
            flush()
        elif t.kind == "punct" and x == ":" and pending_label:
            pending_label = False
            flush()
        prev = t
    flush()
    return "\n".join(lines)


def normalize(element: Element | str) -> str:
    """Canonical text of an element: comments dropped, one statement per line,
    single spaces between tokens, 4-space block indentation."""
    if isinstance(element, str):
        tokens = tokenize(element)
    else:
        tokens = list(element.tokens)
    return format_tokens([t for t in tokens if t.kind != "comment"])


def line_key(text: str) -> tuple[str, ...]:
    """Token texts with comments kept (inner whitespace collapsed): equal keys
    mean the two texts differ only in whitespace and line breaks. Used by the
    text-line clone comparison."""
    out = []
    for t in tokenize(text, keep_comments=True):
        out.append(" ".join(t.text.split()) if t.kind in ("comment", "directive") else t.text)
    return tuple(out)


# -- span editing ------------------------------------------------------------


def line_extent(text: str, start: int, end: int) -> tuple[int, int]:
    """Widen ``[start, end)`` to whole lines when nothing else shares them."""
    s = start
    while s > 0 and text[s - 1] in " \t":
        s -= 1
    if s > 0 and text[s - 1] != "\n":
        s = start
    e = end
    while e < len(text) and text[e] in " \t":
        e += 1
    if e < len(text) and text[e] == "\n":
        e += 1
    elif e < len(text):
        e = end
    return s, e


def delete_span(text: str, start: int, end: int, eat_blank: bool = True) -> str:
    """Remove a span plus, when it occupied whole lines, one following blank line."""
    s, e = line_extent(text, start, end)
    whole = (s == 0 or text[s - 1] == "\n") and (e == len(text) or text[e - 1] == "\n")
    if whole and eat_blank:
        j = e
        while j < len(text) and text[j] in " \t":
            j += 1
        if j < len(text) and text[j] == "\n":
            e = j + 1
    out = text[:s] + text[e:]
    if whole and e == len(text) and not text.endswith("\n") and s > 0:
        # removed the unterminated last line: drop the newline before it
        out = text[:s - 1]
    return out


def delete_spans(text: str, spans: list[tuple[int, int]], eat_blank: bool = True) -> str:
    for start, end in sorted(spans, reverse=True):
        text = delete_span(text, start, end, eat_blank)
    return text


def append_text(text: str, new: str) -> str:
    """Original bytes, one blank line, then ``new`` (newline terminated)."""
    new = new.rstrip("\n") + "\n"
    if not text.strip():
        return text + new if text else new
    if not text.endswith("\n"):
        text += "\n"
    return text + "\n" + new


def insert_before(text: str, offset: int, new: str) -> str:
    """Insert ``new`` as whole lines before the line containing ``offset``."""
    ls = text.rfind("\n", 0, offset) + 1
    return text[:ls] + new.rstrip("\n") + "\n\n" + text[ls:]


def stmt_text(source: str, stmt: Stmt) -> str:
    return source[stmt.start:stmt.end]
