"""Recursive-descent parser for the supported C subset.

The parser is layout preserving: an Ast carries the inter-element trivia so
that ``print_ast(parse_file(p, t)) == t`` for every accepted input.
"""

from __future__ import annotations

import re
from dataclasses import replace

from ..errors import CSyntaxError, UnbalancedDirective, UnsupportedConstruct
from .lexer import QUALIFIERS, STORAGE, TYPE_KEYWORDS, Token, directive_words, tokenize
from .syntax import (
    CONDITIONAL_BLOCK,
    CONSTANT_DEFINITION,
    FUNCTION_DECLARATION,
    FUNCTION_DEFINITION,
    GLOBAL_VARIABLE,
    INCLUDE_DIRECTIVE,
    TYPE_DEFINITION,
    Ast,
    CType,
    Decl,
    Element,
    Signature,
    Stmt,
)

# typedef names provided by the common libc headers
SYSTEM_TYPEDEFS = frozenset(
    """size_t ssize_t ptrdiff_t FILE fpos_t off_t time_t clock_t va_list wchar_t
    int8_t int16_t int32_t int64_t uint8_t uint16_t uint32_t uint64_t intptr_t
    uintptr_t bool pid_t mode_t""".split()
)


def parse_file(path: str, text: str | bytes, typedefs: frozenset[str] | set[str] = frozenset()) -> Ast:
    """Parse one source file into an Ast.

    ``typedefs`` seeds the set of identifiers known to name types (for
    example typedefs from project headers this file includes).
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    text = text.replace("\r\n", "\n")
    tokens = tokenize(text, path)
    p = _Parser(path, text, tokens, set(typedefs) | SYSTEM_TYPEDEFS)
    elements = p.top_level(0, len(tokens))
    elements = _assign_keys(elements)
    trivia = []
    pos = 0
    for e in elements:
        trivia.append(text[pos:e.start])
        pos = e.end
    trivia.append(text[pos:])
    return Ast(path, text, tuple(elements), tuple(trivia))


def _assign_keys(elements: list[Element]) -> list[Element]:
    seen: dict[str, int] = {}

    def visit(e: Element) -> Element:
        if e.kind == FUNCTION_DEFINITION:
            base = e.name
        elif e.kind == INCLUDE_DIRECTIVE:
            base = "include:" + ("<" if e.system else '"') + e.name
        elif e.kind == CONDITIONAL_BLOCK:
            base = f"{e.directive}:{e.name}"
        else:
            base = f"{e.kind}:{e.name}"
        seen[base] = seen.get(base, 0) + 1
        key = base if seen[base] == 1 else f"{base}#{seen[base]}"
        kids = tuple(visit(c) for c in e.children)
        else_kids = tuple(visit(c) for c in e.else_children)
        return _replace(e, key=key, children=kids, else_children=else_kids)

    return [visit(e) for e in elements]


def _replace(e: Element, **kw) -> Element:
    return replace(e, **kw)


class _Parser:
    def __init__(self, path: str, text: str, tokens: list[Token], typedefs: set[str]):
        self.path = path
        self.text = text
        self.toks = tokens
        self.typedefs = typedefs

    # -- helpers -----------------------------------------------------------

    def _tok(self, i: int, hi: int) -> Token:
        if i >= hi:
            line = self.toks[hi - 1].end_line if hi > 0 else 1
            raise CSyntaxError(self.path, line, "more input")
        return self.toks[i]

    def _expect(self, i: int, hi: int, text: str) -> int:
        t = self._tok(i, hi)
        if t.text != text or t.kind in ("string", "char", "directive"):
            raise CSyntaxError(self.path, t.line, repr(text))
        return i + 1

    def _match(self, i: int, hi: int) -> int:
        """Index of the bracket closing the one at ``i``."""
        pairs = {"(": ")", "[": "]", "{": "}"}
        open_ = self.toks[i].text
        close = pairs[open_]
        depth = 0
        for j in range(i, hi):
            t = self.toks[j]
            if t.kind != "punct":
                if t.kind == "directive" and open_ != "{":
                    raise UnsupportedConstruct(self.path, t.line, "directive inside expression")
                continue
            if t.text == open_:
                depth += 1
            elif t.text == close:
                depth -= 1
                if depth == 0:
                    return j
        raise CSyntaxError(self.path, self.toks[i].line, repr(close))

    def _element(self, kind: str, name: str | None, lo: int, hi_incl: int, **kw) -> Element:
        first, last = self.toks[lo], self.toks[hi_incl]
        return Element(
            kind=kind,
            name=name,
            file=self.path,
            start=first.start,
            end=last.end,
            line=first.line,
            end_line=last.end_line,
            text=self.text[first.start:last.end],
            tokens=tuple(self.toks[lo:hi_incl + 1]),
            **kw,
        )

    # -- top level ---------------------------------------------------------

    def top_level(self, lo: int, hi: int) -> list[Element]:
        out: list[Element] = []
        i = lo
        while i < hi:
            t = self.toks[i]
            if t.kind == "directive":
                e, i = self._directive(i, hi)
            else:
                e, i = self._external(i, hi)
            out.append(e)
        return out

    def _directive(self, i: int, hi: int) -> tuple[Element, int]:
        t = self.toks[i]
        words = directive_words(t)
        kw = words[0] if words else ""
        arg = words[1] if len(words) > 1 else ""
        if kw == "include":
            if arg.startswith('"') and arg.endswith('"') and len(arg) > 2:
                return self._element(INCLUDE_DIRECTIVE, arg[1:-1], i, i, directive="include"), i + 1
            if arg.startswith("<") and arg.endswith(">"):
                return (
                    self._element(INCLUDE_DIRECTIVE, arg[1:-1], i, i, directive="include", system=True),
                    i + 1,
                )
            raise CSyntaxError(self.path, t.line, 'include target "file" or <file>')
        if kw == "define":
            m = re.match(r"([A-Za-z_]\w*)(\(?)", arg)
            if not m:
                raise CSyntaxError(self.path, t.line, "macro name")
            if m.group(2):
                raise UnsupportedConstruct(self.path, t.line, "macro with arguments")
            name = m.group(1)
            return self._element(CONSTANT_DEFINITION, name, i, i, directive="define", defines=(name,)), i + 1
        if kw in ("ifdef", "ifndef"):
            return self._conditional(i, hi, kw, arg)
        if kw in ("if", "elif"):
            raise UnsupportedConstruct(self.path, t.line, f"#{kw} expression")
        if kw in ("else", "endif"):
            raise UnbalancedDirective(self.path, t.line, f"#{kw} without #ifdef")
        raise UnsupportedConstruct(self.path, t.line, f"#{kw} directive")

    def _conditional(self, i: int, hi: int, kw: str, arg: str) -> tuple[Element, int]:
        t = self.toks[i]
        if not arg or not arg.replace("_", "a").isalnum() or arg[0].isdigit():
            raise UnsupportedConstruct(self.path, t.line, f"#{kw} condition {arg!r}")
        depth = 0
        else_at = None
        for j in range(i + 1, hi):
            d = self.toks[j]
            if d.kind != "directive":
                continue
            w = directive_words(d)
            k = w[0] if w else ""
            if k in ("ifdef", "ifndef", "if"):
                depth += 1
            elif k == "elif" and depth == 0:
                raise UnsupportedConstruct(self.path, d.line, "#elif expression")
            elif k == "else" and depth == 0:
                if else_at is not None:
                    raise UnbalancedDirective(self.path, d.line, "duplicate #else")
                else_at = j
            elif k == "endif":
                if depth == 0:
                    then_hi = else_at if else_at is not None else j
                    kids = self.top_level(i + 1, then_hi)
                    else_kids = self.top_level(else_at + 1, j) if else_at is not None else []
                    e = self._element(
                        CONDITIONAL_BLOCK,
                        arg,
                        i,
                        j,
                        directive=kw,
                        children=tuple(kids),
                        else_children=tuple(else_kids),
                    )
                    return e, j + 1
                depth -= 1
        raise UnbalancedDirective(self.path, t.line, f"#{kw} {arg} without #endif")

    def _external(self, i: int, hi: int) -> tuple[Element, int]:
        lo = i
        t0 = self.toks[i]
        spec = self._specifiers(i, hi, top=True)
        i = spec.end
        if not spec.base and not spec.storage:
            raise CSyntaxError(self.path, t0.line, "a declaration")
        storage = spec.storage
        is_typedef = "typedef" in storage
        is_static = "static" in storage
        t = self._tok(i, hi)
        if t.text == ";" and t.kind == "punct":
            name = spec.tag_names[0] if spec.tag_names else (spec.enumerators[0] if spec.enumerators else None)
            if name is None:
                raise CSyntaxError(self.path, t.line, "a declarator")
            name = name.split(" ", 1)[-1]
            return (
                self._element(
                    TYPE_DEFINITION,
                    name,
                    lo,
                    i,
                    defines=tuple(spec.enumerators),
                    tags=tuple(spec.tag_names),
                    base_type=spec.base,
                ),
                i + 1,
            )
        decls: list[Decl] = []
        first_fn: Signature | None = None
        while True:
            d = self._declarator(i, hi, spec.base)
            i = d.end
            if d.params is not None and not decls and self._tok(i, hi).text == "{":
                header = tuple(self.toks[lo:i])
                sig = Signature(d.name, d.ctype, d.params, d.variadic, is_static, header)
                close = self._match(i, hi)
                body = self._block(i, close)
                e = self._element(
                    FUNCTION_DEFINITION,
                    d.name,
                    lo,
                    close,
                    defines=(d.name,),
                    static=is_static,
                    signature=sig,
                    body=body,
                )
                return e, close + 1
            if d.params is not None and first_fn is None:
                first_fn = Signature(d.name, d.ctype, d.params, d.variadic, is_static, tuple(self.toks[lo:i]))
            init: tuple[Token, ...] = ()
            t = self._tok(i, hi)
            if t.text == "=":
                j = self._skip_initializer(i + 1, hi)
                init = tuple(self.toks[i + 1:j])
                i = j
            decls.append(Decl(d.name, d.ctype, bool(init), init))
            t = self._tok(i, hi)
            if t.text == ",":
                i += 1
                continue
            if t.text == ";":
                break
            raise CSyntaxError(self.path, t.line, "';' or ','")
        names = tuple(d.name for d in decls)
        if is_typedef:
            self.typedefs.update(names)
            return (
                self._element(
                    TYPE_DEFINITION,
                    names[0],
                    lo,
                    i,
                    defines=names + tuple(spec.enumerators),
                    tags=tuple(spec.tag_names),
                    decls=tuple(decls),
                    base_type=str(decls[0].ctype),
                ),
                i + 1,
            )
        if first_fn is not None and len(decls) == 1:
            return (
                self._element(
                    FUNCTION_DECLARATION,
                    first_fn.name,
                    lo,
                    i,
                    defines=(first_fn.name,),
                    static=is_static,
                    signature=first_fn,
                ),
                i + 1,
            )
        if first_fn is not None:
            raise UnsupportedConstruct(self.path, t0.line, "mixed function and variable declarators")
        return (
            self._element(
                GLOBAL_VARIABLE,
                names[0],
                lo,
                i,
                defines=names + tuple(spec.enumerators),
                tags=tuple(spec.tag_names),
                static=is_static,
                decls=tuple(decls),
            ),
            i + 1,
        )

    def _skip_initializer(self, i: int, hi: int) -> int:
        while i < hi:
            t = self.toks[i]
            if t.kind == "punct" and t.text in ("(", "[", "{"):
                i = self._match(i, hi) + 1
                continue
            if t.kind == "punct" and t.text in (",", ";"):
                return i
            if t.kind == "directive":
                raise UnsupportedConstruct(self.path, t.line, "directive inside declaration")
            i += 1
        raise CSyntaxError(self.path, self.toks[hi - 1].line, "';'")

    # -- declarations ------------------------------------------------------

    def _specifiers(self, i: int, hi: int, top: bool = False, param: bool = False) -> "_Spec":
        spec = _Spec()
        base: list[str] = []
        saw_type = False
        while i < hi:
            t = self.toks[i]
            if t.kind == "keyword" and t.text in STORAGE:
                spec.storage.add(t.text)
                i += 1
            elif t.kind == "keyword" and t.text in QUALIFIERS:
                i += 1
            elif t.kind == "keyword" and t.text in ("struct", "union", "enum"):
                kw = t.text
                i += 1
                tag = None
                if i < hi and self.toks[i].kind == "ident":
                    tag = self.toks[i].text
                    i += 1
                if i < hi and self.toks[i].text == "{":
                    close = self._match(i, hi)
                    if kw == "enum":
                        spec.enumerators.extend(self._enumerators(i + 1, close))
                    else:
                        self._check_members(i + 1, close)
                    if tag:
                        spec.tag_names.append(f"{kw} {tag}")
                    i = close + 1
                elif tag is None:
                    raise CSyntaxError(self.path, t.line, f"{kw} tag or body")
                base.append(f"{kw} {tag}" if tag else f"{kw} <anon>")
                saw_type = True
            elif t.kind == "keyword" and t.text in TYPE_KEYWORDS:
                base.append(t.text)
                saw_type = True
                i += 1
            elif t.kind == "ident" and not saw_type and (top or param or self._names_type(i, hi)):
                base.append(t.text)
                saw_type = True
                i += 1
            else:
                break
        spec.base = " ".join(base)
        spec.end = i
        return spec

    def _names_type(self, i: int, hi: int) -> bool:
        t = self.toks[i]
        if t.text in self.typedefs:
            nxt = self.toks[i + 1] if i + 1 < hi else None
            return nxt is None or nxt.text not in ("=", "(", ".", "->", "[", ")", ";", "++", "--", ",")
        if i + 1 >= hi:
            return False
        nxt = self.toks[i + 1]
        if nxt.kind == "ident":
            return True
        if nxt.text == "*":
            j = i + 1
            while j < hi and self.toks[j].text == "*":
                j += 1
            return (
                j + 1 < hi
                and self.toks[j].kind == "ident"
                and self.toks[j + 1].text in ("=", ";", ",", "[")
            )
        return False

    def _enumerators(self, lo: int, hi: int) -> list[str]:
        names = []
        expect_name = True
        depth = 0
        for j in range(lo, hi):
            t = self.toks[j]
            if t.text in ("(", "["):
                depth += 1
            elif t.text in (")", "]"):
                depth -= 1
            elif t.text == "," and depth == 0:
                expect_name = True
            elif expect_name and t.kind == "ident":
                names.append(t.text)
                expect_name = False
        return names

    def _check_members(self, lo: int, hi: int) -> None:
        for j in range(lo, hi - 2):
            a, b = self.toks[j], self.toks[j + 1]
            if a.text == "(" and b.text == "*" and a.kind == "punct":
                raise UnsupportedConstruct(self.path, a.line, "function pointer")
            if a.kind == "directive":
                raise UnsupportedConstruct(self.path, a.line, "directive inside struct")

    def _declarator(self, i: int, hi: int, base: str, abstract: bool = False) -> "_Declarator":
        ptr = 0
        while i < hi and (self.toks[i].text == "*" or self.toks[i].text in QUALIFIERS):
            if self.toks[i].text == "*":
                ptr += 1
            i += 1
        t = self._tok(i, hi)
        name = None
        if t.text == "(" and t.kind == "punct":
            nxt = self.toks[i + 1] if i + 1 < hi else None
            if nxt is not None and nxt.text in ("*", "^"):
                raise UnsupportedConstruct(self.path, t.line, "function pointer")
            if not abstract:
                raise UnsupportedConstruct(self.path, t.line, "parenthesized declarator")
        if t.kind == "ident":
            name = t.text
            i += 1
        elif not abstract:
            raise CSyntaxError(self.path, t.line, "an identifier")
        arrays = 0
        params = None
        variadic = False
        while i < hi and self.toks[i].kind == "punct" and self.toks[i].text in ("[", "("):
            close = self._match(i, hi)
            if self.toks[i].text == "[":
                arrays += 1
            else:
                if params is not None:
                    raise UnsupportedConstruct(self.path, self.toks[i].line, "function returning function")
                params, variadic = self._params(i + 1, close)
            i = close + 1
        d = _Declarator()
        d.name = name
        d.ctype = CType(base, ptr, arrays)
        d.params = params
        d.variadic = variadic
        d.end = i
        return d

    def _params(self, lo: int, hi: int) -> tuple[tuple[Decl, ...], bool]:
        groups: list[tuple[int, int]] = []
        depth = 0
        start = lo
        for j in range(lo, hi):
            t = self.toks[j]
            if t.text in ("(", "[", "{"):
                depth += 1
            elif t.text in (")", "]", "}"):
                depth -= 1
            elif t.text == "," and depth == 0:
                groups.append((start, j))
                start = j + 1
        if start < hi:
            groups.append((start, hi))
        params: list[Decl] = []
        variadic = False
        for a, b in groups:
            for j in range(a, b - 1):
                if self.toks[j].text == "(" and self.toks[j + 1].text == "*":
                    raise UnsupportedConstruct(self.path, self.toks[j].line, "function pointer")
            if b - a == 1 and self.toks[a].text == "...":
                variadic = True
                continue
            if b - a == 1 and self.toks[a].text == "void":
                continue
            spec = self._specifiers(a, b, param=True)
            if not spec.base:
                raise CSyntaxError(self.path, self.toks[a].line, "a parameter type")
            d = self._declarator(spec.end, b, spec.base, abstract=True)
            if d.end != b:
                raise CSyntaxError(self.path, self.toks[d.end].line, "',' or ')'")
            ctype = d.ctype
            if ctype.arrays:
                ctype = CType(ctype.base, ctype.pointers + 1, 0)
            params.append(Decl(d.name or "", ctype))
        return tuple(params), variadic

    # -- statements --------------------------------------------------------

    def _stmt_node(self, kind: str, lo: int, hi_incl: int, **kw) -> Stmt:
        a, b = self.toks[lo], self.toks[hi_incl]
        return Stmt(
            kind=kind,
            start=a.start,
            end=b.end,
            line=a.line,
            end_line=b.end_line,
            tokens=tuple(self.toks[lo:hi_incl + 1]),
            **kw,
        )

    def _block(self, lo: int, close: int) -> Stmt:
        children = []
        i = lo + 1
        while i < close:
            s, i = self._statement(i, close)
            children.append(s)
        return self._stmt_node("block", lo, close, children=tuple(children))

    def _until_semicolon(self, i: int, hi: int) -> int:
        while i < hi:
            t = self.toks[i]
            if t.kind == "punct" and t.text in ("(", "[", "{"):
                i = self._match(i, hi) + 1
                continue
            if t.kind == "punct" and t.text == ";":
                return i
            if t.kind == "directive":
                break
            i += 1
        raise CSyntaxError(self.path, self.toks[min(i, hi) - 1].line, "';'")

    def _paren_head(self, i: int, hi: int) -> tuple[int, tuple[Token, ...]]:
        if self._tok(i, hi).text != "(":
            raise CSyntaxError(self.path, self.toks[i].line, "'('")
        close = self._match(i, hi)
        return close, tuple(self.toks[i + 1:close])

    def _statement(self, i: int, hi: int) -> tuple[Stmt, int]:
        t = self._tok(i, hi)
        x = t.text
        if t.kind == "directive":
            return self._stmt_node("directive", i, i), i + 1
        if t.kind == "punct" and x == "{":
            close = self._match(i, hi)
            return self._block(i, close), close + 1
        if t.kind == "punct" and x == ";":
            return self._stmt_node("empty", i, i), i + 1
        if t.kind == "keyword":
            if x == "if":
                close, head = self._paren_head(i + 1, hi)
                then, j = self._statement(close + 1, hi)
                kids = [then]
                if j < hi and self.toks[j].text == "else" and self.toks[j].kind == "keyword":
                    other, j = self._statement(j + 1, hi)
                    kids.append(other)
                return self._stmt_node("if", i, j - 1, children=tuple(kids), head=head), j
            if x in ("while", "switch"):
                close, head = self._paren_head(i + 1, hi)
                body, j = self._statement(close + 1, hi)
                return self._stmt_node(x, i, j - 1, children=(body,), head=head), j
            if x == "for":
                close, head = self._paren_head(i + 1, hi)
                decls: tuple[Decl, ...] = ()
                if head and self._looks_like_decl(i + 2, close):
                    semi = i + 2
                    while semi < close and self.toks[semi].text != ";":
                        semi += 1
                    decls = self._decl_list(i + 2, semi + 1)[0]
                body, j = self._statement(close + 1, hi)
                return self._stmt_node("for", i, j - 1, children=(body,), head=head, decls=decls), j
            if x == "do":
                body, j = self._statement(i + 1, hi)
                if self._tok(j, hi).text != "while":
                    raise CSyntaxError(self.path, self.toks[j].line, "'while'")
                close, head = self._paren_head(j + 1, hi)
                end = self._expect(close + 1, hi, ";")
                return self._stmt_node("do", i, end - 1, children=(body,), head=head), end
            if x in ("case", "default"):
                j = i + 1
                depth = 0
                while j < hi:
                    tj = self.toks[j]
                    if tj.text == "?":
                        depth += 1
                    elif tj.text == ":":
                        if depth == 0:
                            break
                        depth -= 1
                    j += 1
                if j >= hi:
                    raise CSyntaxError(self.path, t.line, "':'")
                return self._stmt_node(x, i, j, head=tuple(self.toks[i + 1:j])), j + 1
            if x == "return":
                end = self._until_semicolon(i + 1, hi)
                return self._stmt_node("return", i, end), end + 1
            if x in ("break", "continue"):
                end = self._expect(i + 1, hi, ";")
                return self._stmt_node(x, i, end - 1), end
            if x == "goto":
                raise UnsupportedConstruct(self.path, t.line, "goto")
        if t.kind == "ident" and i + 1 < hi and self.toks[i + 1].text == ":":
            raise UnsupportedConstruct(self.path, t.line, "label")
        if self._looks_like_decl(i, hi):
            decls, end = self._decl_list(i, hi)
            return self._stmt_node("decl", i, end, decls=decls), end + 1
        end = self._until_semicolon(i, hi)
        return self._stmt_node("expr", i, end), end + 1

    def _looks_like_decl(self, i: int, hi: int) -> bool:
        t = self.toks[i]
        if t.kind == "keyword" and (t.text in STORAGE or t.text in QUALIFIERS or t.text in TYPE_KEYWORDS):
            return True
        return t.kind == "ident" and self._names_type(i, hi)

    def _decl_list(self, i: int, hi: int) -> tuple[tuple[Decl, ...], int]:
        spec = self._specifiers(i, hi)
        if "typedef" in spec.storage:
            raise UnsupportedConstruct(self.path, self.toks[i].line, "local typedef")
        j = spec.end
        decls = []
        if self._tok(j, hi).text == ";":
            return (), j
        while True:
            d = self._declarator(j, hi, spec.base)
            j = d.end
            if d.params is not None:
                raise UnsupportedConstruct(self.path, self.toks[i].line, "local function declaration")
            init: tuple[Token, ...] = ()
            if self._tok(j, hi).text == "=":
                k = self._skip_initializer(j + 1, hi)
                init = tuple(self.toks[j + 1:k])
                j = k
            decls.append(Decl(d.name, d.ctype, bool(init), init))
            t = self._tok(j, hi)
            if t.text == ",":
                j += 1
                continue
            if t.text == ";":
                return tuple(decls), j
            raise CSyntaxError(self.path, t.line, "';' or ','")


class _Spec:
    def __init__(self) -> None:
        self.storage: set[str] = set()
        self.base = ""
        self.tag_names: list[str] = []
        self.enumerators: list[str] = []
        self.end = 0


class _Declarator:
    name: str | None
    ctype: CType
    params: tuple[Decl, ...] | None
    variadic: bool
    end: int
