"""Tokenizer for the supported C subset.

Comments and whitespace never become tokens unless ``keep_comments`` is set;
the text between two tokens is the trivia that the printer re-emits verbatim.
Preprocessor lines become a single ``directive`` token spanning the logical
line (backslash continuations included, trailing newline excluded).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import CSyntaxError

KEYWORDS = frozenset(
    """auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Bool""".split()
)

TYPE_KEYWORDS = frozenset(
    "void char short int long float double signed unsigned _Bool struct union enum".split()
)
QUALIFIERS = frozenset("const volatile restrict".split())
STORAGE = frozenset("static extern auto register typedef inline".split())

PUNCTUATORS = sorted(
    """... <<= >>= -> ++ -- << >> <= >= == != && || += -= *= /= %= &= ^= |= ##
    [ ] ( ) { } . & * + - ~ ! / % < > ^ | ? : ; = , #""".split(),
    key=len,
    reverse=True,
)

ASSIGN_OPS = frozenset("= += -= *= /= %= &= ^= |= <<= >>=".split())

_IDENT = re.compile(r"[A-Za-z_]\w*")
_NUMBER = re.compile(r"\.?\d(?:[eEpP][+-]|[\w.])*")
_WS = re.compile(r"[ \t\f\v\n]+")
_PUNCT = re.compile("|".join(re.escape(p) for p in PUNCTUATORS))


@dataclass(frozen=True)
class Token:
    kind: str  # ident | keyword | number | char | string | punct | directive | comment
    text: str
    start: int
    end: int
    line: int
    end_line: int

    def is_(self, text: str) -> bool:
        return self.text == text and self.kind in ("punct", "keyword")


def _line_start(text: str, pos: int) -> bool:
    j = pos - 1
    while j >= 0 and text[j] in " \t":
        j -= 1
    return j < 0 or text[j] == "\n"


def tokenize(text: str, file: str = "<input>", keep_comments: bool = False) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    n = len(text)
    while pos < n:
        ch = text[pos]
        m = _WS.match(text, pos)
        if m:
            line += m.group().count("\n")
            pos = m.end()
            continue
        start, start_line = pos, line
        if ch == "/" and text.startswith("/*", pos):
            end = text.find("*/", pos + 2)
            if end < 0:
                raise CSyntaxError(file, line, "end of comment '*/'")
            pos = end + 2
            line += text.count("\n", start, pos)
            if keep_comments:
                tokens.append(Token("comment", text[start:pos], start, pos, start_line, line))
            continue
        if ch == "/" and text.startswith("//", pos):
            end = text.find("\n", pos)
            pos = n if end < 0 else end
            if keep_comments:
                tokens.append(Token("comment", text[start:pos], start, pos, start_line, line))
            continue
        if ch == "#" and _line_start(text, pos):
            end = pos
            while True:
                nl = text.find("\n", end)
                if nl < 0:
                    end = n
                    break
                # block comments may span lines inside a directive
                cstart = text.find("/*", end, nl)
                if cstart >= 0:
                    cend = text.find("*/", cstart + 2)
                    if cend < 0:
                        raise CSyntaxError(file, line, "end of comment '*/'")
                    if cend > nl:
                        end = cend + 2
                        continue
                if nl > 0 and text[nl - 1] == "\\":
                    end = nl + 1
                    continue
                end = nl
                break
            pos = end
            line += text.count("\n", start, pos)
            tokens.append(Token("directive", text[start:pos], start, pos, start_line, line))
            continue
        if ch == '"' or ch == "'":
            j = pos + 1
            while j < n and text[j] != ch:
                if text[j] == "\\":
                    j += 1
                elif text[j] == "\n":
                    break
                j += 1
            if j >= n or text[j] != ch:
                raise CSyntaxError(file, line, f"closing {ch}")
            pos = j + 1
            kind = "string" if ch == '"' else "char"
            tokens.append(Token(kind, text[start:pos], start, pos, line, line))
            continue
        m = _IDENT.match(text, pos)
        if m:
            word = m.group()
            kind = "keyword" if word in KEYWORDS else "ident"
            pos = m.end()
            tokens.append(Token(kind, word, start, pos, line, line))
            continue
        m = _NUMBER.match(text, pos)
        if m:
            pos = m.end()
            tokens.append(Token("number", m.group(), start, pos, line, line))
            continue
        m = _PUNCT.match(text, pos)
        if m is None:
            raise CSyntaxError(file, line, f"a token, found {ch!r}")
        pos = m.end()
        tokens.append(Token("punct", m.group(), start, pos, line, line))
    return tokens


def directive_words(token: Token) -> list[str]:
    """Split a directive token into words, dropping comments and continuations."""
    body = re.sub(r"/\*.*?\*/", " ", token.text, flags=re.S)
    body = re.sub(r"//.*", "", body)
    body = body.replace("\\\n", " ").strip()
    assert body.startswith("#")
    rest = body[1:].strip()
    if not rest:
        return []
    m = re.match(r"(\w+)\s*(.*)", rest, re.S)
    if not m:
        return [rest]
    keyword, tail = m.groups()
    return [keyword] + ([tail.strip()] if tail.strip() else [])
