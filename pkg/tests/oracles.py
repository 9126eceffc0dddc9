"""Reference models used to compute expected outputs independently of C code."""

from __future__ import annotations

import re

MAXLINES = 64


def checksum(text: str) -> int:
    h = 7
    for b in text.encode():
        h = (h * 31 + b) % 65521
    return h


def checksum_line(name: str, width: int = 8) -> str:
    return f"checksum {name} {checksum(name):>{width}}\n"


def _atoi(s: str) -> int:
    m = re.match(r"\s*([+-]?\d+)", s)
    return int(m.group(1)) if m else 0


def editor(stdin: str, with_sum: bool) -> str:
    """Model of the bundled line editor host; ``with_sum`` models the product
    after the checksum feature has been transplanted."""
    lines: list[str] = []
    out: list[str] = []

    def index(arg: str) -> int:
        n = _atoi(arg)
        return n - 1 if 1 <= n <= len(lines) else -1

    for raw in stdin.splitlines():
        cmd, sep, arg = raw.partition(" ")
        if cmd == ":a":
            if len(lines) == MAXLINES:
                out.append("full\n")
            else:
                lines.append(arg)
        elif cmd == ":p":
            out.extend(f"{i + 1}: {s}\n" for i, s in enumerate(lines))
        elif cmd in (":d", ":u", ":r"):
            k = index(arg)
            if k < 0:
                out.append("?\n")
            elif cmd == ":d":
                del lines[k]
            elif cmd == ":u":
                lines[k] = "".join(c.upper() if c.isascii() else c for c in lines[k])
            else:
                lines[k] = lines[k][::-1]
        elif cmd == ":n":
            out.append(f"{len(lines)}\n")
        elif cmd == ":sum":
            if with_sum:
                out.append(checksum_line(arg))
        elif cmd == ":q":
            break
        else:
            out.append("?\n")
    return "".join(out)


def feature_violations(features, cross, selected) -> set:
    """Every constraint ``selected`` breaks, straight from the definitions of
    a feature tree. ``features`` are (id, parent, kind) triples and ``cross``
    are (kind, a, b) triples."""
    sel = set(selected)
    bad = set()
    for fid, parent, kind in features:
        if parent is None:
            continue
        if fid in sel and parent not in sel:
            bad.add(("parent", (fid, parent)))
        if kind == "mandatory" and parent in sel and fid not in sel:
            bad.add(("mandatory", (parent, fid)))
    for fid, _, _ in features:
        alts = [c for c, p, k in features if p == fid and k == "alternative" and c in sel]
        if len(alts) > 1:
            bad.add(("alternative", (fid, *alts)))
    for kind, a, b in cross:
        if kind == "requires" and a in sel and b not in sel:
            bad.add(("requires", (a, b)))
        if kind == "excludes" and a in sel and b in sel:
            bad.add(("excludes", (a, b)))
    return bad


def random_feature_model(rng, max_features: int = 10):
    """(features, cross) for a random tree of at most ``max_features``."""
    n = rng.randint(1, max_features)
    ids = [f"f{i}" for i in range(n)]
    feats = [(ids[0], None, "mandatory")]
    for i in range(1, n):
        feats.append((ids[i], ids[rng.randrange(i)], rng.choice(["mandatory", "optional", "alternative"])))
    cross = []
    if n > 1:
        for _ in range(rng.randint(0, 3)):
            a, b = rng.sample(ids, 2)
            cross.append((rng.choice(["requires", "excludes"]), a, b))
    return feats, cross
