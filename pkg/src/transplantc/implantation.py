"""Clone-aware implantation of an organ into a product base.

Every organ element is compared with the host elements that could collide
with it: first line by line (whitespace-insensitive, comment-sensitive), then
on the normalized syntax. Equal elements are discarded, same-signature
functions with different bodies are merged under a feature guard, and the
rest are grafted at the end of the host file with the organ's path.
"""

from __future__ import annotations

import difflib
import json
import os
import shutil
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .adaptation.host import HostContext, enclosing_function, find_markers
from .adaptation.wrapper import RenderedWrapper, wrapper_preamble
from .build import DEFAULT_BUILD, build_tree
from .depgraph import Scope
from .errors import BuildFailedAfterImplant, SignatureConflict
from .frontend import (
    CONDITIONAL_BLOCK,
    CONSTANT_DEFINITION,
    FUNCTION_DECLARATION,
    FUNCTION_DEFINITION,
    GLOBAL_VARIABLE,
    INCLUDE_DIRECTIVE,
    TYPE_DEFINITION,
    Element,
    ProjectModel,
    append_text,
    line_key,
    normalize,
)

GRAFT, DISCARD, MERGE = "graft", "discard", "merge"


@dataclass(frozen=True)
class CloneDecision:
    file: str
    key: str
    verdict: str
    phase: str  # line | ast
    host_file: str | None = None
    host_key: str | None = None
    diff: tuple[str, ...] = ()


@dataclass
class CloneReport:
    decisions: list[CloneDecision]
    connection_points: list[str] = field(default_factory=list)

    def verdicts(self) -> dict[tuple[str, str], str]:
        return {(d.file, d.key): d.verdict for d in self.decisions}

    def to_json(self) -> dict:
        return {
            "decisions": [asdict(d) | {"diff": list(d.diff)} for d in self.decisions],
            "connectionPoints": list(self.connection_points),
        }


@dataclass
class PostoperativeProject:
    project: ProjectModel
    implant_log: list[tuple[str, CloneReport, str | None]] = field(default_factory=list)


def feature_macro(flag: str) -> str:
    return "FEATURE_" + "".join(c if c.isalnum() else "_" for c in flag).upper()


# -- clone detection -----------------------------------------------------------


def _identity(e: Element) -> tuple[str, frozenset[str]]:
    if e.kind == FUNCTION_DEFINITION:
        return "function", frozenset([e.name])
    if e.kind == FUNCTION_DECLARATION:
        return "prototype", frozenset([e.name])
    if e.kind == GLOBAL_VARIABLE:
        return "global", frozenset(d.name for d in e.decls)
    if e.kind == TYPE_DEFINITION:
        return "type", frozenset(e.defines) | frozenset(e.tags)
    if e.kind == CONSTANT_DEFINITION:
        return "constant", frozenset([e.name])
    if e.kind == INCLUDE_DIRECTIVE:
        return "include", frozenset([("<" if e.system else '"') + e.name])
    return e.kind, frozenset([e.name or ""])


def _linker_scope(e: Element) -> bool:
    if e.kind == FUNCTION_DEFINITION:
        return not e.static
    if e.kind == GLOBAL_VARIABLE:
        return not e.static and not e.text.lstrip().startswith("extern")
    return False


def _candidates(e: Element, dest: str, host: ProjectModel, scope: Scope) -> list[Element]:
    cls, names = _identity(e)
    if _linker_scope(e):
        pool = host.elements()
    elif e.kind in (FUNCTION_DEFINITION, GLOBAL_VARIABLE) and e.static:
        pool = host.ast(dest).flat() if host.has(dest) else []
    else:
        files = scope.visible_files(dest) if host.has(dest) else []
        pool = [x for f in files for x in host.ast(f).flat()]
    related = {"function", "prototype", "global"}
    out = []
    for h in pool:
        if h.kind == CONDITIONAL_BLOCK or not (_identity(h)[1] & names):
            continue
        if h.static and h.file != dest:
            continue
        hcls = _identity(h)[0]
        if hcls == cls or (cls in related and hcls in related and cls != "global"):
            out.append(h)
    return out


def _body_diff(a: Element, b: Element) -> tuple[str, ...]:
    la = normalize(a).splitlines()
    lb = normalize(b).splitlines()
    return tuple(
        ln for ln in difflib.unified_diff(lb, la, "host", "organ", n=0, lineterm="") if not ln.startswith(("---", "+++"))
    )


def detect_clones(organ: ProjectModel, host: ProjectModel) -> CloneReport:
    """Decide graft, discard or merge for every top-level organ element."""
    scope = Scope(host)
    decisions: list[CloneDecision] = []
    shared: list[str] = []
    for path in organ.paths:
        for e in organ.ast(path).flat():
            if e.kind == CONDITIONAL_BLOCK:
                continue
            cands = _candidates(e, path, host, scope)
            same_kind = [h for h in cands if h.kind == e.kind]
            key = line_key(e.text)
            hit = next((h for h in same_kind if line_key(h.text) == key), None)
            if hit is not None:
                decisions.append(CloneDecision(path, e.key, DISCARD, "line", hit.file, hit.key))
                shared.append(f"{hit.file}:{hit.key}")
                continue
            norm = normalize(e)
            hit = next((h for h in same_kind if normalize(h) == norm), None)
            if hit is not None:
                decisions.append(CloneDecision(path, e.key, DISCARD, "ast", hit.file, hit.key))
                shared.append(f"{hit.file}:{hit.key}")
                continue
            if not cands:
                decisions.append(CloneDecision(path, e.key, GRAFT, "ast"))
                continue
            decisions.append(_resolve_same_name(e, path, cands))
            if decisions[-1].verdict != GRAFT:
                shared.append(f"{decisions[-1].host_file}:{decisions[-1].host_key}")
    return CloneReport(decisions, sorted(set(shared)))


def _resolve_same_name(e: Element, path: str, cands: list[Element]) -> CloneDecision:
    name = e.name or e.key
    for h in cands:
        if h.kind != e.kind:
            # a prototype next to a definition, or a name reused for another kind
            if {e.kind, h.kind} == {FUNCTION_DEFINITION, FUNCTION_DECLARATION}:
                if e.signature.key() != h.signature.key():
                    raise SignatureConflict(name, f"{h.file}:{h.line} declares a different signature")
                continue
            raise SignatureConflict(name, f"{h.file}:{h.line} defines it as a {h.kind}")
        if e.kind in (FUNCTION_DEFINITION, FUNCTION_DECLARATION):
            if e.signature.key() != h.signature.key():
                raise SignatureConflict(name, f"{h.file}:{h.line} has a different signature")
            if e.kind == FUNCTION_DECLARATION:
                return CloneDecision(path, e.key, DISCARD, "ast", h.file, h.key)
            return CloneDecision(path, e.key, MERGE, "ast", h.file, h.key, _body_diff(e, h))
        if e.kind == INCLUDE_DIRECTIVE:
            return CloneDecision(path, e.key, DISCARD, "ast", h.file, h.key)
        raise SignatureConflict(name, f"{h.file}:{h.line} defines it differently")
    # only compatible prototypes matched a definition: the definition is new
    return CloneDecision(path, e.key, GRAFT, "ast")


# -- applying the decisions ----------------------------------------------------


def _guard(text: str, macro: str | None) -> str:
    if macro is None:
        return text
    return f"#ifdef {macro}\n{text.rstrip()}\n#endif"


def _find_host(host: ProjectModel, file: str, key: str) -> Element:
    return host.ast(file).find(key)


def _guard_block(host: ProjectModel, el: Element) -> Element | None:
    """The conditional block directly holding ``el``, when there is one."""
    for top in host.ast(el.file).elements:
        if top.kind == CONDITIONAL_BLOCK:
            for c in top.walk():
                if c.kind == CONDITIONAL_BLOCK and any(k.start == el.start for k in c.children + c.else_children):
                    return c
    return None


def _apply_edits(text: str, edits: list[tuple[int, int, str]]) -> str:
    for start, end, new in sorted(edits, key=lambda x: (x[0], x[1]), reverse=True):
        text = text[:start] + new + text[end:]
    return text


def _line_bounds(text: str, start: int, end: int) -> tuple[int, int]:
    ls = text.rfind("\n", 0, start) + 1
    le = text.find("\n", end)
    return ls, (len(text) if le < 0 else le)


def implant_texts(
    host: ProjectModel,
    organ_project: ProjectModel,
    feature_id: str,
    ctx: HostContext | None,
    wrapper: RenderedWrapper | None,
    flag: str | None = None,
    report: CloneReport | None = None,
) -> tuple[ProjectModel, CloneReport]:
    """Pure implantation: returns the new host model and the clone report."""
    report = report or detect_clones(organ_project, host)
    macro = feature_macro(flag) if flag else None
    merge_macro = macro or feature_macro(feature_id)
    edits: dict[str, list[tuple[int, int, str]]] = {}
    appends: dict[str, list[str]] = {}
    hoisted: set[tuple[str, int]] = set()

    for d in report.decisions:
        el = organ_project.ast(d.file).find(d.key)
        if d.verdict == GRAFT:
            appends.setdefault(d.file, []).append(_guard(el.text, macro))
        elif d.verdict == DISCARD:
            h = _find_host(host, d.host_file, d.host_key)
            block = _guard_block(host, h)
            if (
                block is not None
                and block.name.startswith("FEATURE_")
                and block.name != macro
                and not block.else_children
                and len(block.children) == 1
                and (block.file, block.start) not in hoisted
            ):
                hoisted.add((block.file, block.start))
                text = host.text(block.file)
                ls, le = _line_bounds(text, block.start, block.end)
                edits.setdefault(block.file, []).append((ls, min(le + 1, len(text)), h.text + "\n"))
        elif d.verdict == MERGE:
            h = _find_host(host, d.host_file, d.host_key)
            merged = f"#ifdef {merge_macro}\n{el.text}\n#else\n{h.text}\n#endif"
            edits.setdefault(h.file, []).append((h.start, h.end, merged))

    target = ctx.file if ctx is not None else None
    if ctx is not None and wrapper is not None:
        text = host.text(target)
        hits = [h for h in find_markers(host, ctx.marker_id) if h[0] == target]
        offset = hits[0][1]
        mtext = f"/*@transplant:{ctx.marker_id}*/"
        ls, le = _line_bounds(text, offset, offset + len(mtext))
        line = text[ls:le]
        indent = line[: len(line) - len(line.lstrip())]
        alone = line.strip() == mtext
        call = indent + wrapper.call_site if alone else wrapper.call_site
        if macro is not None:
            call = f"#ifdef {macro}\n{indent}{wrapper.call_site}\n#endif"
            if not alone:
                call = "\n" + call + "\n"
        if alone:
            edits.setdefault(target, []).append((ls, le, call))
        else:
            edits.setdefault(target, []).append((offset, offset + len(mtext), call))
        fn = enclosing_function(host, target, offset)
        proto_at = text.rfind("\n", 0, fn.start) + 1
        edits.setdefault(target, []).append((proto_at, proto_at, _guard(wrapper.prototype, macro) + "\n\n"))

    changes: dict[str, str] = {}
    for path in sorted(set(edits) | set(appends)):
        text = host.text(path) if host.has(path) else ""
        text = _apply_edits(text, edits.get(path, []))
        for chunk in appends.get(path, []):
            text = append_text(text, chunk)
        changes[path] = text
    result = host.with_texts(changes) if changes else host

    if ctx is not None and wrapper is not None:
        pre = wrapper_preamble(organ_project, result, target, wrapper.function)
        chunk = (pre + "\n\n" if pre else "") + wrapper.function
        text = append_text(result.text(target), _guard(chunk, macro))
        result = result.with_texts({target: text})
    return result, report


def implant(
    host: ProjectModel,
    organ_project: ProjectModel,
    feature_id: str,
    ctx: HostContext | None,
    wrapper: RenderedWrapper | None,
    flag: str | None = None,
    build_command: str | None = DEFAULT_BUILD,
    previous: PostoperativeProject | None = None,
) -> PostoperativeProject:
    """Implant and, unless ``build_command`` is None, prove the result builds
    (in both flag states when a flag is given). On failure nothing changes
    and ``BuildFailedAfterImplant`` is raised."""
    result, report = implant_texts(host, organ_project, feature_id, ctx, wrapper, flag)
    if build_command is not None:
        states = [[feature_macro(flag)], []] if flag else [[]]
        for defines in states:
            with tempfile.TemporaryDirectory(prefix="tc-implant-") as tmp:
                result.write(tmp)
                b = build_tree(tmp, build_command, defines=defines)
                if not b.ok:
                    raise BuildFailedAfterImplant(b.log)
    log = list(previous.implant_log) if previous is not None else []
    log.append((feature_id, report, flag))
    return PostoperativeProject(result, log)


def write_project(project: ProjectModel, root: str | os.PathLike) -> None:
    """Write a project tree atomically: build beside it, then swap in."""
    root = Path(root)
    root.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".tc-write-", dir=root.parent))
    project.write(tmp)
    if root.exists():
        old = Path(tempfile.mkdtemp(prefix=".tc-old-", dir=root.parent))
        old.rmdir()
        root.rename(old)
        tmp.rename(root)
        shutil.rmtree(old)
    else:
        tmp.rename(root)


def report_json(report: CloneReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"


def definition_count(project: ProjectModel, name: str) -> int:
    """Number of function or global definitions named ``name`` in the sources."""
    n = 0
    for e in project.elements():
        if e.kind == FUNCTION_DEFINITION and e.name == name:
            n += 1
        elif e.kind == GLOBAL_VARIABLE and not e.text.lstrip().startswith("extern") and name in e.defines:
            n += 1
    return n
