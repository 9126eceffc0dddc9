"""The insertion point in a product base and what is in scope there."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..build import DEFAULT_BUILD
from ..depgraph import Scope
from ..errors import MarkerAmbiguous, MarkerNotFound
from ..frontend import FUNCTION_DEFINITION, GLOBAL_VARIABLE, TYPE_DEFINITION, CType, Element, ProjectModel, Stmt

MARKER_RE = re.compile(r"/\*@transplant:([A-Za-z_][\w-]*)\*/")


def marker(feature_id: str) -> str:
    return f"/*@transplant:{feature_id}*/"


@dataclass(frozen=True)
class HostVariable:
    name: str
    ctype: str  # declared spelling after array decay
    resolved: str  # after typedef resolution, used for compatibility
    origin: str  # param | local | global


@dataclass
class HostContext:
    product_base_id: str
    file: str
    marker_id: str
    function: str
    visible_variables: list[HostVariable]
    build_command: str = DEFAULT_BUILD
    offset: int = 0
    typedefs: dict[str, str] = field(default_factory=dict)

    @property
    def insertion_point(self) -> tuple[str, str, str]:
        return (self.file, self.marker_id, self.function)

    def compatible(self, ctype: str) -> list[HostVariable]:
        want = resolve_type(ctype, self.typedefs)
        return [v for v in self.visible_variables if v.resolved == want]


def find_markers(project: ProjectModel, feature_id: str | None = None) -> list[tuple[str, int, str]]:
    hits = []
    for u in project.units:
        for m in MARKER_RE.finditer(u.text):
            if feature_id is None or m.group(1) == feature_id:
                hits.append((u.path, m.start(), m.group(1)))
    return hits


def typedef_map(project: ProjectModel) -> dict[str, str]:
    out = {}
    for e in project.elements():
        if e.kind == TYPE_DEFINITION and e.decls:
            for d in e.decls:
                out[d.name] = d.ctype.decayed
    return out


def resolve_type(spelling: str, typedefs: dict[str, str]) -> str:
    """Canonical type name: typedefs expanded, ``*`` counted, spacing fixed."""
    base = spelling.replace("*", " ").split()
    stars = spelling.count("*")
    for _ in range(16):
        name = " ".join(base)
        if name in typedefs:
            inner = typedefs[name]
            stars += inner.count("*")
            base = inner.replace("*", " ").split()
        else:
            break
    words = " ".join(base)
    return words + (" " + "*" * stars if stars else "")


def host_context(
    project: ProjectModel,
    feature_id: str | None = None,
    product_base_id: str = "host",
    build_command: str = DEFAULT_BUILD,
    target_file: str | None = None,
) -> HostContext:
    """Locate the single marker for ``feature_id`` and collect the variables
    in scope at it."""
    hits = find_markers(project, feature_id)
    if target_file is not None:
        hits = [h for h in hits if h[0] == target_file] or hits
    if not hits:
        raise MarkerNotFound(f"no insertion marker {marker(feature_id or '<id>')} in host")
    if len(hits) > 1:
        where = ", ".join(f"{p}@{o}" for p, o, _ in hits)
        raise MarkerAmbiguous(f"insertion marker found {len(hits)} times: {where}")
    path, offset, fid = hits[0]
    fn = enclosing_function(project, path, offset)
    if fn is None:
        raise MarkerNotFound(f"marker in {path} is not inside a function body")
    typedefs = typedef_map(project)
    variables = _visible(project, fn, offset, typedefs)
    return HostContext(product_base_id, path, fid, fn.name, variables, build_command, offset, typedefs)


def enclosing_function(project: ProjectModel, path: str, offset: int) -> Element | None:
    for e in project.ast(path).flat():
        if e.kind == FUNCTION_DEFINITION and e.body is not None and e.body.start < offset < e.body.end:
            return e
    return None


def _var(name: str, ctype: CType, origin: str, typedefs) -> HostVariable:
    spelled = ctype.decayed
    return HostVariable(name, spelled, resolve_type(spelled, typedefs), origin)


def _visible(project: ProjectModel, fn: Element, offset: int, typedefs) -> list[HostVariable]:
    found: dict[str, HostVariable] = {}
    scope = Scope(project)
    for f in reversed(scope.visible_files(fn.file)):
        for e in project.ast(f).flat():
            if e.kind == GLOBAL_VARIABLE and (f != fn.file or e.end < fn.start):
                for d in e.decls:
                    found[d.name] = _var(d.name, d.ctype, "global", typedefs)
    for p in fn.signature.params:
        if p.name:
            found[p.name] = _var(p.name, p.ctype, "param", typedefs)

    def walk(s: Stmt) -> None:
        for d in s.decls:  # for-loop declarations
            found[d.name] = _var(d.name, d.ctype, "local", typedefs)
        for c in s.children:
            if c.end <= offset:
                for d in c.decls:
                    found[d.name] = _var(d.name, d.ctype, "local", typedefs)
            elif c.start < offset:
                walk(c)
                return

    walk(fn.body)
    return sorted(found.values(), key=lambda v: v.name)
