"""Cross-file system dependency graph and the forward/backward slices over it.

Node ids are assigned in (file, offset) order so two builds of the same
project agree exactly. Boundary nodes stand for libc symbols and are never
part of a slice.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from . import libc
from .errors import NoPathFromMain, UnknownEntryPoint, UnresolvedSymbol
from .frontend import (
    CONSTANT_DEFINITION,
    FUNCTION_DECLARATION,
    FUNCTION_DEFINITION,
    GLOBAL_VARIABLE,
    INCLUDE_DIRECTIVE,
    TYPE_DEFINITION,
    Element,
    ProjectModel,
    Stmt,
)
from .symbols import element_uses, has_return, identifier_uses, local_names, stmt_uses, stmt_writes

EDGE_KINDS = ("call", "data", "control", "declares", "includes")
SLICE_KINDS = frozenset({"call", "data", "declares"})


@dataclass(frozen=True)
class SdgNode:
    id: int
    file: str
    name: str | None
    kind: str  # element kind, "statement" or "boundary"
    key: str
    statement_index: int | None = None

    @property
    def qualified(self) -> str:
        if self.kind == "boundary":
            return f"<libc>:{self.name}"
        base = f"{self.file}:{self.key}"
        return base if self.statement_index is None else f"{base}@{self.statement_index}"


@dataclass(frozen=True)
class SdgEdge:
    src: int
    dst: int
    kind: str


@dataclass
class Sdg:
    nodes: list[SdgNode]
    edges: list[SdgEdge]
    name_index: dict[str, int]
    project: ProjectModel = field(repr=False, compare=False)
    elements: dict[int, Element] = field(default_factory=dict, repr=False, compare=False)
    statements: dict[int, Stmt] = field(default_factory=dict, repr=False, compare=False)
    out: dict[int, list[SdgEdge]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.out:
            for e in self.edges:
                self.out.setdefault(e.src, []).append(e)

    def index_of(self, e: Element) -> int:
        return self.name_index[f"{e.file}:{e.key}"]

    def node(self, qualified: str) -> SdgNode:
        return self.nodes[self.name_index[qualified]]

    def successors(self, nid: int, kinds: Iterable[str] | None = None) -> list[int]:
        ks = set(kinds) if kinds is not None else None
        return [e.dst for e in self.out.get(nid, ()) if ks is None or e.kind in ks]

    def function_ids(self, name: str) -> list[int]:
        return [n.id for n in self.nodes if n.kind == FUNCTION_DEFINITION and n.name == name]

    def entry_id(self, name: str) -> int:
        ids = self.function_ids(name)
        if not ids:
            raise UnknownEntryPoint(name)
        non_static = [i for i in ids if not self.elements[i].static]
        return (non_static or ids)[0]

    def statement_ids(self, fn: int) -> list[int]:
        return [d for d in self.successors(fn, ("control",))]

    def call_edges(self) -> set[tuple[str, str]]:
        return {
            (self.nodes[e.src].name, self.nodes[e.dst].name)
            for e in self.edges
            if e.kind == "call" and self.nodes[e.dst].kind == FUNCTION_DEFINITION
        }

    def to_dot(self) -> str:
        lines = ["digraph sdg {"]
        for n in self.nodes:
            shape = "box" if n.kind == FUNCTION_DEFINITION else ("plaintext" if n.kind == "boundary" else "ellipse")
            lines.append(f'  n{n.id} [label="{_dot_escape(n.qualified)}", shape={shape}];')
        for e in self.edges:
            lines.append(f'  n{e.src} -> n{e.dst} [label="{e.kind}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


class Scope:
    """Resolution of names as seen from one file of a project."""

    def __init__(self, project: ProjectModel):
        self.project = project
        self.by_name: dict[str, list[Element]] = {}
        for e in project.elements():
            for name in set(e.defines) | set(e.tags):
                self.by_name.setdefault(name, []).append(e)
        self._visible: dict[str, list[str]] = {}
        self._first_hop: dict[str, dict[str, Element]] = {}

    def includes_of(self, path: str) -> list[tuple[Element, str | None]]:
        out = []
        for e in self.project.ast(path).flat():
            if e.kind == INCLUDE_DIRECTIVE:
                target = None if e.system else self.project.resolve_include(path, e.name)
                out.append((e, target))
        return out

    def visible_files(self, path: str) -> list[str]:
        """``path`` followed by every project header it includes, transitively."""
        if path not in self._visible:
            seen = [path]
            hops: dict[str, Element] = {}
            queue = deque([(path, None)])
            while queue:
                cur, hop = queue.popleft()
                for inc, target in self.includes_of(cur):
                    if target is not None and target not in seen:
                        seen.append(target)
                        hops[target] = hop if hop is not None else inc
                        queue.append((target, hops[target]))
            self._visible[path] = seen
            self._first_hop[path] = hops
        return self._visible[path]

    def first_hop(self, path: str, header: str) -> Element | None:
        self.visible_files(path)
        return self._first_hop[path].get(header)

    def resolve(self, name: str, path: str, call: bool = False) -> list[Element]:
        """Every element a use of ``name`` in ``path`` may refer to."""
        cands = self.by_name.get(name, [])
        if not cands:
            return []
        visible = set(self.visible_files(path))
        out: list[Element] = []
        defs = [e for e in cands if e.kind == FUNCTION_DEFINITION]
        if defs:
            local = [e for e in defs if e.file == path and e.static]
            out.extend(local or [e for e in defs if not e.static])
        out.extend(e for e in cands if e.kind == FUNCTION_DECLARATION and e.file in visible)
        if call:
            return out
        globs = [e for e in cands if e.kind == GLOBAL_VARIABLE]
        if globs:
            local = [e for e in globs if e.file == path and e.static]
            out.extend(local or [e for e in globs if not e.static])
        tu = [e for e in cands if e.kind in (TYPE_DEFINITION, CONSTANT_DEFINITION)]
        seen_tu = [e for e in tu if e.file in visible]
        out.extend(seen_tu or tu)
        return out


def _node_order(project: ProjectModel) -> list[tuple[Element, int | None, Stmt | None]]:
    rows = []
    for path in project.paths:
        for e in project.ast(path).flat():
            rows.append((e, None, None))
            if e.kind == FUNCTION_DEFINITION:
                for i, s in enumerate(e.statements):
                    rows.append((e, i, s))
    rows.sort(key=lambda r: (r[0].file, r[0].start if r[2] is None else r[2].start, 0 if r[2] is None else 1))
    return rows


def build_sdg(project: ProjectModel) -> Sdg:
    nodes: list[SdgNode] = []
    elements: dict[int, Element] = {}
    statements: dict[int, Stmt] = {}
    index: dict[str, int] = {}
    by_elem: dict[tuple[str, int], int] = {}
    stmt_nodes: dict[tuple[str, int], list[int]] = {}
    for e, si, s in _node_order(project):
        nid = len(nodes)
        kind = e.kind if s is None else "statement"
        node = SdgNode(nid, e.file, e.name, kind, e.key, si)
        nodes.append(node)
        index[node.qualified] = nid
        if s is None:
            elements[nid] = e
            by_elem[(e.file, e.start)] = nid
        else:
            statements[nid] = s
            stmt_nodes.setdefault((e.file, e.start), []).append(nid)

    scope = Scope(project)
    edges: set[tuple[int, int, str]] = set()
    boundary: dict[str, int] = {}
    boundary_edges: set[tuple[int, str, str]] = set()

    def nid_of(e: Element) -> int:
        return by_elem[(e.file, e.start)]

    for nid, e in list(elements.items()):
        uses = element_uses(e)
        uses_libc = False
        for u in uses:
            targets = scope.resolve(u.name, e.file, call=u.call)
            if not targets:
                if libc.is_libc(u.name):
                    uses_libc = True
                    boundary_edges.add((nid, u.name, "call" if u.call else "data"))
                elif u.call and e.kind == FUNCTION_DEFINITION:
                    raise UnresolvedSymbol(u.name, e.file, u.token.line)
                continue
            for t in targets:
                if t is e:
                    continue
                tid = nid_of(t)
                if t.kind == FUNCTION_DEFINITION:
                    kind = "call" if e.kind == FUNCTION_DEFINITION else "declares"
                elif t.kind == GLOBAL_VARIABLE:
                    kind = "data"
                else:
                    kind = "declares"
                edges.add((nid, tid, kind))
                if t.file != e.file and t.kind != FUNCTION_DEFINITION and not (
                    t.kind == GLOBAL_VARIABLE and not t.file.endswith(".h")
                ):
                    hop = scope.first_hop(e.file, t.file)
                    if hop is not None:
                        edges.add((nid, nid_of(hop), "declares"))
        if uses_libc:
            for inc, target in scope.includes_of(e.file):
                if inc.system:
                    edges.add((nid, nid_of(inc), "declares"))
                elif target is not None and _reaches_system(scope, target):
                    edges.add((nid, nid_of(inc), "declares"))
        if e.kind == INCLUDE_DIRECTIVE and not e.system:
            target = project.resolve_include(e.file, e.name)
            if target is not None:
                for h in project.ast(target).flat():
                    edges.add((nid, nid_of(h), "includes"))
                    if h.kind == INCLUDE_DIRECTIVE:
                        edges.add((nid, nid_of(h), "declares"))
        if e.kind == FUNCTION_DEFINITION:
            sids = stmt_nodes.get((e.file, e.start), [])
            for sid in sids:
                edges.add((nid, sid, "control"))
            _local_data_edges(e, sids, statements, edges)

    for name in sorted({b[1] for b in boundary_edges}):
        bid = len(nodes)
        node = SdgNode(bid, "", name, "boundary", name)
        nodes.append(node)
        boundary[name] = bid
        index[node.qualified] = bid
    for src, name, kind in boundary_edges:
        edges.add((src, boundary[name], kind))

    edge_list = [SdgEdge(a, b, k) for a, b, k in sorted(edges)]
    return Sdg(nodes, edge_list, index, project, elements, statements)


def _reaches_system(scope: Scope, header: str) -> bool:
    for f in scope.visible_files(header):
        if any(inc.system for inc, _ in scope.includes_of(f)):
            return True
    return False


def _local_data_edges(fn: Element, sids: list[int], statements: dict[int, Stmt], edges: set) -> None:
    """Def-use edges between top-level statements of one body (later use -> earlier def)."""
    locals_ = local_names(fn)
    writes = [stmt_writes(statements[s]) & locals_ for s in sids]
    for j, sj in enumerate(sids):
        used = stmt_uses(statements[sj]) & locals_
        for i in range(j):
            if writes[i] & used:
                edges.add((sj, sids[i], "data"))


# -- slices ------------------------------------------------------------------


def forward_slice(sdg: Sdg, entry: str) -> set[int]:
    """Element nodes reachable from ``entry`` through call, data and declares edges."""
    start = sdg.entry_id(entry)
    seen = {start}
    stack = [start]
    while stack:
        n = stack.pop()
        for m in sdg.successors(n, SLICE_KINDS):
            if m not in seen and sdg.nodes[m].kind not in ("boundary", "statement"):
                seen.add(m)
                stack.append(m)
    return seen


def forward_closure(sdg: Sdg, starts: Iterable[int]) -> set[int]:
    seen = set(starts)
    stack = list(seen)
    while stack:
        n = stack.pop()
        for m in sdg.successors(n, SLICE_KINDS):
            if m not in seen and sdg.nodes[m].kind not in ("boundary", "statement"):
                seen.add(m)
                stack.append(m)
    return seen


def call_path(sdg: Sdg, entry: str) -> list[int]:
    """Shortest call path from ``main`` to ``entry`` (function node ids)."""
    target = sdg.entry_id(entry)
    mains = sdg.function_ids("main")
    if not mains:
        raise NoPathFromMain(entry)
    start = mains[0]
    prev: dict[int, int | None] = {start: None}
    queue = deque([start])
    while queue:
        n = queue.popleft()
        if n == target:
            break
        for m in sorted(sdg.successors(n, ("call",))):
            if m not in prev and sdg.nodes[m].kind == FUNCTION_DEFINITION:
                prev[m] = n
                queue.append(m)
    if target not in prev:
        raise NoPathFromMain(entry)
    path = [target]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def calls_function(sdg: Sdg, stmt: Stmt, caller: Element, callee: str) -> bool:
    locals_ = local_names(caller)
    return any(u.call and u.name == callee for u in identifier_uses(stmt.tokens, locals_))


@dataclass(frozen=True)
class VeinStep:
    """Statements of one path function that belong to the vein."""

    function: int
    statements: tuple[int, ...]  # statement node ids, in order
    call_statement: int  # node id of the statement calling the next function


def vein_steps(sdg: Sdg, entry: str) -> list[VeinStep]:
    path = call_path(sdg, entry)
    steps = []
    for fn, nxt in zip(path, path[1:]):
        el = sdg.elements[fn]
        sids = sdg.statement_ids(fn)
        callee = sdg.nodes[nxt].name
        at = next((k for k, s in enumerate(sids) if calls_function(sdg, sdg.statements[s], el, callee)), None)
        if at is None:  # defensive: the call edge came from the body
            raise NoPathFromMain(entry)
        chosen = _value_flow_prefix(sdg, el, sids, at)
        steps.append(VeinStep(fn, tuple(chosen), sids[at]))
    return steps


def _value_flow_prefix(sdg: Sdg, fn: Element, sids: list[int], at: int) -> list[int]:
    """The call statement plus earlier statements whose values flow into it
    or that have effects beyond the function (project calls, global writes)."""
    locals_ = local_names(fn)
    scope_names = {n.name for n in sdg.nodes if n.kind == GLOBAL_VARIABLE}
    project_fns = {n.name for n in sdg.nodes if n.kind == FUNCTION_DEFINITION}
    needed = stmt_uses(sdg.statements[sids[at]]) & locals_
    keep = [sids[at]]
    for k in range(at - 1, -1, -1):
        s = sdg.statements[sids[k]]
        if has_return(s):
            continue
        writes = stmt_writes(s)
        effect = bool((writes - locals_) & scope_names) or any(
            u.call and u.name in project_fns for u in identifier_uses(s.tokens, locals_)
        )
        if writes & needed or effect:
            keep.append(sids[k])
            needed |= stmt_uses(s) & locals_
    return keep[::-1]


def backward_slice(sdg: Sdg, entry: str) -> list[int]:
    """The vein: initialized globals used along the path, then the chosen
    statements of each path function in execution order."""
    if entry == "main":
        sdg.entry_id(entry)
        return []
    steps = vein_steps(sdg, entry)
    stmt_ids = [s for step in steps for s in step.statements]
    scope = Scope(sdg.project)
    globals_: set[int] = set()
    for step in steps:
        fn = sdg.elements[step.function]
        locals_ = local_names(fn)
        for sid in step.statements:
            for u in identifier_uses(sdg.statements[sid].tokens, locals_):
                for t in scope.resolve(u.name, fn.file):
                    if t.kind == GLOBAL_VARIABLE and any(d.has_init for d in t.decls):
                        globals_.add(sdg.index_of(t))
    return sorted(globals_) + stmt_ids
