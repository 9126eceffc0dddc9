"""The organ-host wrapper: a function in the host that replays the selected
vein statements with host variables bound into its free names, then calls the
organ's entry point."""

from __future__ import annotations

import posixpath
from dataclasses import dataclass
from typing import Sequence

from .. import libc
from ..depgraph import Scope
from ..extractor import CALL, ELEMENT, STATEMENT, VEIN, OverOrgan, Slot
from ..frontend import (
    CONSTANT_DEFINITION,
    FUNCTION_DECLARATION,
    FUNCTION_DEFINITION,
    GLOBAL_VARIABLE,
    INCLUDE_DIRECTIVE,
    TYPE_DEFINITION,
    Element,
    ProjectModel,
    delete_spans,
    format_tokens,
    from_texts,
)
from ..frontend.lexer import tokenize
from ..symbols import element_uses
from .host import HostContext, HostVariable, resolve_type, typedef_map

INDENT = "    "


@dataclass(frozen=True)
class Binding:
    kind: str  # host | donor | zero
    text: str
    variable: HostVariable | None = None


@dataclass(frozen=True)
class WrapperSlot:
    symbol: str
    ctype: str
    kind: str  # param | free
    candidates: tuple[Binding, ...]


@dataclass
class Wrapper:
    feature_id: str
    entry_point: str
    parameter_slots: list[WrapperSlot]
    setup_statements: list[int]  # statement-array indices of vein entries
    call_statement: str

    @property
    def name(self) -> str:
        return wrapper_name(self.feature_id)

    def executable(self, bindings: Sequence[int]) -> bool:
        return len(bindings) == len(self.parameter_slots) and all(
            0 <= b < len(s.candidates) for b, s in zip(bindings, self.parameter_slots)
        )


def wrapper_name(feature_id: str) -> str:
    return "transplant_" + "".join(c if c.isalnum() else "_" for c in feature_id)


def _zero(ctype: str, typedefs: dict[str, str]) -> str:
    resolved = resolve_type(ctype, typedefs)
    if "*" not in resolved and resolved.split()[0] in ("struct", "union"):
        return "{0}"
    return "0"


def synthesize_wrapper(organ: OverOrgan, host: HostContext) -> Wrapper:
    """One slot per entry parameter and per free vein variable, each with its
    type-compatible candidates; every vein entry starts selected."""
    organ_typedefs = typedef_map(organ.project())
    slots: list[WrapperSlot] = []
    for s in organ.slots:
        want = resolve_type(s.ctype, organ_typedefs)
        cands = [
            Binding("host", f"__h_{v.name}", v)
            for v in host.visible_variables
            if v.resolved == want
        ]
        if s.kind == "param" and s.donor_expr is not None:
            cands.append(Binding("donor", s.donor_expr))
        if not cands:
            cands.append(Binding("zero", _zero(s.ctype, organ_typedefs)))
        slots.append(WrapperSlot(s.name, s.ctype, s.kind, tuple(cands)))
    setup = [i for i, e in enumerate(organ.statement_array) if e.kind == VEIN]
    args = ", ".join(s.name for s in organ.slots if s.kind == "param")
    return Wrapper(organ.feature_id, organ.entry_point, slots, setup, f"{organ.entry_point}({args});")


def type_compatible(slot: WrapperSlot, var: HostVariable, organ_typedefs: dict[str, str]) -> bool:
    return resolve_type(slot.ctype, organ_typedefs) == var.resolved


def donor_bindings(wrapper: Wrapper) -> list[int]:
    """Prefer the donor's own argument expression, then the first host candidate."""
    out = []
    for s in wrapper.parameter_slots:
        kinds = [c.kind for c in s.candidates]
        out.append(kinds.index("donor") if "donor" in kinds else 0)
    return out


# -- rendering -----------------------------------------------------------------


def _declare(ctype: str, name: str) -> str:
    if ctype.endswith("*"):
        return f"{ctype}{name}"
    return f"{ctype} {name}"


def render_vein(organ: OverOrgan, mask: Sequence[bool], values: dict[str, str]) -> str:
    """Vein entries and entry call under ``mask`` with slot values substituted,
    as indented body lines (without the enclosing braces)."""
    lines: list[str] = []
    live = live_slots(organ, mask)
    for s in organ.slots:
        if s.kind == "free" and s.name in live:
            lines.append(f"{_declare(s.ctype, s.name)} = {values[s.name]};")
    open_blocks: list[int] = []
    call_block = _call_block(organ)

    def goto(block: tuple[int, ...]) -> None:
        while tuple(open_blocks) != block[: len(open_blocks)]:
            open_blocks.pop()
            lines.append(INDENT * len(open_blocks) + "}")
        for b in block[len(open_blocks):]:
            lines.append(INDENT * len(open_blocks) + "{")
            open_blocks.append(b)

    for i, e in enumerate(organ.statement_array):
        if not mask[i]:
            continue
        if e.kind == VEIN:
            goto(e.block)
            for ln in e.text.splitlines():
                lines.append(INDENT * len(open_blocks) + ln)
        elif e.kind == CALL:
            goto(call_block)
            args = ", ".join(values[s.name] for s in organ.slots if s.kind == "param")
            lines.append(INDENT * len(open_blocks) + f"{organ.entry_point}({args});")
    goto(())
    return "\n".join(lines)


def live_slots(organ: OverOrgan, mask: Sequence[bool]) -> set[str]:
    """Slots whose value the selected entries read: free variables named by a
    selected vein entry, and entry parameters when the call is selected."""
    names: set[str] = set()
    for on, e in zip(mask, organ.statement_array):
        if not on:
            continue
        if e.kind == VEIN:
            names.update(t.text for t in tokenize(e.text) if t.kind == "ident")
        elif e.kind == CALL:
            names.update(s.name for s in organ.slots if s.kind == "param")
    return {s.name for s in organ.slots if s.name in names}


def _call_block(organ: OverOrgan) -> tuple[int, ...]:
    for e in organ.statement_array:
        if e.kind == CALL:
            return e.block
    return ()


@dataclass(frozen=True)
class RenderedWrapper:
    function: str  # full definition
    prototype: str
    call_site: str  # statement replacing the marker
    host_args: tuple[HostVariable, ...]


def render_wrapper(organ: OverOrgan, wrapper: Wrapper, mask: Sequence[bool], bindings: Sequence[int]) -> RenderedWrapper:
    chosen = [s.candidates[b] for s, b in zip(wrapper.parameter_slots, bindings)]
    live = live_slots(organ, mask)
    host_vars: list[HostVariable] = []
    for s, c in zip(wrapper.parameter_slots, chosen):
        if s.symbol in live and c.kind == "host" and c.variable not in host_vars:
            host_vars.append(c.variable)
    values = {s.symbol: c.text for s, c in zip(wrapper.parameter_slots, chosen)}
    params = ", ".join(_declare(v.ctype, f"__h_{v.name}") for v in host_vars) or "void"
    head = f"void {wrapper.name}({params})"
    body = render_vein(organ, mask, values)
    inner = "\n".join(INDENT + ln if ln else ln for ln in body.splitlines())
    function = head + "\n{\n" + (inner + "\n" if inner else "") + "}\n"
    call = f"{wrapper.name}({', '.join(v.name for v in host_vars)});"
    return RenderedWrapper(function, head + ";", call, tuple(host_vars))


# -- organ text under a mask ---------------------------------------------------


def organ_sources(organ: OverOrgan, mask: Sequence[bool], project: ProjectModel | None = None) -> dict[str, str]:
    """Organ files with unselected functions, globals and statements removed."""
    project = project or organ.project()
    spans: dict[str, list[tuple[int, int]]] = {p: [] for p in project.paths}
    dropped_elements = set()
    for i, e in enumerate(organ.statement_array):
        if e.kind == ELEMENT and not mask[i]:
            el = project.ast(e.file).find(e.key)
            spans[e.file].append((el.start, el.end))
            dropped_elements.add((e.file, e.key))
    for i, e in enumerate(organ.statement_array):
        if e.kind == STATEMENT and not mask[i] and (e.file, e.key) not in dropped_elements:
            el = project.ast(e.file).find(e.key)
            s = el.statements[e.index]
            spans[e.file].append((s.start, s.end))
    return {p: delete_spans(project.text(p), spans[p]) if spans[p] else project.text(p) for p in project.paths}


# -- declarations the wrapper needs in the host file ----------------------------


def _visible_definers(host: ProjectModel, path: str) -> set[str]:
    scope = Scope(host)
    names: set[str] = set()
    for f in scope.visible_files(path):
        for e in host.ast(f).flat():
            names.update(e.defines)
            names.update(e.tags)
    return names


def _relative_include(from_file: str, header: str) -> str:
    base = posixpath.dirname(from_file) or "."
    return posixpath.relpath(header, base)


def wrapper_preamble(organ_project: ProjectModel, host: ProjectModel, target: str,
                     function_text: str) -> str:
    """Includes, type copies, extern declarations and prototypes the wrapper
    needs, given the host after the organ has been grafted."""
    visible = _visible_definers(host, target)
    lines: list[str] = []
    system = []
    for e in organ_project.elements():
        if e.kind == INCLUDE_DIRECTIVE and e.system and e.name not in system:
            system.append(e.name)
    used = [t.text for t in tokenize(function_text) if t.kind == "ident"]
    for name in used:
        h = libc.header_for(name) if libc.is_libc(name) else None
        if h and h not in system:
            system.append(h)
    host_system = {e.name for e in host.ast(target).flat() if e.kind == INCLUDE_DIRECTIVE and e.system}
    for h in system:
        if h not in host_system:
            lines.append(f"#include <{h}>")

    # organ elements defining a name the wrapper mentions, plus what they need
    definers: dict[str, list[Element]] = {}
    for e in organ_project.elements():
        for n in set(e.defines) | set(e.tags):
            definers.setdefault(n, []).append(e)
    wanted: list[Element] = []
    todo = list(dict.fromkeys(used))
    seen_names: set[str] = set()
    while todo:
        name = todo.pop(0)
        if name in seen_names or name in visible:
            continue
        seen_names.add(name)
        for e in definers.get(name, []):
            if e in wanted:
                continue
            if e.kind in (TYPE_DEFINITION, CONSTANT_DEFINITION, FUNCTION_DECLARATION):
                wanted.append(e)
                todo.extend(u.name for u in element_uses(e))
            elif e.kind in (FUNCTION_DEFINITION, GLOBAL_VARIABLE):
                wanted.append(e)
                uses = element_uses(e) if e.kind == GLOBAL_VARIABLE else []
                if e.kind == FUNCTION_DEFINITION:
                    uses = [u for u in element_uses(e) if u.token.start < e.body.start]
                todo.extend(u.name for u in uses)

    order = {(p, e.start): k for k, (p, e) in enumerate((e.file, e) for e in organ_project.elements())}
    wanted.sort(key=lambda e: order[(e.file, e.start)])
    done_protos: set[str] = set()
    for e in wanted:
        if e.kind in (TYPE_DEFINITION, CONSTANT_DEFINITION):
            lines.append(e.text)
        elif e.kind == FUNCTION_DECLARATION:
            if e.name not in done_protos:
                lines.append(e.text)
                done_protos.add(e.name)
        elif e.kind == FUNCTION_DEFINITION:
            if e.name not in done_protos:
                header = [t for t in e.signature.header if t.kind != "comment" and t.text != "static"]
                lines.append(format_tokens(header) + ";")
                done_protos.add(e.name)
        elif e.kind == GLOBAL_VARIABLE and e.static and e.file != target:
            # a file-local global cannot be reached by extern; the wrapper
            # gets its own copy with the donor initializer
            lines.append(e.text)
        elif e.kind == GLOBAL_VARIABLE:
            for d in e.decls:
                lines.append(f"extern {_declare_full(d.ctype, d.name)};")
    return "\n".join(lines)


def _declare_full(ctype, name: str) -> str:
    stars = "*" * ctype.pointers
    arrays = "[]" * ctype.arrays
    return f"{ctype.base} {stars}{name}{arrays}"


def parse_bindings(wrapper: Wrapper, values: dict[str, str]) -> list[int]:
    """Binding indices from a {slot: expression} mapping (tests and CLI)."""
    out = []
    for s in wrapper.parameter_slots:
        texts = [c.text for c in s.candidates]
        want = values.get(s.symbol)
        out.append(texts.index(want) if want in texts else 0)
    return out
