"""Over-organ extraction: organ elements, the inlined vein and the statement array.

The organ is materialized as copies of the donor files holding only the
selected elements, in donor order. The vein is flattened into a list of
statements by inlining the functions on the call path from ``main``; a
function already on the inlining stack is never inlined again, which keeps
the array finite on recursive programs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from . import libc
from .depgraph import (
    Scope,
    Sdg,
    build_sdg,
    forward_closure,
    forward_slice,
    vein_steps,
)
from .errors import NoPathFromMain
from .frontend import (
    CONDITIONAL_BLOCK,
    CONSTANT_DEFINITION,
    FUNCTION_DEFINITION,
    GLOBAL_VARIABLE,
    INCLUDE_DIRECTIVE,
    TYPE_DEFINITION,
    CType,
    Element,
    ProjectModel,
    Stmt,
    format_tokens,
    from_texts,
)
from .frontend.lexer import Token, tokenize
from .symbols import has_return, identifier_uses, local_names

VEIN = "vein"
CALL = "call"
ELEMENT = "element"
STATEMENT = "statement"


@dataclass(frozen=True)
class StatementEntry:
    """One GP-selectable unit of the over-organ."""

    kind: str  # vein | call | element | statement
    provenance: tuple
    file: str = ""
    key: str = ""  # organ element key (element and statement entries)
    index: int = -1  # statement position inside the organ function
    text: str = ""  # printed statement (vein entries)
    block: tuple[int, ...] = ()  # inline site nesting of a vein entry
    declares: tuple[str, ...] = ()

    def to_json(self) -> dict:
        d = asdict(self)
        d["provenance"] = list(self.provenance)
        d["block"] = list(self.block)
        d["declares"] = list(self.declares)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "StatementEntry":
        return cls(
            kind=d["kind"],
            provenance=tuple(d["provenance"]),
            file=d["file"],
            key=d["key"],
            index=d["index"],
            text=d["text"],
            block=tuple(d["block"]),
            declares=tuple(d["declares"]),
        )


@dataclass(frozen=True)
class Slot:
    """A name the wrapper must bind: an entry parameter or a free vein variable."""

    name: str
    ctype: str
    kind: str  # param | free
    donor_expr: str | None = None


@dataclass
class VeinInlineRecord:
    function_stack: list[str] = field(default_factory=list)
    recursive_calls: set[tuple[str, str]] = field(default_factory=set)  # (caller, callee)
    max_stack: int = 0

    def push(self, name: str) -> None:
        assert name not in self.function_stack, f"{name} inlined twice on one stack"
        self.function_stack.append(name)
        self.max_stack = max(self.max_stack, len(self.function_stack))

    def pop(self) -> None:
        self.function_stack.pop()


@dataclass
class OverOrgan:
    feature_id: str
    entry_point: str
    donor_id: str
    sources: dict[str, str]  # organ files keyed by donor-relative path
    organ_elements: list[tuple[str, str]]  # (file, key) in emitted order
    vein_statements: list[StatementEntry]
    statement_array: list[StatementEntry]
    file_map: dict[str, str]  # "file:key" -> donor-relative path
    boundary_symbols: list[str]
    slots: list[Slot] = field(default_factory=list)
    entry_signature: str = ""
    standalone: list[str] = field(default_factory=list)  # vein functions kept as calls
    support: dict[str, list[str]] = field(default_factory=dict)  # names the vein needs, by category
    call_block: tuple[int, ...] = ()  # inline site nesting of the entry call

    def project(self) -> ProjectModel:
        return from_texts(dict(self.sources))

    @property
    def files(self) -> list[str]:
        return sorted(self.sources)

    def to_json(self) -> dict:
        return {
            "featureId": self.feature_id,
            "entryPoint": self.entry_point,
            "donorId": self.donor_id,
            "organElements": [list(x) for x in self.organ_elements],
            "veinStatements": [e.to_json() for e in self.vein_statements],
            "statementArray": [e.to_json() for e in self.statement_array],
            "fileMap": dict(sorted(self.file_map.items())),
            "boundarySymbols": list(self.boundary_symbols),
            "slots": [asdict(s) for s in self.slots],
            "entrySignature": self.entry_signature,
            "standalone": list(self.standalone),
            "support": {k: list(v) for k, v in sorted(self.support.items())},
            "callBlock": list(self.call_block),
        }

    @classmethod
    def from_json(cls, d: dict, sources: dict[str, str]) -> "OverOrgan":
        return cls(
            feature_id=d["featureId"],
            entry_point=d["entryPoint"],
            donor_id=d["donorId"],
            sources=dict(sources),
            organ_elements=[tuple(x) for x in d["organElements"]],
            vein_statements=[StatementEntry.from_json(x) for x in d["veinStatements"]],
            statement_array=[StatementEntry.from_json(x) for x in d["statementArray"]],
            file_map=dict(d["fileMap"]),
            boundary_symbols=list(d["boundarySymbols"]),
            slots=[Slot(**s) for s in d["slots"]],
            entry_signature=d["entrySignature"],
            standalone=list(d["standalone"]),
            support={k: list(v) for k, v in d["support"].items()},
            call_block=tuple(d.get("callBlock", ())),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


# -- vein inlining ------------------------------------------------------------


class _Inliner:
    def __init__(self, sdg: Sdg, record: VeinInlineRecord, entry: str):
        self._entry = entry
        self.sdg = sdg
        self.project = sdg.project
        self.record = record
        self.scope = Scope(sdg.project)
        self.entries: list[StatementEntry] = []
        self.sites = 0
        self.standalone: list[Element] = []
        self.referenced: list[tuple[str, str]] = []  # (file, name) used by emitted vein code
        self.local_types: dict[str, str] = {}  # renamed local -> decayed type
        self.declared: set[str] = set()
        self.entry_args: list[str] | None = None
        self.entry_arg_tokens: list[list[Token]] = []
        self.call_block: tuple[int, ...] = ()

    # renaming ---------------------------------------------------------------

    def _renamer(self, fn: Element, depth: int):
        locals_ = local_names(fn)
        prefix = f"__v{depth}_"

        def rename(tokens) -> list[str]:
            out = []
            for i, t in enumerate(tokens):
                prev = tokens[i - 1] if i > 0 else None
                member = prev is not None and prev.kind == "punct" and prev.text in (".", "->")
                if t.kind == "ident" and t.text in locals_ and not member:
                    out.append(prefix + t.text)
                else:
                    out.append(t.text)
            return out

        return rename, prefix, locals_

    def _note_types(self, fn: Element, prefix: str) -> None:
        for p in fn.signature.params:
            if p.name:
                self.local_types.setdefault(prefix + p.name, p.ctype.decayed)
        if fn.body is not None:
            for s in fn.body.walk():
                for d in s.decls:
                    self.local_types.setdefault(prefix + d.name, d.ctype.decayed)

    def _note_refs(self, fn: Element, tokens) -> None:
        for u in identifier_uses(tokens, local_names(fn)):
            self.referenced.append((fn.file, u.name))

    def _emit(self, fn: Element, depth: int, stmt: Stmt, index: int, block: tuple[int, ...], site: int) -> None:
        rename, prefix, _ = self._renamer(fn, depth)
        toks = [t for t in stmt.tokens if t.kind != "comment"]
        text = _layout(rename(toks), toks)
        declared = tuple(prefix + d.name for d in stmt.decls)
        self.declared.update(declared)
        self._note_refs(fn, stmt.tokens)
        self.entries.append(
            StatementEntry(VEIN, (fn.file, fn.key, index, site), fn.file, fn.key, index, text, block, declared)
        )

    def _bind_params(self, callee: Element, depth: int, caller: Element, caller_depth: int,
                     args: list[list[Token]], block: tuple[int, ...], site: int) -> None:
        rename, _, _ = self._renamer(caller, caller_depth)
        prefix = f"__v{depth}_"
        for k, (p, arg) in enumerate(zip(callee.signature.params, args)):
            name = prefix + p.name
            decl = _declare(p.ctype, name)
            text = f"{decl} = {_layout(rename(arg), arg)};"
            self.declared.add(name)
            self._note_refs(caller, arg)
            self.entries.append(
                StatementEntry(VEIN, (callee.file, callee.key, f"param:{p.name}", site), callee.file,
                               callee.key, -1, text, block, (name,))
            )

    # walking ----------------------------------------------------------------

    def run(self, entry: str) -> None:
        steps = vein_steps(self.sdg, entry)
        if not steps:
            return
        self._path(steps, 0, 0, ())

    def _path(self, steps, k: int, depth: int, block: tuple[int, ...]) -> None:
        step = steps[k]
        fn = self.sdg.elements[step.function]
        self.record.push(fn.name)
        rename, prefix, _ = self._renamer(fn, depth)
        self._note_types(fn, prefix)
        site = self.sites
        self.sites += 1
        sids = self.sdg.statement_ids(step.function)
        for sid in step.statements:
            stmt = self.sdg.statements[sid]
            index = sids.index(sid)
            if sid != step.call_statement:
                self._statement(fn, depth, stmt, index, block, site)
                continue
            nxt = steps[k + 1].function if k + 1 < len(steps) else None
            callee_name = self.sdg.nodes[nxt].name if nxt is not None else None
            if nxt is None:
                # last path function: the call to the entry point becomes the
                # synthesized wrapper call
                entry_el = self.sdg.elements[self.sdg.entry_id(self._entry)]
                args = _call_args(stmt.tokens, entry_el.name)
                self.entry_arg_tokens = args
                self.call_block = block
                self.entry_args = [_layout(rename(a), a) for a in args]
                for a in args:
                    self._note_refs(fn, a)
                continue
            callee = self.sdg.elements[nxt]
            args = _call_args(stmt.tokens, callee_name)
            inner = block + (self.sites,)
            self._bind_params(callee, depth + 1, fn, depth, args, inner, self.sites)
            self._path(steps, k + 1, depth + 1, inner)
        self.record.pop()

    def _statement(self, fn: Element, depth: int, stmt: Stmt, index: int, block, site: int) -> None:
        """A non-path vein statement: inline ``g(args);`` when possible."""
        target = _simple_call(stmt)
        callee = None
        if target is not None:
            defs = self.scope.resolve(target, fn.file, call=True)
            defs = [d for d in defs if d.kind == FUNCTION_DEFINITION]
            callee = defs[0] if len(defs) == 1 else None
        if callee is not None and callee.name in self.record.function_stack:
            self.record.recursive_calls.add((fn.name, callee.name))
            callee = None
            self._standalone(target, fn)
        elif callee is not None and not _inlinable(callee):
            callee = None
            self._standalone(target, fn)
        if callee is None:
            self._emit(fn, depth, stmt, index, block, site)
            for u in identifier_uses(stmt.tokens, local_names(fn)):
                if u.call:
                    self._standalone(u.name, fn)
            return
        args = _call_args(stmt.tokens, callee.name)
        inner = block + (self.sites,)
        inner_site = self.sites
        self.sites += 1
        self._bind_params(callee, depth + 1, fn, depth, args, inner, inner_site)
        self.record.push(callee.name)
        _, prefix, _ = self._renamer(callee, depth + 1)
        self._note_types(callee, prefix)
        for i, s in enumerate(callee.statements):
            self._statement(callee, depth + 1, s, i, inner, inner_site)
        self.record.pop()

    def _standalone(self, name: str, fn: Element) -> None:
        for d in self.scope.resolve(name, fn.file, call=True):
            if d.kind == FUNCTION_DEFINITION and d not in self.standalone:
                self.standalone.append(d)


def _declare(ctype: CType, name: str) -> str:
    p = ctype.pointers + (1 if ctype.arrays else 0)
    return f"{ctype.base} {'*' * p}{name}"


def _layout(texts: list[str], tokens) -> str:
    fake = [Token(t.kind, x, t.start, t.end, t.line, t.end_line) for x, t in zip(texts, tokens)]
    return format_tokens(fake)


def _simple_call(stmt: Stmt) -> str | None:
    """Name of ``g`` when the statement is exactly ``g(args);``."""
    toks = stmt.tokens
    if stmt.kind != "expr" or len(toks) < 4:
        return None
    if toks[0].kind != "ident" or toks[1].text != "(" or toks[-1].text != ";" or toks[-2].text != ")":
        return None
    depth = 0
    for i in range(1, len(toks) - 1):
        if toks[i].text == "(":
            depth += 1
        elif toks[i].text == ")":
            depth -= 1
            if depth == 0 and i != len(toks) - 2:
                return None
    return toks[0].text


def _call_args(tokens, name: str) -> list[list[Token]]:
    """Argument token lists of the first call to ``name``."""
    toks = [t for t in tokens if t.kind != "comment"]
    for i, t in enumerate(toks):
        if t.kind == "ident" and t.text == name and i + 1 < len(toks) and toks[i + 1].text == "(":
            prev = toks[i - 1] if i > 0 else None
            if prev is not None and prev.text in (".", "->"):
                continue
            args: list[list[Token]] = []
            cur: list[Token] = []
            depth = 0
            for t2 in toks[i + 1:]:
                if t2.text in ("(", "[", "{") and t2.kind == "punct":
                    depth += 1
                    if depth == 1:
                        continue
                elif t2.text in (")", "]", "}") and t2.kind == "punct":
                    depth -= 1
                    if depth == 0:
                        if cur:
                            args.append(cur)
                        return args
                elif t2.text == "," and depth == 1:
                    args.append(cur)
                    cur = []
                    continue
                cur.append(t2)
    return []


def _inlinable(fn: Element) -> bool:
    sig = fn.signature
    return (
        fn.body is not None
        and not sig.variadic
        and not any(has_return(s) for s in fn.statements)
        and all(p.name for p in sig.params)
    )


# -- extraction ---------------------------------------------------------------


def _check_prepared(project: ProjectModel) -> None:
    for path in project.paths:
        for e in project.ast(path).elements:
            if e.kind == CONDITIONAL_BLOCK:
                raise ValueError(
                    f"{path}:{e.line}: donor still has conditional directives; prepare it first"
                )


def extract_over_organ(
    project: ProjectModel,
    sdg: Sdg | None,
    entry: str,
    feature_id: str,
    donor_id: str = "donor",
    record: VeinInlineRecord | None = None,
) -> OverOrgan:
    """Slice the organ and vein for ``entry`` out of a prepared donor."""
    _check_prepared(project)
    sdg = sdg or build_sdg(project)
    entry_id = sdg.entry_id(entry)
    if entry != "main" and not sdg.function_ids("main"):
        raise NoPathFromMain(entry)
    organ_ids = set(forward_slice(sdg, entry))
    record = record or VeinInlineRecord()
    inl = _Inliner(sdg, record, entry)
    if entry != "main":
        inl.run(entry)
    # everything the vein mentions must travel with the organ
    extra: set[int] = set()
    for fn in inl.standalone:
        extra.add(sdg.index_of(fn))
    support: dict[str, set[str]] = {"types": set(), "globals": set(), "functions": set(), "libc": set()}
    for file, name in inl.referenced:
        targets = inl.scope.resolve(name, file)
        if not targets and libc.is_libc(name):
            support["libc"].add(name)
        for t in targets:
            if t.kind == GLOBAL_VARIABLE:
                extra.add(sdg.index_of(t))
                support["globals"].add(name)
            elif t.kind in (TYPE_DEFINITION, CONSTANT_DEFINITION):
                extra.add(sdg.index_of(t))
                support["types"].add(name)
            elif t.kind == FUNCTION_DEFINITION:
                extra.add(sdg.index_of(t))
                support["functions"].add(name)
    support["functions"].add(entry)
    for fn in inl.standalone:
        support["functions"].add(fn.name)
    organ_ids |= forward_closure(sdg, extra)
    organ_ids = {i for i in organ_ids if sdg.nodes[i].kind not in ("boundary", "statement")}

    chosen = sorted(organ_ids, key=lambda i: (sdg.nodes[i].file, sdg.elements[i].start))
    # every header named by a kept include must exist in the organ tree
    by_file: dict[str, list[Element]] = {}
    for i in chosen:
        e = sdg.elements[i]
        by_file.setdefault(e.file, []).append(e)
    for path in list(by_file):
        for e in by_file[path]:
            if e.kind == INCLUDE_DIRECTIVE and not e.system:
                target = project.resolve_include(e.file, e.name)
                if target is not None:
                    by_file.setdefault(target, [])
    sources = {}
    for path in sorted(by_file):
        parts = [e.text for e in by_file[path]]
        sources[path] = ("\n\n".join(parts) + "\n") if parts else ""
    organ_project = from_texts(sources)
    organ_elements: list[tuple[str, str]] = []
    file_map: dict[str, str] = {}
    for path in sorted(by_file):
        kept = organ_project.ast(path).elements
        assert len(kept) == len(by_file[path]), path
        for e in kept:
            organ_elements.append((path, e.key))
            file_map[f"{path}:{e.key}"] = path

    boundary: set[str] = set(support["libc"])
    for i in chosen:
        for m in sdg.successors(i, ("call", "data")):
            if sdg.nodes[m].kind == "boundary":
                boundary.add(sdg.nodes[m].name)

    entry_el = sdg.elements[entry_id]
    slots = _slots(inl, entry_el)
    organ = OverOrgan(
        feature_id=feature_id,
        entry_point=entry,
        donor_id=donor_id,
        sources=sources,
        organ_elements=organ_elements,
        vein_statements=list(inl.entries),
        statement_array=[],
        file_map=file_map,
        boundary_symbols=sorted(boundary),
        slots=slots,
        entry_signature=format_tokens([t for t in entry_el.signature.header if t.kind != "comment"]),
        standalone=[f.name for f in inl.standalone],
        support={k: sorted(v) for k, v in support.items()},
        call_block=inl.call_block,
    )
    return build_statement_array(organ, record)


def _slots(inl: _Inliner, entry_el: Element) -> list[Slot]:
    slots: list[Slot] = []
    # free variables: renamed locals used by the vein but declared by no entry
    used: list[str] = []
    texts = [e.text for e in inl.entries] + (inl.entry_args or [])
    for text in texts:
        for t in tokenize(text):
            if t.kind == "ident" and t.text.startswith("__v") and t.text not in used:
                used.append(t.text)
    for name in used:
        if name not in inl.declared and name in inl.local_types:
            slots.append(Slot(name, inl.local_types[name], "free"))
    args = inl.entry_args or []
    for k, p in enumerate(entry_el.signature.params):
        donor = args[k] if k < len(args) else None
        slots.append(Slot(p.name or f"arg{k}", p.ctype.decayed, "param", donor))
    return slots


def build_statement_array(organ: OverOrgan, record: VeinInlineRecord | None = None) -> OverOrgan:
    """Populate ``statement_array``: vein entries, the entry call, then each
    organ function and its top-level statements, and each organ global."""
    array: list[StatementEntry] = list(organ.vein_statements)
    array.append(StatementEntry(CALL, ("call", organ.entry_point), key=organ.entry_point, block=organ.call_block))
    project = organ.project()
    for path, key in organ.organ_elements:
        e = project.ast(path).find(key)
        if e.kind == FUNCTION_DEFINITION:
            array.append(StatementEntry(ELEMENT, (path, key), path, key))
            for i, s in enumerate(e.statements):
                array.append(StatementEntry(STATEMENT, (path, key, i), path, key, i))
        elif e.kind == GLOBAL_VARIABLE:
            array.append(StatementEntry(ELEMENT, (path, key), path, key))
    seen = set()
    for a in array:
        assert a.provenance not in seen, a.provenance
        seen.add(a.provenance)
    organ.statement_array = array
    return organ


def driver_source(organ: OverOrgan) -> str:
    """A ``main`` that replays the vein and then calls the entry point, used to
    check that the over-organ is self-contained."""
    from .adaptation.wrapper import render_vein

    lines = ["int main(void)", "{"]
    body = render_vein(organ, [True] * len(organ.statement_array), {s.name: s.donor_expr or "0" for s in organ.slots})
    lines.extend("    " + ln if ln else ln for ln in body.splitlines())
    lines.append("    return 0;")
    lines.append("}")
    return "\n".join(lines) + "\n"


DRIVER_FILE = "__driver__.c"


def driver_files(organ: OverOrgan) -> dict[str, str]:
    """The over-organ's sources plus a driver translation unit whose preamble
    declares everything the replayed vein mentions."""
    from .adaptation.wrapper import wrapper_preamble

    project = organ.project()
    body = driver_source(organ)
    host = from_texts({**organ.sources, DRIVER_FILE: ""})
    pre = wrapper_preamble(project, host, DRIVER_FILE, body)
    return {**organ.sources, DRIVER_FILE: (pre + "\n\n" if pre else "") + body}
