"""The transplantation platform: an on-disk repository of over-organs, product
bases, ice-box suites and the annotated feature model.

Layout::

    platform/
      feature-model.json
      over-organs/<feature>/{manifest.json, over-organ.json, <donor-relative sources>}
      product-bases/<id>/{manifest.json, project/..., suites/<kind>/...}
      icebox/<feature>/{manifest.json, suite.json, *.in, *.out}

Every artifact directory is written under a temporary name and renamed into
place, so a crash leaves either nothing or a complete artifact. Writers hold
a per-artifact lock file.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import shutil
import tempfile
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import combinations
from pathlib import Path
from typing import Iterable

from filelock import FileLock

from . import __version__
from .errors import DigestMismatch, DuplicateFeatureId, MissingArtifact, UnknownFeature
from .extractor import OverOrgan
from .frontend import ProjectModel, load_project
from .suites import TestSuite, load_suite, save_suite

MANDATORY, OPTIONAL, ALTERNATIVE = "mandatory", "optional", "alternative"
REQUIRES, EXCLUDES = "requires", "excludes"
_IDENT = re.compile(r"[A-Za-z_]\w*\Z")
_ID = re.compile(r"[A-Za-z0-9_][\w.-]*\Z")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def now_iso() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


# -- feature model -------------------------------------------------------------


@dataclass(frozen=True)
class Feature:
    id: str
    parent: str | None
    kind: str = OPTIONAL  # mandatory | optional | alternative (group member)


@dataclass(frozen=True)
class Constraint:
    kind: str  # requires | excludes
    a: str
    b: str


@dataclass(frozen=True)
class Annotation:
    donor_id: str
    entry_point: str


@dataclass(frozen=True)
class Violation:
    kind: str  # mandatory | requires | excludes | alternative | parent
    features: tuple[str, ...]

    def __str__(self) -> str:
        if self.kind == REQUIRES:
            return f"requires {self.features[0]}->{self.features[1]}"
        if self.kind == EXCLUDES:
            return f"excludes {self.features[0]}<->{self.features[1]}"
        if self.kind == MANDATORY:
            return f"mandatory child {self.features[1]} of {self.features[0]} not selected"
        if self.kind == ALTERNATIVE:
            return f"more than one alternative under {self.features[0]}: {', '.join(self.features[1:])}"
        return f"{self.features[0]} selected without its parent {self.features[1]}"


@dataclass
class FeatureModel:
    features: list[Feature] = field(default_factory=list)
    cross_tree: list[Constraint] = field(default_factory=list)
    annotations: dict[str, Annotation] = field(default_factory=dict)

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        ids = [f.id for f in self.features]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate feature id in feature model")
        known = set(ids)
        roots = [f for f in self.features if f.parent is None]
        if self.features and len(roots) != 1:
            raise ValueError(f"feature model needs exactly one root, found {len(roots)}")
        for f in self.features:
            if f.kind not in (MANDATORY, OPTIONAL, ALTERNATIVE):
                raise ValueError(f"feature {f.id}: unknown kind {f.kind!r}")
            if f.parent is not None and f.parent not in known:
                raise ValueError(f"feature {f.id}: unknown parent {f.parent}")
        parent = {f.id: f.parent for f in self.features}
        for f in self.features:  # every chain reaches the root
            seen, cur = set(), f.id
            while cur is not None:
                if cur in seen:
                    raise ValueError(f"feature {f.id}: parent relation has a cycle")
                seen.add(cur)
                cur = parent[cur]
        for c in self.cross_tree:
            if c.kind not in (REQUIRES, EXCLUDES):
                raise ValueError(f"unknown constraint kind {c.kind!r}")
            for x in (c.a, c.b):
                if x not in known:
                    raise ValueError(f"constraint names unknown feature {x}")
        for fid, a in self.annotations.items():
            if fid not in known:
                raise ValueError(f"annotation for unknown feature {fid}")
            if not _IDENT.match(a.entry_point):
                raise ValueError(f"feature {fid}: entry point {a.entry_point!r} is not an identifier")

    @property
    def ids(self) -> list[str]:
        return [f.id for f in self.features]

    def children(self, fid: str) -> list[Feature]:
        return [f for f in self.features if f.parent == fid]

    def to_json(self) -> dict:
        return {
            "features": [{"id": f.id, "parent": f.parent, "kind": f.kind} for f in self.features],
            "crossTree": [{"kind": c.kind, "a": c.a, "b": c.b} for c in self.cross_tree],
            "annotations": {
                k: {"donorId": v.donor_id, "entryPoint": v.entry_point} for k, v in sorted(self.annotations.items())
            },
        }

    @classmethod
    def from_json(cls, d: dict) -> "FeatureModel":
        return cls(
            [Feature(f["id"], f.get("parent"), f.get("kind", OPTIONAL)) for f in d.get("features", [])],
            [Constraint(c["kind"], c["a"], c["b"]) for c in d.get("crossTree", [])],
            {k: Annotation(v["donorId"], v["entryPoint"]) for k, v in d.get("annotations", {}).items()},
        )


def validate_configuration(model: FeatureModel, selected: Iterable[str]) -> list[Violation]:
    """Every constraint the selection violates; an empty list means valid."""
    sel = set(selected)
    known = set(model.ids)
    for s in sorted(sel):
        if s not in known:
            raise UnknownFeature(s)
    out: list[Violation] = []
    for f in model.features:
        if f.parent is None:
            continue
        if f.id in sel and f.parent not in sel:
            out.append(Violation("parent", (f.id, f.parent)))
        if f.kind == MANDATORY and f.parent in sel and f.id not in sel:
            out.append(Violation(MANDATORY, (f.parent, f.id)))
    for f in model.features:
        group = [c.id for c in model.children(f.id) if c.kind == ALTERNATIVE]
        chosen = [g for g in group if g in sel]
        if len(chosen) > 1:
            out.append(Violation(ALTERNATIVE, (f.id, *chosen)))
    for c in model.cross_tree:
        if c.kind == REQUIRES and c.a in sel and c.b not in sel:
            out.append(Violation(REQUIRES, (c.a, c.b)))
        elif c.kind == EXCLUDES and c.a in sel and c.b in sel:
            out.append(Violation(EXCLUDES, (c.a, c.b)))
    return out


def valid_configurations(model: FeatureModel) -> Iterable[frozenset[str]]:
    ids = model.ids
    for r in range(len(ids) + 1):
        for combo in combinations(ids, r):
            if not validate_configuration(model, combo):
                yield frozenset(combo)


# -- manifests -----------------------------------------------------------------


@dataclass
class TransplantManifest:
    feature_id: str
    donor_id: str
    entry_point: str
    files: list[tuple[str, str]]  # (relative path, digest)
    boundary_symbols: list[str]
    icebox_suite_ref: str | None
    created_at: str = ""
    tool_version: str = __version__

    def to_json(self) -> dict:
        return {
            "featureId": self.feature_id,
            "donorId": self.donor_id,
            "entryPoint": self.entry_point,
            "files": [{"path": p, "digest": d} for p, d in self.files],
            "boundarySymbols": list(self.boundary_symbols),
            "iceboxSuiteRef": self.icebox_suite_ref,
            "createdAt": self.created_at,
            "toolVersion": self.tool_version,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TransplantManifest":
        return cls(
            d["featureId"],
            d["donorId"],
            d["entryPoint"],
            [(f["path"], f["digest"]) for f in d["files"]],
            list(d["boundarySymbols"]),
            d.get("iceboxSuiteRef"),
            d.get("createdAt", ""),
            d.get("toolVersion", ""),
        )


@dataclass
class ProductBase:
    id: str
    project: ProjectModel
    insertion_points: list[dict] = field(default_factory=list)  # {featureId, file, function}
    suites: dict[str, TestSuite] = field(default_factory=dict)
    build_command: str = ""
    root: str = ""


@dataclass(frozen=True)
class ArtifactRow:
    kind: str
    id: str
    files: int
    created_at: str


# -- repository ----------------------------------------------------------------

KINDS = {"over-organ": "over-organs", "product-base": "product-bases", "icebox": "icebox"}


def _file_digests(root: Path, skip: set[str]) -> list[tuple[str, str]]:
    out = []
    for p in sorted(root.rglob("*")):
        if p.is_file():
            rel = p.relative_to(root).as_posix()
            if rel not in skip:
                out.append((rel, digest(p.read_bytes())))
    return out


def _verify(root: Path, files: list[tuple[str, str]]) -> None:
    for rel, want in files:
        p = root / rel
        if not p.is_file():
            raise MissingArtifact(f"{root.name}/{rel}")
        if digest(p.read_bytes()) != want:
            raise DigestMismatch(str(p))


class Platform:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    # lifecycle ----------------------------------------------------------------

    @classmethod
    def init(cls, root: str | os.PathLike, model: FeatureModel | None = None) -> "Platform":
        p = cls(root)
        for sub in KINDS.values():
            (p.root / sub).mkdir(parents=True, exist_ok=True)
        if not (p.root / "feature-model.json").exists() or model is not None:
            p.save_feature_model(model or FeatureModel())
        return p

    @classmethod
    def open(cls, root: str | os.PathLike) -> "Platform":
        p = cls(root)
        if not (p.root / "feature-model.json").is_file():
            raise MissingArtifact(f"platform at {p.root} (run 'transplantc init')")
        return p

    def feature_model(self) -> FeatureModel:
        return FeatureModel.from_json(json.loads((self.root / "feature-model.json").read_text("utf-8")))

    def save_feature_model(self, model: FeatureModel) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        with FileLock(str(self.root / ".feature-model.lock")):
            tmp = self.root / f".feature-model.{uuid.uuid4().hex}.tmp"
            tmp.write_text(dumps(model.to_json()), "utf-8")
            os.replace(tmp, self.root / "feature-model.json")

    # atomic directory store ---------------------------------------------------

    def _dir(self, kind: str, ident: str) -> Path:
        if not _ID.match(ident):
            raise ValueError(f"invalid artifact id {ident!r}")
        return self.root / KINDS[kind] / ident

    def exists(self, kind: str, ident: str) -> bool:
        return (self._dir(kind, ident) / "manifest.json").is_file()

    def _store(self, kind: str, ident: str, fill, force: bool) -> Path:
        final = self._dir(kind, ident)
        final.parent.mkdir(parents=True, exist_ok=True)
        with FileLock(str(final.parent / f".{ident}.lock")):
            if final.exists():
                if (final / "manifest.json").is_file() and not force:
                    raise DuplicateFeatureId(ident)
            tmp = Path(tempfile.mkdtemp(prefix=f".{ident}.", suffix=".tmp", dir=final.parent))
            try:
                fill(tmp)
                if final.exists():
                    trash = final.parent / f".{ident}.{uuid.uuid4().hex}.old"
                    os.rename(final, trash)
                    os.rename(tmp, final)
                    shutil.rmtree(trash, ignore_errors=True)
                else:
                    os.rename(tmp, final)
            except BaseException:
                shutil.rmtree(tmp, ignore_errors=True)
                raise
        return final

    def _manifest(self, kind: str, ident: str) -> tuple[Path, dict]:
        d = self._dir(kind, ident)
        m = d / "manifest.json"
        if not m.is_file():
            raise MissingArtifact(f"{kind} {ident}")
        return d, json.loads(m.read_text("utf-8"))

    # over-organs --------------------------------------------------------------

    def store_over_organ(self, organ: OverOrgan, icebox_ref: str | None = None, force: bool = False,
                         created_at: str | None = None) -> TransplantManifest:
        if icebox_ref is not None and not self.exists("icebox", icebox_ref):
            raise MissingArtifact(f"icebox {icebox_ref}")
        manifest = TransplantManifest(
            organ.feature_id, organ.donor_id, organ.entry_point, [], list(organ.boundary_symbols),
            icebox_ref, created_at or now_iso(),
        )

        def fill(tmp: Path) -> None:
            for rel, text in sorted(organ.sources.items()):
                _write_file(tmp / rel, text.encode("utf-8"))
            _write_file(tmp / "over-organ.json", organ.dumps().encode("utf-8"))
            manifest.files = _file_digests(tmp, {"manifest.json"})
            _write_file(tmp / "manifest.json", dumps(manifest.to_json()).encode("utf-8"))

        self._store("over-organ", organ.feature_id, fill, force)
        return manifest

    def over_organ_manifest(self, feature_id: str) -> TransplantManifest:
        return TransplantManifest.from_json(self._manifest("over-organ", feature_id)[1])

    def load_over_organ(self, feature_id: str) -> OverOrgan:
        d, m = self._manifest("over-organ", feature_id)
        manifest = TransplantManifest.from_json(m)
        _verify(d, manifest.files)
        if manifest.icebox_suite_ref is not None and not self.exists("icebox", manifest.icebox_suite_ref):
            raise MissingArtifact(f"icebox {manifest.icebox_suite_ref}")
        sources = {}
        for rel, _ in manifest.files:
            if rel.endswith((".c", ".h")):
                sources[rel] = (d / rel).read_text("utf-8")
        return OverOrgan.from_json(json.loads((d / "over-organ.json").read_text("utf-8")), sources)

    # ice-box suites -----------------------------------------------------------

    def store_icebox(self, feature_id: str, suite: TestSuite, force: bool = False) -> None:
        if not suite.tests:
            raise ValueError("an ice-box suite must contain at least one test")

        def fill(tmp: Path) -> None:
            save_suite(suite, tmp)
            files = _file_digests(tmp, {"manifest.json"})
            doc = {"featureId": feature_id, "files": [{"path": p, "digest": h} for p, h in files],
                   "createdAt": now_iso(), "toolVersion": __version__}
            _write_file(tmp / "manifest.json", dumps(doc).encode("utf-8"))

        self._store("icebox", feature_id, fill, force)

    def load_icebox(self, feature_id: str) -> TestSuite:
        d, m = self._manifest("icebox", feature_id)
        _verify(d, [(f["path"], f["digest"]) for f in m["files"]])
        return load_suite(d)

    # product bases ------------------------------------------------------------

    def store_product_base(self, base: ProductBase, force: bool = False) -> None:
        def fill(tmp: Path) -> None:
            for u in base.project.units:
                _write_file(tmp / "project" / u.path, u.text.encode("utf-8"))
            for kind, suite in sorted(base.suites.items()):
                save_suite(suite, tmp / "suites" / kind)
            files = _file_digests(tmp, {"manifest.json"})
            doc = {
                "id": base.id,
                "buildCommand": base.build_command,
                "insertionPoints": sorted(base.insertion_points, key=lambda x: json.dumps(x, sort_keys=True)),
                "suites": sorted(base.suites),
                "files": [{"path": p, "digest": h} for p, h in files],
                "createdAt": now_iso(),
                "toolVersion": __version__,
            }
            _write_file(tmp / "manifest.json", dumps(doc).encode("utf-8"))

        self._store("product-base", base.id, fill, force)

    def load_product_base(self, ident: str) -> ProductBase:
        d, m = self._manifest("product-base", ident)
        _verify(d, [(f["path"], f["digest"]) for f in m["files"]])
        project = load_project(d / "project") if (d / "project").is_dir() else ProjectModel(())
        suites = {k: load_suite(d / "suites" / k) for k in m.get("suites", [])}
        return ProductBase(m["id"], project, list(m.get("insertionPoints", [])), suites,
                           m.get("buildCommand", ""), str(d / "project"))

    # listing --------------------------------------------------------------------

    def list(self) -> list[ArtifactRow]:
        rows = []
        for kind, sub in KINDS.items():
            base = self.root / sub
            if not base.is_dir():
                continue
            for d in sorted(base.iterdir()):
                m = d / "manifest.json"
                if d.name.startswith(".") or not m.is_file():
                    continue
                doc = json.loads(m.read_text("utf-8"))
                rows.append(ArtifactRow(kind, d.name, len(doc.get("files", [])), doc.get("createdAt", "")))
        return rows


def _write_file(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def format_table(rows: list[ArtifactRow]) -> str:
    head = ("KIND", "ID", "FILES", "CREATED")
    body = [(r.kind, r.id, str(r.files), r.created_at) for r in rows]
    widths = [max(len(x[i]) for x in [head, *body]) for i in range(4)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in [head, *body]]
    return "\n".join(lines) + "\n"


def store_slices(organ: OverOrgan, root: str | os.PathLike, force: bool = False) -> Path:
    """Write an over-organ into the platform at ``root``; returns the manifest path."""
    Platform.init(root).store_over_organ(organ, force=force)
    return Path(root) / KINDS["over-organ"] / organ.feature_id / "manifest.json"
