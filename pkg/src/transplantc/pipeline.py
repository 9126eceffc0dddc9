"""The pipeline stages behind the command-line driver: host preparation,
extraction, adaptation, implantation and validation, plus the end-to-end
transplant that chains them."""

from __future__ import annotations

import json
import os
import posixpath
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .adaptation.gp import Evaluator, GpConfig, Organ, evolve
from .adaptation.host import HostContext, find_markers, host_context
from .adaptation.wrapper import RenderedWrapper, synthesize_wrapper
from .build import DEFAULT_BUILD
from .depgraph import build_sdg
from .errors import MarkerAmbiguous, MarkerNotFound, MissingSuite, UnknownEntryPoint
from .extractor import OverOrgan, extract_over_organ
from .frontend import ProjectModel, from_texts, load_project
from .implantation import PostoperativeProject, feature_macro, implant, report_json, write_project
from .platform import Platform, ProductBase, dumps
from .postop import STEPS, ValidationReport, promote_tests, validate, write_report
from .reconfigurator import FeatureDirectiveList, remove_features, strip_dead_directives
from .suites import TestSuite, load_suite, save_suite

SUITE_KINDS = ("icebox",) + STEPS


def read_seeds(path: str | os.PathLike) -> list[int]:
    """Whitespace-separated integers; ``#`` starts a comment."""
    seeds = []
    for line in Path(path).read_text("utf-8").splitlines():
        line = line.split("#", 1)[0]
        seeds.extend(int(x) for x in line.split())
    if not seeds:
        raise ValueError(f"{path}: no seeds")
    return seeds


def read_entry_points(target: str) -> dict[str, str] | str:
    """``--core_function_target``: a file listing ``[feature:] function`` lines,
    or a bare function name."""
    p = Path(target)
    if not p.is_file():
        return target
    out: dict[str, str] = {}
    for line in p.read_text("utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" in line:
            fid, fn = (x.strip() for x in line.split(":", 1))
        else:
            parts = line.split()
            fid, fn = (parts[0], parts[1]) if len(parts) == 2 else (parts[0], parts[0])
        out[fid] = fn
    return out


def choose_entry(entries: dict[str, str] | str, feature_id: str) -> str:
    if isinstance(entries, str):
        return entries
    if feature_id in entries:
        return entries[feature_id]
    if len(entries) == 1:
        return next(iter(entries.values()))
    raise UnknownEntryPoint(f"<no entry point listed for feature {feature_id}>")


def load_suites(folder: str | os.PathLike, kinds=SUITE_KINDS) -> dict[str, TestSuite]:
    folder = Path(folder)
    out = {}
    for kind in kinds:
        if not (folder / kind / "suite.json").is_file():
            raise MissingSuite(kind)
        out[kind] = load_suite(folder / kind).with_kind(kind)
    return out


def project_path(project_root: str | os.PathLike, path: str | None) -> str | None:
    """A path given on the command line, relative to the project root."""
    if path is None:
        return None
    root = Path(project_root).resolve()
    p = Path(path)
    cand = (p if p.is_absolute() else Path.cwd() / p).resolve()
    if cand.is_file() and root in cand.parents:
        return cand.relative_to(root).as_posix()
    if (root / p).is_file():
        return posixpath.normpath(p.as_posix())
    raise FileNotFoundError(path)


# -- stages ----------------------------------------------------------------------


def prepare_host(host_root: str, features: FeatureDirectiveList | None = None) -> ProjectModel:
    host = load_project(host_root)
    return remove_features(host, features) if features is not None else host


def prepare_donor(donor_root: str, enabled=()) -> ProjectModel:
    return strip_dead_directives(load_project(donor_root), enabled)


def extract_feature(donor: ProjectModel, entry: str, feature_id: str, donor_id: str,
                    donor_target: str | None = None, sdg_path: str | None = None) -> OverOrgan:
    sdg = build_sdg(donor)
    if sdg_path:
        Path(sdg_path).write_text(sdg.to_dot(), encoding="utf-8")
    if donor_target is not None:
        files = {sdg.nodes[i].file for i in sdg.function_ids(entry)}
        if donor_target not in files:
            raise UnknownEntryPoint(f"{entry} (not defined in {donor_target})")
    return extract_over_organ(donor, sdg, entry, feature_id, donor_id)


def adapt_feature(organ: OverOrgan, host: ProjectModel, ctx: HostContext, icebox: TestSuite,
                  config: GpConfig, host_root: str | None = None) -> Organ:
    wrapper = synthesize_wrapper(organ, ctx)
    ev = Evaluator(organ, wrapper, host, ctx, icebox, config, host_root=host_root)
    return evolve(organ, wrapper, ev, config)


def organ_to_json(organ: Organ) -> dict:
    f = organ.fitness
    return {
        "featureId": organ.feature_id,
        "seed": organ.seed,
        "generation": organ.generation,
        "mask": [int(b) for b in organ.individual.mask],
        "bindings": list(organ.individual.bindings),
        "fitness": {"compiled": f.compiled, "iceboxPassed": f.icebox_passed, "iceboxTotal": f.icebox_total,
                    "statementCount": f.statement_count},
        "wrapper": {"function": organ.wrapper.function, "prototype": organ.wrapper.prototype,
                    "callSite": organ.wrapper.call_site},
        "files": sorted(organ.sources),
        "evaluations": organ.evaluations,
    }


def save_organ(organ: Organ, folder: str | os.PathLike) -> None:
    folder = Path(folder)
    for rel, text in organ.sources.items():
        (folder / "files" / rel).parent.mkdir(parents=True, exist_ok=True)
        (folder / "files" / rel).write_text(text, encoding="utf-8")
    (folder / "organ.json").write_text(dumps(organ_to_json(organ)), encoding="utf-8")


def load_organ(folder: str | os.PathLike) -> tuple[dict, dict[str, str], RenderedWrapper]:
    folder = Path(folder)
    doc = json.loads((folder / "organ.json").read_text("utf-8"))
    sources = {rel: (folder / "files" / rel).read_text("utf-8") for rel in doc["files"]}
    w = doc["wrapper"]
    return doc, sources, RenderedWrapper(w["function"], w["prototype"], w["callSite"], ())


def implant_feature(host: ProjectModel, sources: dict[str, str], feature_id: str, ctx: HostContext,
                    wrapper: RenderedWrapper, flag: str | None, build_command: str) -> PostoperativeProject:
    return implant(host, from_texts(sources), feature_id, ctx, wrapper, flag, build_command)


# -- end to end ------------------------------------------------------------------


@dataclass
class TransplantRequest:
    donor_folder: str
    host_project: str
    workspace: str
    seeds: list[int]
    entry: dict[str, str] | str
    host_target: str | None = None
    donor_target: str | None = None
    feature_id: str | None = None
    suites_folder: str | None = None
    enable: tuple[str, ...] = ()
    host_features: FeatureDirectiveList | None = None
    flag: str | None = None
    build_command: str = DEFAULT_BUILD
    population: int = 40
    generations: int = 100
    jobs: int = 1
    test_timeout: float = 5.0
    emit_sdg: bool = False
    emit_report: bool = False
    promote: bool = False
    force: bool = False


@dataclass
class TransplantResult:
    report: ValidationReport
    organ: Organ
    postoperative: PostoperativeProject
    run_log: dict = field(default_factory=dict)


def feature_from_marker(host: ProjectModel, target: str | None) -> str:
    hits = find_markers(host)
    if target is not None:
        hits = [h for h in hits if h[0] == target]
    ids = sorted({h[2] for h in hits})
    if len(ids) != 1:
        if not ids:
            raise MarkerNotFound("no insertion marker /*@transplant:<id>*/ in host target")
        raise MarkerAmbiguous(f"several feature markers in host target: {', '.join(ids)}")
    return ids[0]


def transplant(req: TransplantRequest) -> TransplantResult:
    ws = Path(req.workspace)
    ws.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    suites = load_suites(req.suites_folder or ws / "suites")
    plat = Platform.init(ws / "platform")

    t0 = time.perf_counter()
    host = prepare_host(req.host_project, req.host_features)
    target = project_path(req.host_project, req.host_target)
    feature_id = req.feature_id or feature_from_marker(host, target)
    base_id = Path(req.host_project).resolve().name
    ctx = host_context(host, feature_id, base_id, req.build_command, target)
    regression = {k: suites[k] for k in STEPS}
    plat.store_product_base(
        ProductBase(base_id, host, [{"featureId": feature_id, "file": ctx.file, "function": ctx.function}],
                    {"regression": regression["regression"]}, req.build_command),
        force=True,
    )
    timings["hostPreparation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    donor = prepare_donor(req.donor_folder, req.enable)
    entry = choose_entry(req.entry, feature_id)
    donor_target = project_path(req.donor_folder, req.donor_target)
    donor_id = Path(req.donor_folder).resolve().name
    sdg_path = str(ws / "sdg.dot") if req.emit_sdg else None
    over = extract_feature(donor, entry, feature_id, donor_id, donor_target, sdg_path)
    plat.store_icebox(feature_id, suites["icebox"], force=req.force)
    plat.store_over_organ(over, icebox_ref=feature_id, force=req.force)
    timings["extraction"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    config = GpConfig(population_size=req.population, max_generations=req.generations,
                      seeds=tuple(req.seeds), jobs=req.jobs, evaluation_timeout=req.test_timeout,
                      build_command=req.build_command)
    base = plat.load_product_base(base_id)
    organ = adapt_feature(plat.load_over_organ(feature_id), base.project, ctx, plat.load_icebox(feature_id),
                          config, host_root=base.root)
    save_organ(organ, ws / "organs" / feature_id)
    timings["adaptation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    post = implant_feature(base.project, organ.sources, feature_id, ctx, organ.wrapper, req.flag, req.build_command)
    write_project(post.project, ws / "postoperative")
    clone_report = post.implant_log[-1][1]
    if req.emit_report:
        (ws / "clone-report.json").write_text(report_json(clone_report), encoding="utf-8")
    timings["merging"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    defines = [feature_macro(req.flag)] if req.flag else []
    report = validate(post.project, regression, req.build_command, req.test_timeout, req.jobs, defines=defines)
    write_report(report, ws / "validation-report.json")
    timings["validation"] = time.perf_counter() - t0

    if req.promote and report.verdict == "ok":
        promoted = promote_tests(suites["regression"], [suites["regression++"], suites["acceptance"]], report)
        plat.store_product_base(
            ProductBase(base_id, post.project, base.insertion_points, {"regression": promoted}, req.build_command),
            force=True,
        )
        save_suite(promoted, ws / "promoted-regression")

    log = run_log("transplant", req.seeds, feature_id, timings, report, organ, over)
    (ws / "run-log.json").write_text(dumps(log), encoding="utf-8")
    return TransplantResult(report, organ, post, log)


def run_log(command: str, seeds, feature_id: str | None, timings: dict[str, float],
            report: ValidationReport | None, organ: Organ | None, over: OverOrgan | None,
            error: str | None = None, trajectory=None) -> dict:
    doc: dict = {
        "command": command,
        "seeds": list(seeds or []),
        "featureId": feature_id,
        "toolVersion": __version__,
        "timings": {k: round(v, 3) for k, v in timings.items()},
        "verdict": report.verdict if report is not None else ("error" if error else None),
    }
    if report is not None:
        doc["suites"] = {s.kind: {"passed": s.passed, "total": s.total, "skipped": s.skipped} for s in report.suites}
    if over is not None:
        doc["overOrgan"] = {
            "entryPoint": over.entry_point,
            "files": over.files,
            "statementArray": len(over.statement_array),
            "boundarySymbols": over.boundary_symbols,
        }
    if organ is not None:
        doc["organ"] = {
            "seed": organ.seed,
            "generation": organ.generation,
            "statementCount": organ.statement_count,
            "evaluations": organ.evaluations,
        }
    if error is not None:
        doc["error"] = error
    if trajectory is not None:
        doc["trajectory"] = [list(t) for t in trajectory]
    return doc
