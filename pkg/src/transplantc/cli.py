"""Command-line driver.

Exit codes: 0 success, 1 validation broken, 2 usage error, 3 any other error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .adaptation.gp import GpConfig
from .adaptation.host import find_markers, host_context
from .build import DEFAULT_BUILD
from .errors import NoViableOrganFound, TransplantError
from .frontend import load_project
from .implantation import feature_macro, report_json, write_project
from .platform import FeatureModel, Platform, ProductBase, dumps, format_table
from .postop import STEPS, promote_tests, validate, write_report
from .reconfigurator import DELETE_GUARDED, KEEP_STRIP_GUARDS, FeatureDirectiveList
from .suites import load_suite
from . import pipeline

log = logging.getLogger("transplantc")

EXIT_OK, EXIT_BROKEN, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 2 with help
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, workspace_required: bool = True) -> None:
    p.add_argument("--workspace", required=workspace_required, help="The path to the workspace of the transplant.")
    p.add_argument("--jobs", type=int, default=1, help="Upper bound on internal parallelism.")
    p.add_argument("--test-timeout-secs", type=float, default=5.0, dest="test_timeout", help="Per-test timeout.")
    p.add_argument("--force", action="store_true", help="Overwrite existing platform artifacts.")
    p.add_argument("--build-command", default=DEFAULT_BUILD, help="Build template with {out} and {sources}.")
    p.add_argument("-v", "--verbose", action="store_true")


def _gp(p: argparse.ArgumentParser, seeds_required: bool = True) -> None:
    p.add_argument("--seeds_file", required=seeds_required, help="File of seeds for the GP search.")
    p.add_argument("--gp-pop", type=int, default=40, dest="gp_pop", help="GP population size.")
    p.add_argument("--gp-gens", type=int, default=100, dest="gp_gens", help="GP generation limit.")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="transplantc", description="Feature transplantation for C product lines.")
    ap.add_argument("--version", action="version", version=f"transplantc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("init", help="Create an empty transplantation platform in the workspace.")
    _common(p)
    p.add_argument("--features_file", help="Feature model JSON to install.")

    p = sub.add_parser("reduce-host", help="Remove features from a host and store it as a product base.")
    _common(p)
    p.add_argument("--host_project", required=True, help="The path to the product base source code.")
    p.add_argument("--features_file", help="Feature directive list naming the features to remove.")
    p.add_argument("--features-mode", choices=[DELETE_GUARDED, KEEP_STRIP_GUARDS], dest="features_mode")
    p.add_argument("--product-base-id", dest="product_base_id")
    p.add_argument("--suites_folder", help="Folder holding a regression suite to keep with the product base.")

    p = sub.add_parser("extract", help="Extract an over-organ from a donor into the platform.")
    _common(p)
    p.add_argument("--donor_folder", required=True, help="The path to the donor source code.")
    p.add_argument("--core_function_target", required=True,
                   help="Entry-point list file, or the entry-point function name itself.")
    p.add_argument("--donor_target", help="The file in the donor that contains the core function.")
    p.add_argument("--feature-id", dest="feature_id")
    p.add_argument("--enable", action="append", default=[], help="Macro defined while preparing the donor.")
    p.add_argument("--icebox", help="Ice-box suite folder to store with the over-organ.")
    p.add_argument("--emit-sdg", action="store_true", dest="emit_sdg", help="Write the dependence graph as DOT.")

    p = sub.add_parser("adapt", help="Reduce and specialize a stored over-organ for a product base.")
    _common(p)
    _gp(p)
    p.add_argument("--feature-id", dest="feature_id", required=True)
    p.add_argument("--product-base-id", dest="product_base_id", required=True)
    p.add_argument("--host_target", help="The file in host that contains the insertion point.")

    p = sub.add_parser("implant", help="Implant an adapted organ into its product base.")
    _common(p)
    p.add_argument("--feature-id", dest="feature_id", required=True)
    p.add_argument("--product-base-id", dest="product_base_id", required=True)
    p.add_argument("--host_target", help="The file in host that contains the insertion point.")
    p.add_argument("--flag", help="Guard the implant with #ifdef FEATURE_<flag>.")
    p.add_argument("--emit-report", action="store_true", dest="emit_report", help="Write clone-report.json.")

    p = sub.add_parser("validate", help="Run regression, regression++ and acceptance suites.")
    _common(p)
    p.add_argument("--project", help="Project to validate (default: <workspace>/postoperative).")
    p.add_argument("--suites_folder", help="Folder with regression, regression++ and acceptance suites.")
    p.add_argument("--promote", action="store_true", help="Promote the new suites when validation passes.")
    p.add_argument("--flag", help="Build with -DFEATURE_<flag> for a guarded implant.")
    p.add_argument("--product-base-id", dest="product_base_id", help="Product base receiving promoted tests.")

    p = sub.add_parser("transplant", help="Extract, adapt, implant and validate in one run.")
    _common(p)
    _gp(p)
    p.add_argument("--donor_folder", required=True, help="The path to the donor source code.")
    p.add_argument("--host_project", required=True, help="The path to the product base source code.")
    p.add_argument("--core_function_target", required=True,
                   help="Entry-point list file, or the entry-point function name itself.")
    p.add_argument("--host_target", help="The file in host that contains the insertion point.")
    p.add_argument("--donor_target", help="The file in the donor that contains the core function.")
    p.add_argument("--feature-id", dest="feature_id")
    p.add_argument("--suites_folder", help="Folder with icebox, regression, regression++, acceptance suites.")
    p.add_argument("--features_file", help="Feature directive list applied to the host first.")
    p.add_argument("--features-mode", choices=[DELETE_GUARDED, KEEP_STRIP_GUARDS], dest="features_mode")
    p.add_argument("--enable", action="append", default=[], help="Macro defined while preparing the donor.")
    p.add_argument("--flag", help="Guard the implant with #ifdef FEATURE_<flag>.")
    p.add_argument("--emit-sdg", action="store_true", dest="emit_sdg")
    p.add_argument("--emit-report", action="store_true", dest="emit_report")
    p.add_argument("--promote", action="store_true")

    p = sub.add_parser("platform", help="Inspect the transplantation platform.")
    psub = p.add_subparsers(dest="platform_command", required=True, parser_class=_Parser)
    ls = psub.add_parser("ls", help="List stored artifacts.")
    ls.add_argument("--workspace", required=True)
    return ap


# -- flag checks (before anything touches the filesystem) ------------------------


def _need_dir(ap, flag: str, value: str | None) -> None:
    if value is not None and not Path(value).is_dir():
        ap.error(f"{flag}: not a directory: {value}")


def _need_file(ap, flag: str, value: str | None) -> None:
    if value is not None and not Path(value).is_file():
        ap.error(f"{flag}: no such file: {value}")


def _seeds(ap, path: str) -> list[int]:
    _need_file(ap, "--seeds_file", path)
    try:
        return pipeline.read_seeds(path)
    except ValueError as exc:
        ap.error(f"--seeds_file: {exc}")


def _fdl(ap, path: str | None, mode: str | None) -> FeatureDirectiveList | None:
    if path is None:
        if mode is not None:
            ap.error("--features-mode needs --features_file")
        return None
    _need_file(ap, "--features_file", path)
    try:
        fdl = FeatureDirectiveList.load(path)
    except ValueError as exc:
        ap.error(f"--features_file: {exc}")
    return FeatureDirectiveList(fdl.removals, mode) if mode else fdl


def _in_project(ap, flag: str, root: str, path: str | None) -> str | None:
    try:
        return pipeline.project_path(root, path)
    except FileNotFoundError:
        ap.error(f"{flag}: {path} is not a file of {root}")


def _positive(ap, args) -> None:
    for flag, attr in (("--jobs", "jobs"), ("--gp-pop", "gp_pop"), ("--gp-gens", "gp_gens")):
        v = getattr(args, attr, None)
        if v is not None and v < (2 if attr == "gp_pop" else 0 if attr == "gp_gens" else 1):
            ap.error(f"{flag}: value {v} out of range")
    if getattr(args, "test_timeout", 1) <= 0:
        ap.error("--test-timeout-secs must be positive")


# -- commands ----------------------------------------------------------------------


def _platform(args, create: bool = False) -> Platform:
    root = Path(args.workspace) / "platform"
    return Platform.init(root) if create else Platform.open(root)


def cmd_init(ap, args) -> int:
    model = None
    if args.features_file:
        _need_file(ap, "--features_file", args.features_file)
        try:
            model = FeatureModel.from_json(json.loads(Path(args.features_file).read_text("utf-8")))
        except (ValueError, KeyError) as exc:
            ap.error(f"--features_file: {exc}")
    _platform(args, create=True)
    if model is not None:
        Platform(Path(args.workspace) / "platform").save_feature_model(model)
    print(f"initialized platform in {Path(args.workspace) / 'platform'}")
    return EXIT_OK


def cmd_reduce_host(ap, args) -> int:
    _need_dir(ap, "--host_project", args.host_project)
    _need_dir(ap, "--suites_folder", args.suites_folder)
    fdl = _fdl(ap, args.features_file, args.features_mode)
    plat = _platform(args)
    host = pipeline.prepare_host(args.host_project, fdl)
    base_id = args.product_base_id or Path(args.host_project).resolve().name
    suites = {}
    if args.suites_folder:
        suites = pipeline.load_suites(args.suites_folder, ("regression",))
    points = []
    for path, _, fid in find_markers(host):
        ctx = host_context(host, fid, base_id, args.build_command, path)
        points.append({"featureId": fid, "file": ctx.file, "function": ctx.function})
    plat.store_product_base(ProductBase(base_id, host, points, suites, args.build_command), force=args.force)
    print(f"stored product base {base_id} ({len(host.paths)} files, {len(points)} insertion points)")
    return EXIT_OK


def cmd_extract(ap, args) -> int:
    _need_dir(ap, "--donor_folder", args.donor_folder)
    _need_dir(ap, "--icebox", args.icebox)
    donor_target = _in_project(ap, "--donor_target", args.donor_folder, args.donor_target)
    entries = pipeline.read_entry_points(args.core_function_target)
    if isinstance(entries, dict) and not args.feature_id and len(entries) != 1:
        ap.error("--feature-id is required when --core_function_target lists several entry points")
    fid = args.feature_id or (next(iter(entries)) if isinstance(entries, dict) else entries)
    entry = pipeline.choose_entry(entries, fid)
    plat = _platform(args)
    ws = Path(args.workspace)
    t0 = time.perf_counter()
    donor = pipeline.prepare_donor(args.donor_folder, args.enable)
    over = pipeline.extract_feature(donor, entry, fid, Path(args.donor_folder).resolve().name, donor_target,
                                    str(ws / "sdg.dot") if args.emit_sdg else None)
    ref = None
    if args.icebox:
        plat.store_icebox(fid, load_suite(args.icebox).with_kind("icebox"), force=args.force)
        ref = fid
    plat.store_over_organ(over, icebox_ref=ref, force=args.force)
    _write_log(ws, pipeline.run_log("extract", [], fid, {"extraction": time.perf_counter() - t0}, None, None, over))
    print(f"stored over-organ {fid}: {len(over.files)} files, {len(over.statement_array)} statement entries")
    return EXIT_OK


def cmd_adapt(ap, args) -> int:
    seeds = _seeds(ap, args.seeds_file)
    plat = _platform(args)
    base = plat.load_product_base(args.product_base_id)
    target = _in_project(ap, "--host_target", base.root, args.host_target) if args.host_target else None
    ctx = host_context(base.project, args.feature_id, base.id, args.build_command, target)
    over = plat.load_over_organ(args.feature_id)
    icebox = plat.load_icebox(args.feature_id)
    config = GpConfig(population_size=args.gp_pop, max_generations=args.gp_gens, seeds=tuple(seeds),
                      jobs=args.jobs, evaluation_timeout=args.test_timeout, build_command=args.build_command)
    ws = Path(args.workspace)
    t0 = time.perf_counter()
    try:
        organ = pipeline.adapt_feature(over, base.project, ctx, icebox, config, base.root)
    except NoViableOrganFound as exc:
        _write_log(ws, pipeline.run_log("adapt", seeds, args.feature_id, {"adaptation": time.perf_counter() - t0},
                                        None, None, over, str(exc), exc.trajectory))
        raise
    pipeline.save_organ(organ, ws / "organs" / args.feature_id)
    _write_log(ws, pipeline.run_log("adapt", seeds, args.feature_id, {"adaptation": time.perf_counter() - t0},
                                    None, organ, over))
    print(f"organ {args.feature_id}: {organ.statement_count} statements, seed {organ.seed}, "
          f"generation {organ.generation}")
    return EXIT_OK


def cmd_implant(ap, args) -> int:
    ws = Path(args.workspace)
    folder = ws / "organs" / args.feature_id
    if not (folder / "organ.json").is_file():
        ap.error(f"--feature-id: no adapted organ in {folder} (run 'transplantc adapt' first)")
    plat = _platform(args)
    base = plat.load_product_base(args.product_base_id)
    target = _in_project(ap, "--host_target", base.root, args.host_target) if args.host_target else None
    ctx = host_context(base.project, args.feature_id, base.id, args.build_command, target)
    _, sources, wrapper = pipeline.load_organ(folder)
    t0 = time.perf_counter()
    post = pipeline.implant_feature(base.project, sources, args.feature_id, ctx, wrapper, args.flag,
                                    args.build_command)
    write_project(post.project, ws / "postoperative")
    if args.emit_report:
        (ws / "clone-report.json").write_text(report_json(post.implant_log[-1][1]), encoding="utf-8")
    _write_log(ws, pipeline.run_log("implant", [], args.feature_id, {"merging": time.perf_counter() - t0},
                                    None, None, None))
    print(f"postoperative project written to {ws / 'postoperative'}")
    return EXIT_OK


def cmd_validate(ap, args) -> int:
    ws = Path(args.workspace)
    project_dir = args.project or str(ws / "postoperative")
    _need_dir(ap, "--project", project_dir)
    suites_dir = args.suites_folder or str(ws / "suites")
    _need_dir(ap, "--suites_folder", suites_dir)
    if args.promote and not args.product_base_id:
        ap.error("--promote needs --product-base-id")
    suites = pipeline.load_suites(suites_dir, STEPS)
    project = load_project(project_dir)
    t0 = time.perf_counter()
    defines = [feature_macro(args.flag)] if args.flag else []
    report = validate(project, suites, args.build_command, args.test_timeout, args.jobs, defines=defines)
    ws.mkdir(parents=True, exist_ok=True)
    write_report(report, ws / "validation-report.json")
    _write_log(ws, pipeline.run_log("validate", [], None, {"validation": time.perf_counter() - t0},
                                    report, None, None))
    print(report.summary())
    if args.promote and report.verdict == "ok":
        plat = _platform(args)
        base = plat.load_product_base(args.product_base_id)
        old = base.suites.get("regression") or suites["regression"]
        promoted = promote_tests(old, [suites["regression++"], suites["acceptance"]], report)
        plat.store_product_base(ProductBase(base.id, project, base.insertion_points, {"regression": promoted},
                                            base.build_command), force=True)
        print(f"promoted regression suite: {len(promoted.tests)} tests")
    return EXIT_OK if report.verdict == "ok" else EXIT_BROKEN


def cmd_transplant(ap, args) -> int:
    _need_dir(ap, "--donor_folder", args.donor_folder)
    _need_dir(ap, "--host_project", args.host_project)
    seeds = _seeds(ap, args.seeds_file)
    fdl = _fdl(ap, args.features_file, args.features_mode)
    _in_project(ap, "--host_target", args.host_project, args.host_target)
    _in_project(ap, "--donor_target", args.donor_folder, args.donor_target)
    suites_dir = args.suites_folder or str(Path(args.workspace) / "suites")
    _need_dir(ap, "--suites_folder", suites_dir)
    req = pipeline.TransplantRequest(
        donor_folder=args.donor_folder,
        host_project=args.host_project,
        workspace=args.workspace,
        seeds=seeds,
        entry=pipeline.read_entry_points(args.core_function_target),
        host_target=args.host_target,
        donor_target=args.donor_target,
        feature_id=args.feature_id,
        suites_folder=suites_dir,
        enable=tuple(args.enable),
        host_features=fdl,
        flag=args.flag,
        build_command=args.build_command,
        population=args.gp_pop,
        generations=args.gp_gens,
        jobs=args.jobs,
        test_timeout=args.test_timeout,
        emit_sdg=args.emit_sdg,
        emit_report=args.emit_report,
        promote=args.promote,
        force=args.force,
    )
    try:
        result = pipeline.transplant(req)
    except NoViableOrganFound as exc:
        _write_log(Path(args.workspace), pipeline.run_log("transplant", seeds, args.feature_id, {}, None, None,
                                                          None, str(exc), exc.trajectory))
        raise
    print(result.report.summary())
    return EXIT_OK if result.report.verdict == "ok" else EXIT_BROKEN


def cmd_platform(ap, args) -> int:
    plat = Platform.open(Path(args.workspace) / "platform")
    sys.stdout.write(format_table(plat.list()))
    return EXIT_OK


def _write_log(ws: Path, doc: dict) -> None:
    ws.mkdir(parents=True, exist_ok=True)
    (ws / "run-log.json").write_text(dumps(doc), encoding="utf-8")


COMMANDS = {
    "init": cmd_init,
    "reduce-host": cmd_reduce_host,
    "extract": cmd_extract,
    "adapt": cmd_adapt,
    "implant": cmd_implant,
    "validate": cmd_validate,
    "transplant": cmd_transplant,
    "platform": cmd_platform,
}


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    _positive(ap, args)
    try:
        return COMMANDS[args.command](ap, args)
    except SystemExit:
        raise
    except (TransplantError, OSError, ValueError) as exc:
        print(f"transplantc: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
