"""Run the bundled end-to-end transplant under several seeds and tabulate
the validation outcome of each run.

    python3 scripts/e2e_runs.py --runs 20 --out e2e-runs.json
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
import tempfile
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
E2E = ROOT / "tests" / "fixtures" / "e2e"


def one_run(ws: Path, seed: int, extra=()) -> dict:
    ws.mkdir(parents=True)
    seeds = ws / "seeds.txt"
    seeds.write_text(f"{seed}\n")
    argv = [sys.executable, "-m", "transplantc.cli", "transplant", "--workspace", str(ws),
            "--donor_folder", str(E2E / "donor"), "--host_project", str(E2E / "host"),
            "--core_function_target", "checksum_report", "--suites_folder", str(E2E / "suites"),
            "--seeds_file", str(seeds), *extra]
    t0 = time.perf_counter()
    proc = subprocess.run(argv, capture_output=True, text=True)
    row = {"seed": seed, "exit": proc.returncode, "seconds": round(time.perf_counter() - t0, 2)}
    report = ws / "validation-report.json"
    if report.is_file():
        doc = json.loads(report.read_text())
        row["verdict"] = doc["verdict"]
        row.update({s["kind"]: f"{s['passed']}/{s['total']}" for s in doc["suites"]})
    log = ws / "run-log.json"
    if log.is_file():
        organ = json.loads(log.read_text()).get("organ") or {}
        row["statements"] = organ.get("statementCount")
        row["generation"] = organ.get("generation")
    return row


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=1)
    ap.add_argument("--flag", help="Pass --flag to every run.")
    ap.add_argument("--out", help="Write the rows as JSON here.")
    args = ap.parse_args(argv)
    extra = ["--flag", args.flag] if args.flag else []
    rows = []
    with tempfile.TemporaryDirectory() as tmp:
        for seed in range(args.first_seed, args.first_seed + args.runs):
            row = one_run(Path(tmp) / f"seed{seed}", seed, extra)
            rows.append(row)
            print(" ".join(f"{k}={v}" for k, v in row.items()), flush=True)
    ok = sum(r.get("verdict") == "ok" for r in rows)
    print(f"{ok}/{len(rows)} runs ok, slowest {max(r['seconds'] for r in rows):.1f}s")
    if args.out:
        Path(args.out).write_text(json.dumps(rows, indent=2) + "\n")
    return 0 if ok == len(rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
