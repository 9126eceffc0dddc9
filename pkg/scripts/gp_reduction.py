"""Inject k dead statements into the sample over-organ and check, for each
seed, that the GP search removes them all.

Each returned organ is implanted, built with coverage and run against the
ice-box tests; a run counts as fully reduced when no injected statement is
left and no organ line is unexecuted.

    python3 scripts/gp_reduction.py --k 1 3 5 --runs 20
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from conftest import FIXTURES, sum_icebox  # noqa: E402
from harness import reduction_trial  # noqa: E402

from transplantc.adaptation.gp import GpConfig  # noqa: E402


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--k", type=int, nargs="+", default=[1, 3, 5])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--pop", type=int, default=6)
    ap.add_argument("--gens", type=int, default=10)
    ap.add_argument("--reduction-gens", type=int, default=1, dest="reduction_gens")
    ap.add_argument("--out", help="Write every trial as JSON here.")
    args = ap.parse_args(argv)
    config = GpConfig(population_size=args.pop, max_generations=args.gens,
                      reduction_generations=args.reduction_gens)
    trials = []
    for k in args.k:
        rows = [reduction_trial(FIXTURES / "d1", FIXTURES / "tiny" / "host", sum_icebox(), k, seed, config)
                for seed in range(1, args.runs + 1)]
        trials += rows
        organs = [r for r in rows if r["outcome"] == "organ"]
        reduced = sum(r["deadLeft"] == 0 and not r["unexecuted"] for r in organs)
        safe = sum(r["icebox"][0] == r["icebox"][1] for r in organs)
        print(f"k={k}: {reduced}/{len(rows)} fully reduced; {safe}/{len(organs)} organs pass the ice-box; "
              f"other outcomes: {sorted({r['outcome'] for r in rows} - {'organ'})}")
    if args.out:
        Path(args.out).write_text(json.dumps(trials, indent=2, default=str) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
