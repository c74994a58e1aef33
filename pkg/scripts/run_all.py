"""Run every statistical experiment with one seed and collect the verdicts.

Usage: python3 scripts/run_all.py --out runs/full [--samples N] [--seed S]

Without ``--samples`` each experiment uses its own default sample count
(about 25 minutes on one core).  Writes ``verdicts.json`` next to the
per-experiment outputs and exits 2 if any verdict fails.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from randmetric import harness


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/full")
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--samples", type=int, default=-1, help="override every experiment's sample count")
    ap.add_argument("--schedule", default="power:s=2")
    args = ap.parse_args(argv)

    rows = {}
    for name in ("law-match", "tail-sweep", "lipschitz-tail", "sandwich"):
        cfg = harness.ExperimentConfig(experiment=name, seed=args.seed, out=args.out,
                                       samples=args.samples, schedule=args.schedule,
                                       angular=name == "sandwich")
        t0 = time.time()
        man = harness.EXPERIMENTS[name](cfg)
        rows[name] = {"verdict": man.verdict, "seconds": round(time.time() - t0, 1)}
        print(f"{name:16s} verdict={man.verdict!s:5s} {rows[name]['seconds']:8.1f}s", flush=True)
    Path(args.out, "verdicts.json").write_text(json.dumps(rows, indent=2) + "\n")
    return 2 if any(r["verdict"] is False for r in rows.values()) else 0


if __name__ == "__main__":
    sys.exit(main())
