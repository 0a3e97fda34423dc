#!/usr/bin/env python3
"""Monte-Carlo cross-check of the verified corpus: seeded runs from
precondition-satisfying initial states must never violate the
postcondition.  Also exports a few demonstration trajectories as CSV.
"""

import argparse
import sys
from pathlib import Path

from hvcg.cli import main as hvcg_main
from verify_corpus import BALL, CORPUS, TANK, THERM

SYSTEMS = [
    ("bouncing_ball.hyb", BALL),
    ("tank_dinv.hyb", TANK),
    ("thermostat.hyb", THERM),
]


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--runs", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=2718)
    parser.add_argument("--out", default="reports")
    args = parser.parse_args()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    bad = 0
    for name, params in SYSTEMS:
        report = outdir / f"simulate-{name}.json"
        code = hvcg_main(
            ["simulate", str(CORPUS / name)] + params
            + ["--runs", str(args.runs), "--seed", str(args.seed),
               "--traj", "2", "--traj-dir", str(outdir), "--out", str(report)]
        )
        status = "ok" if code == 0 else f"VIOLATIONS (exit {code})"
        bad += 0 if code == 0 else 1
        print(f"simulate {name:28s} {args.runs} runs -> {status}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
