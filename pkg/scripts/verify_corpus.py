#!/usr/bin/env python3
"""Reproduce the full verification corpus: the three verified systems, the
two refinement derivations and the three unsound mutants.

Writes one JSON report per goal into --out (default: reports/) and prints
a one-line summary each.  Exit status is nonzero when any expected outcome
is missed.
"""

import argparse
import sys
from pathlib import Path

from hvcg.cli import main as hvcg_main

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

BALL = ["--param", "g=-1", "--param", "h=1"]
TANK = ["--param", "ci=2", "--param", "co=1", "--param", "hl=4",
        "--param", "hh=10", "--param", "tmax=1"]
THERM = ["--param", "a=1", "--param", "Tl=18", "--param", "Th=22",
         "--param", "Tu=30", "--param", "tmax=0.1"]

JOBS = [
    ("verify", "bouncing_ball.hyb", BALL, 0),
    ("verify", "tank_dinv.hyb", TANK, 0),
    ("verify", "thermostat.hyb", THERM, 0),
    ("refine", "thermostat_refine.hyb", THERM, 0),
    ("refine", "tank_refine.hyb", TANK, 0),
    ("verify", "bouncing_ball_bad.hyb", BALL, 1),
    ("verify", "tank_dinv_bad.hyb", TANK, 1),
    ("verify", "thermostat_bad.hyb", THERM, 1),
]


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="reports")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    bad = 0
    for command, name, params, expected in JOBS:
        report = outdir / f"{command}-{name}.json"
        code = hvcg_main(
            [command, str(CORPUS / name)] + params
            + ["--seed", str(args.seed), "--out", str(report)]
        )
        ok = code == expected
        bad += 0 if ok else 1
        status = "ok" if ok else f"UNEXPECTED exit {code} (wanted {expected})"
        print(f"{command:8s} {name:28s} -> {status}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
