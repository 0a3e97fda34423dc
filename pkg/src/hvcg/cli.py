"""Command-line driver: verify, vcs, refine, simulate.

Exit codes follow the CI contract: 0 when everything proves, 1 when some
obligation is unknown or falsified (or a replay fails), 2 on malformed
input.  Reports are JSON with sorted keys and rationals printed exactly,
so a fixed seed gives byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import certify, discharge, dynamics, refine as refine_mod, vcgen
from .discharge import Interval
from .expr import eval_pred, pred_text, expr_text
from .parsing import (
    Declarations,
    HoareGoal,
    ParseError,
    RefineGoal,
    parse_problem,
    parse_script,
)
from .store import Store
from .syntax import program_text
from .vcgen import CertRequest, VC

SCHEMA = "hvcg-report/1"

EXIT_PROVED = 0
EXIT_UNPROVED = 1
EXIT_MALFORMED = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_MALFORMED):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# argument handling


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="hvcg")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--param", action="append", default=[], metavar="name=value",
                       help="bind a declared parameter to a rational")
        p.add_argument("--bounds", action="append", default=[], metavar="var=lo:hi",
                       help="box bounds for a variable (inf allowed)")
        p.add_argument("--budget", type=int, default=100_000,
                       help="interval branch-and-bound split budget")
        p.add_argument("--samples", type=int, default=10_000,
                       help="falsification sample count")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel VC discharge workers")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", metavar="report.json")

    p_verify = sub.add_parser("verify", help="generate, certify and discharge")
    p_verify.add_argument("file")
    common(p_verify)

    p_vcs = sub.add_parser("vcs", help="print the VC list without discharging")
    p_vcs.add_argument("file")
    common(p_vcs)

    p_ref = sub.add_parser("refine", help="replay a refinement script")
    p_ref.add_argument("file", help="refinement goal file")
    p_ref.add_argument("script", nargs="?", help="script path (defaults to the goal's 'by' clause)")
    common(p_ref)

    p_sim = sub.add_parser("simulate", help="seeded Monte-Carlo runs")
    p_sim.add_argument("file")
    p_sim.add_argument("--runs", type=int, default=100)
    p_sim.add_argument("--step", type=float, default=dynamics.DEFAULT_STEP)
    p_sim.add_argument("--horizon", type=float, default=dynamics.DEFAULT_HORIZON)
    p_sim.add_argument("--star-bound", type=int, default=16)
    p_sim.add_argument("--traj", type=int, default=0,
                       help="export the first N run trajectories as CSV")
    p_sim.add_argument("--traj-dir", default=".")
    common(p_sim)
    return top


def _parse_params(pairs: list[str], decls: Declarations) -> dict[str, Fraction]:
    out: dict[str, Fraction] = {}
    for pair in pairs:
        if "=" not in pair:
            raise CliError(f"bad --param {pair!r}, expected name=value")
        name, _, value = pair.partition("=")
        if name not in decls.parameters:
            raise CliError(f"--param {name!r} is not a declared parameter")
        try:
            out[name] = Fraction(value)
        except ValueError:
            raise CliError(f"--param {name!r}: {value!r} is not rational") from None
    return out


def _parse_bounds(pairs: list[str], decls: Declarations) -> dict[str, Interval]:
    """File-level bounds declarations first, CLI overrides per variable."""
    out: dict[str, Interval] = {}
    for name, lo, hi in decls.bounds:
        try:
            out[name] = Interval(lo, hi)
        except discharge.BoxError as e:
            raise CliError(f"bounds {name!r}: {e}") from None
    for pair in pairs:
        name, _, rng = pair.partition("=")
        lo_s, _, hi_s = rng.partition(":")
        if name not in decls.variables:
            raise CliError(f"--bounds {name!r} is not a declared variable")

        def side(text: str) -> Optional[Fraction]:
            if text in ("inf", "-inf", ""):
                return None
            try:
                return Fraction(text)
            except ValueError:
                raise CliError(f"--bounds {name!r}: {text!r} is not rational") from None

        try:
            out[name] = Interval(side(lo_s), side(hi_s))
        except discharge.BoxError as e:
            raise CliError(f"--bounds {name!r}: {e}") from None
    return out


def _check_params(goal, params: dict[str, Fraction]) -> None:
    needed = set(goal.decls.parameters)
    missing = sorted(needed - set(params))
    if missing:
        raise CliError(
            "unbound parameters (pass --param): " + ", ".join(missing)
        )
    for assumption in goal.decls.assumptions:
        if not eval_pred(assumption, {}, params):
            raise CliError(
                f"parameter binding violates assumption {pred_text(assumption)!r}"
            )


# ---------------------------------------------------------------------------
# report pieces


def _frac(v: Fraction) -> str:
    return str(v)


def _vc_json(vc: VC) -> dict:
    time = None
    if vc.time is not None:
        time = {
            "upper": None if vc.time.upper is None else expr_text(vc.time.upper),
            "history": None if vc.time.history is None else pred_text(vc.time.history),
        }
    return {
        "id": vc.vc_id,
        "rule": vc.rule,
        "hypotheses": [pred_text(h) for h in vc.hypotheses],
        "goal": pred_text(vc.goal),
        "time_binder": time,
    }


def _result_json(res: discharge.ProofResult) -> dict:
    cx = None
    if res.witness is not None:
        cx = {k: _frac(v) for k, v in sorted(res.witness.items())}
    return {
        "status": res.status,
        "method": res.method,
        "splits": res.splits,
        "counterexample": cx,
    }


def _cert_json(req: CertRequest, cert) -> dict:
    return {
        "kind": req.kind,
        "command": program_text(req.ode),
        "certificate": cert.as_json(),
    }


def _run_certificates(requests, assumptions):
    out = []
    ok = True
    for req in requests:
        ode = req.ode
        if req.kind == "flow":
            cert = certify.certify_flow(ode.field, ode.flow, ode.dom, assumptions)
            ok = ok and cert.certified
        else:
            cert = certify.diff_invariant(
                ode.dinv, ode.field, ode.guard, ode.dom, assumptions
            )
            ok = ok and cert.valid
        out.append(_cert_json(req, cert))
    return out, ok


def _discharge_one(args):
    vc, bounds, params, budget, samples, seed = args
    return discharge.prove(
        vc, bounds, params, budget=budget, falsify_samples=samples, seed=seed
    )


def _discharge_all(vcs, bounds, params, budget, samples, seed, jobs):
    tasks = [(vc, bounds, params, budget, samples, seed) for vc in vcs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_discharge_one, tasks))
    return [_discharge_one(t) for t in tasks]


def _emit(report: dict, out_path: Optional[str]) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def _load_goal(path: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}") from None
    try:
        return parse_problem(text)
    except ParseError as e:
        raise CliError(f"{path}:{e}") from None


def cmd_verify(args) -> int:
    goal = _load_goal(args.file)
    if not isinstance(goal, HoareGoal):
        raise CliError("verify expects a 'hoare' goal file")
    params = _parse_params(args.param, goal.decls)
    _check_params(goal, params)
    bounds = _parse_bounds(args.bounds, goal.decls)
    try:
        gen = vcgen.generate(goal)
    except vcgen.MissingAnnotationError as e:
        raise CliError(f"annotation error: {e}") from None
    certs, certs_ok = _run_certificates(gen.cert_requests, goal.decls.assumptions)
    results = _discharge_all(
        gen.vcs, bounds, params, args.budget, args.samples, args.seed, args.jobs
    )
    vcs_json = []
    all_proved = True
    for vc, res in zip(gen.vcs, results):
        entry = _vc_json(vc)
        entry.update(_result_json(res))
        vcs_json.append(entry)
        all_proved = all_proved and res.proved
    status = "proved" if (all_proved and certs_ok) else "unproved"
    code = EXIT_PROVED if status == "proved" else EXIT_UNPROVED
    report = {
        "schema": SCHEMA,
        "command": "verify",
        "file": args.file,
        "seed": args.seed,
        "budget": args.budget,
        "params": {k: _frac(v) for k, v in sorted(params.items())},
        "status": status,
        "exit_code": code,
        "vcs": vcs_json,
        "certificates": certs,
    }
    _emit(report, args.out)
    return code


def cmd_vcs(args) -> int:
    goal = _load_goal(args.file)
    if not isinstance(goal, HoareGoal):
        raise CliError("vcs expects a 'hoare' goal file")
    try:
        gen = vcgen.generate(goal)
    except vcgen.MissingAnnotationError as e:
        raise CliError(f"annotation error: {e}") from None
    report = {
        "schema": SCHEMA,
        "command": "vcs",
        "file": args.file,
        "count": len(gen.vcs),
        "vcs": [_vc_json(vc) for vc in gen.vcs],
        "certificate_obligations": [
            {"kind": r.kind, "command": program_text(r.ode)} for r in gen.cert_requests
        ],
    }
    _emit(report, args.out)
    return EXIT_PROVED


def cmd_refine(args) -> int:
    goal = _load_goal(args.file)
    if not isinstance(goal, RefineGoal):
        raise CliError("refine expects a 'refine' goal file")
    script_path = args.script or goal.script_path
    if script_path is None:
        raise CliError("no script given (argument or 'by' clause)")
    script_file = Path(script_path)
    if not script_file.is_absolute():
        script_file = Path(args.file).parent / script_file
    try:
        script = parse_script(script_file.read_text(), goal.decls)
    except OSError as e:
        raise CliError(f"cannot read script: {e}") from None
    except ParseError as e:
        raise CliError(f"{script_file}:{e}") from None
    params = _parse_params(args.param, goal.decls)
    _check_params(goal, params)
    bounds = _parse_bounds(args.bounds, goal.decls)

    report = {
        "schema": SCHEMA,
        "command": "refine",
        "file": args.file,
        "script": str(script_file),
        "seed": args.seed,
        "params": {k: _frac(v) for k, v in sorted(params.items())},
    }
    try:
        replayed = refine_mod.replay(script, goal)
    except refine_mod.RefinementError as e:
        report.update({"status": "failed", "error": str(e), "exit_code": EXIT_UNPROVED})
        _emit(report, args.out)
        return EXIT_UNPROVED
    certs, certs_ok = _run_certificates(replayed.cert_requests, goal.decls.assumptions)
    results = _discharge_all(
        replayed.vcs, bounds, params, args.budget, args.samples, args.seed, args.jobs
    )
    vcs_json = []
    all_proved = True
    for vc, res in zip(replayed.vcs, results):
        entry = _vc_json(vc)
        entry.update(_result_json(res))
        vcs_json.append(entry)
        all_proved = all_proved and res.proved
    status = "proved" if (all_proved and certs_ok) else "unproved"
    code = EXIT_PROVED if status == "proved" else EXIT_UNPROVED
    report.update(
        {
            "status": status,
            "exit_code": code,
            "final_program": program_text(replayed.final),
            "target_matched": True,
            "steps": [
                {
                    "law": s.law,
                    "path": ".".join(str(i) for i in s.path) or ".",
                    "vcs": [vc.vc_id for vc in s.vcs],
                }
                for s in replayed.steps
            ],
            "vcs": vcs_json,
            "certificates": certs,
        }
    )
    _emit(report, args.out)
    return code


def cmd_simulate(args) -> int:
    goal = _load_goal(args.file)
    if not isinstance(goal, HoareGoal):
        raise CliError("simulate expects a 'hoare' goal file")
    params = _parse_params(args.param, goal.decls)
    _check_params(goal, params)
    bounds = _parse_bounds(args.bounds, goal.decls)
    var_order = goal.decls.variables
    sim = dynamics.Simulator(
        var_order, params, step=args.step, horizon=args.horizon,
        star_bound=args.star_bound,
    )
    master = random.Random(args.seed)
    violations = []
    infeasible = 0
    completed = 0
    traj_files = []
    for run_idx in range(args.runs):
        rng = random.Random(master.randrange(2**63))
        store = _sample_initial(goal, bounds, var_order, sim, rng, params)
        if store is None:
            infeasible += 1
            continue
        trace: Optional[list] = [] if run_idx < args.traj else None
        out = sim.run(goal.program, store, rng, trace=trace)
        if isinstance(out, dynamics.Infeasible):
            infeasible += 1
            continue
        completed += 1
        if not sim.check(goal.post, out, slack=dynamics.VIOLATION_SLACK):
            violations.append(
                {"run": run_idx, "final": {k: float(v) for k, v in out.items}}
            )
        if trace:
            path = Path(args.traj_dir) / f"run{run_idx:03d}.csv"
            with open(path, "w") as fh:
                dynamics.export_trajectory_csv(
                    dynamics.Trajectory(args.step, trace), fh
                )
            traj_files.append(str(path))
    report = {
        "schema": SCHEMA,
        "command": "simulate",
        "file": args.file,
        "seed": args.seed,
        "runs": args.runs,
        "completed": completed,
        "infeasible": infeasible,
        "violations": violations,
        "violation_count": len(violations),
        "trajectories": traj_files,
        "params": {k: _frac(v) for k, v in sorted(params.items())},
    }
    _emit(report, args.out)
    return EXIT_PROVED if not violations else EXIT_UNPROVED


def _sample_initial(goal, bounds, var_order, sim, rng, params):
    """A precondition-satisfying initial store; equalities in the
    precondition pin variables exactly, the rest are sampled in the box."""
    point = discharge.sample_pred_point(goal.pre, bounds, params, rng)
    if point is None:
        return None
    values = {name: point.get(name, Fraction(0)) for name in var_order}
    return Store(tuple((name, float(values[name])) for name in var_order))


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "verify": cmd_verify,
        "vcs": cmd_vcs,
        "refine": cmd_refine,
        "simulate": cmd_simulate,
    }
    try:
        return handlers[args.command](args)
    except CliError as e:
        print(f"hvcg: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
