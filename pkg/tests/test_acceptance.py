"""Acceptance gate: every shipped claim, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one line per
criterion.  Budgets and tolerances are pinned here, not configurable.
"""

import json
import random
import time
from fractions import Fraction


from conftest import BALL_PARAMS, TANK_PARAMS, THERM_PARAMS
from kat_laws import run_law_suite

from hvcg import certify, discharge, vcgen
from hvcg.cli import main
from hvcg.expr import (
    Cmp, EQ, EvalDomainError, LT, Var, eval_expr, lit,
)
from hvcg.kat import (
    FinSpace, all_tests, all_transformers, hoare_valid, refines,
    spec_statement,
)
from hvcg.parsing import parse_problem
from hvcg.refine import replay
from hvcg.store import Lens, StateUpdate, Store, substitute
from hvcg.syntax import Ode


def _report(name: str, detail: str = ""):
    print(f"ACCEPTANCE {name}: PASS {detail}".rstrip())


PARAM_SETS = {
    "bouncing_ball.hyb": BALL_PARAMS,
    "tank_dinv.hyb": TANK_PARAMS,
    "thermostat.hyb": THERM_PARAMS,
}
MUTANTS = {
    "bouncing_ball_bad.hyb": BALL_PARAMS,
    "tank_dinv_bad.hyb": TANK_PARAMS,
    "thermostat_bad.hyb": THERM_PARAMS,
}


def _fractions(pairs):
    out = {}
    for flag, binding in zip(pairs[::2], pairs[1::2]):
        assert flag == "--param"
        name, _, value = binding.partition("=")
        out[name] = Fraction(value)
    return out


# -- criterion 1: the algebra oracle ---------------------------------------------------


def test_algebra_oracle_laws_hold_on_10k_instances():
    start = time.monotonic()
    failures = run_law_suite(10_000, seed=2024, max_n=4)
    elapsed = time.monotonic() - start
    assert failures == [], failures[:5]
    assert elapsed < 120.0, f"law suite took {elapsed:.1f}s"
    _report("algebra-oracle", f"(10000 instances, {elapsed:.1f}s)")


def test_algebra_oracle_spec_statement_extremality():
    start = time.monotonic()
    for n in (1, 2, 3):
        space = FinSpace(n)
        transformers = list(all_transformers(space))
        for p in all_tests(space):
            for q in all_tests(space):
                greatest = spec_statement(p, q)
                assert hoare_valid(p, greatest, q)
                for f in transformers:
                    assert hoare_valid(p, f, q) == refines(f, greatest)
    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    _report("spec-statement-extremality", f"(exhaustive n<=3, {elapsed:.1f}s)")


# -- criterion 2: lens and store laws ----------------------------------------------------


def test_lens_and_assignment_laws_on_1000_stores():
    start = time.monotonic()
    rng = random.Random(31)
    names = ("x", "y", "z")

    def rand_store():
        return Store(
            tuple((n, Fraction(rng.randint(-50, 50), rng.randint(1, 9))) for n in names)
        )

    def rand_expr(depth=2):
        if depth == 0 or rng.random() < 0.3:
            return Var(rng.choice(names)) if rng.random() < 0.6 else lit(rng.randint(-9, 9))
        a, b = rand_expr(depth - 1), rand_expr(depth - 1)
        return {0: a + b, 1: a - b, 2: a * b}[rng.randrange(3)]

    x, y = Lens("x"), Lens("y")
    for _ in range(1000):
        s = rand_store()
        val, val2 = Fraction(rng.randint(-9, 9)), Fraction(rng.randint(-9, 9))
        # the three lens laws
        assert x.get(x.put(s, val)) == val
        assert x.put(x.put(s, val2), val) == x.put(s, val)
        assert x.put(s, x.get(s)) == s
        e, f = rand_expr(), rand_expr()
        # x := x is skip
        assert StateUpdate.seq((("x", Var("x")),)).apply(s) == s
        # consecutive writes collapse through substitution
        two = StateUpdate.seq((("x", e), ("x", f)))
        one = StateUpdate.seq((("x", substitute(f, "x", e)),))
        assert two.apply(s) == one.apply(s)
        # independent writes commute when neither side reads the other target
        e_z = substitute(e, "x", Var("z"))
        e_z = substitute(e_z, "y", Var("z"))
        f_z = substitute(f, "x", Var("z"))
        f_z = substitute(f_z, "y", Var("z"))
        ab = StateUpdate.seq((("x", e_z), ("y", f_z)))
        ba = StateUpdate.seq((("y", f_z), ("x", e_z)))
        assert ab.apply(s) == ba.apply(s)
        # update/substitution coherence (drives the assignment rule)
        u = StateUpdate.seq((("x", e), ("y", f)))
        probe = rand_expr()
        assert eval_expr(u.subst(probe), s.as_dict()) == eval_expr(
            probe, u.apply(s).as_dict()
        )
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"store laws took {elapsed:.1f}s"
    _report("lens-store-laws", f"(1000 stores, {elapsed:.1f}s)")


# -- criterion 3: differentiation vs finite differences ------------------------------------


def test_differentiation_vs_central_differences_100_expressions():
    from hvcg.expr import Exp, Ln, Pow, TAU, differentiate

    rng = random.Random(77)
    names = ("x", "v")

    def rand_smooth(depth):
        if depth == 0:
            k = rng.randrange(3)
            if k == 0:
                return TAU
            if k == 1:
                return Var(rng.choice(names))
            return lit(Fraction(rng.randint(-12, 12), 4))
        k = rng.randrange(7)
        a = rand_smooth(depth - 1)
        b = rand_smooth(depth - 1)
        if k == 0:
            return a + b
        if k == 1:
            return a - b
        if k == 2:
            return a * b
        if k == 3:
            return Pow(a, rng.randint(0, 3))
        if k == 4:
            return Exp(a / lit(8))
        if k == 5:
            return Ln(a * a + lit(2))
        return a / (b * b + lit(2))

    checked = 0
    while checked < 100:
        e = rand_smooth(3)
        d = differentiate(e, None)
        env = {n: rng.uniform(-2, 2) for n in names}
        t = rng.uniform(0.1, 1.5)
        step = 1e-5
        try:
            sym = eval_expr(d, env, {}, t)
            hi = eval_expr(e, env, {}, t + step)
            lo = eval_expr(e, env, {}, t - step)
        except EvalDomainError:
            continue
        if abs(hi) > 1e6 or abs(lo) > 1e6 or abs(sym) > 1e6:
            continue
        fd = (hi - lo) / (2 * step)
        assert abs(sym - fd) <= 1e-6 * max(1.0, abs(sym)), (e, sym, fd)
        checked += 1
    _report("differentiation-fd", "(100 expressions, rel tol 1e-6)")


# -- criterion 4: the corpus-system certificates ----------------------------------------------


def test_flow_and_invariant_certificates(corpus_dir):
    start = time.monotonic()
    therm = parse_problem((corpus_dir / "thermostat.hyb").read_text())
    therm_odes = [n for n in _walk(therm.program) if isinstance(n, Ode)]
    assert len(therm_odes) == 2
    for ode in therm_odes:
        cert = certify.certify_flow(
            ode.field, ode.flow, ode.dom, therm.decls.assumptions
        )
        assert cert.certified
        assert cert.derivative_status == "symbolic"
        assert cert.lipschitz.kind == "symbolic-affine"
        assert cert.lipschitz.bound_text == "a"

    ball = parse_problem((corpus_dir / "bouncing_ball.hyb").read_text())
    evol = next(n for n in _walk(ball.program) if hasattr(n, "flow") and not isinstance(n, Ode))
    from hvcg.syntax import VectorField

    ball_field = VectorField((("x", Var("v")), ("v", __param("g"))))
    cert = certify.certify_flow(
        ball_field, evol.flow, evol.dom, ball.decls.assumptions
    )
    assert cert.certified and cert.lipschitz.bound_text == "1"

    tank = parse_problem((corpus_dir / "tank_dinv.hyb").read_text())
    tank_odes = [n for n in _walk(tank.program) if isinstance(n, Ode)]
    assert len(tank_odes) == 2
    for ode in tank_odes:
        cert = certify.diff_invariant(
            ode.dinv, ode.field, ode.guard, ode.dom, tank.decls.assumptions
        )
        assert cert.valid
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"certificates took {elapsed:.1f}s"
    _report("corpus-certificates", f"({elapsed:.2f}s)")


def __param(name):
    from hvcg.expr import Param

    return Param(name)


def _walk(prog):
    yield prog
    for child in getattr(prog, "parts", ()) or ():
        yield from _walk(child)
    for attr in ("body", "then", "orelse"):
        node = getattr(prog, attr, None)
        if node is not None:
            yield from _walk(node)


# -- criterion 5: end-to-end verification ------------------------------------------------------


def test_end_to_end_verification(tmp_path, corpus_dir):
    start = time.monotonic()
    for name, params in PARAM_SETS.items():
        out = tmp_path / f"{name}.json"
        code = main(["verify", str(corpus_dir / name)] + params + ["--out", str(out)])
        assert code == 0, name
        report = json.loads(out.read_text())
        assert report["status"] == "proved"
        for vc in report["vcs"]:
            assert vc["status"] == "proved"
            assert vc["method"] in ("ring", "interval", "vacuous")
            assert vc["splits"] <= 100_000
    elapsed = time.monotonic() - start
    assert elapsed < 300.0, f"end-to-end took {elapsed:.1f}s"
    _report("end-to-end-verification", f"(3 systems, {elapsed:.1f}s)")


# -- criterion 6: refinement replay -------------------------------------------------------------


def test_refinement_replay_end_to_end(tmp_path, corpus_dir):
    for name, params in (
        ("thermostat_refine.hyb", THERM_PARAMS),
        ("tank_refine.hyb", TANK_PARAMS),
    ):
        out = tmp_path / f"{name}.json"
        code = main(["refine", str(corpus_dir / name)] + params + ["--out", str(out)])
        assert code == 0, name
        report = json.loads(out.read_text())
        assert report["status"] == "proved"
        assert report["target_matched"] is True
        assert all(vc["status"] == "proved" for vc in report["vcs"])
    _report("refinement-replay", "(thermostat and tank scripts)")


# -- criterion 7: soundness differential test ----------------------------------------------------


def test_soundness_differential_1000_runs_each(tmp_path, corpus_dir):
    for name, params in PARAM_SETS.items():
        out = tmp_path / f"sim-{name}.json"
        code = main(
            ["simulate", str(corpus_dir / name)] + params
            + ["--runs", "1000", "--seed", "2718", "--out", str(out)]
        )
        assert code == 0, name
        report = json.loads(out.read_text())
        assert report["violation_count"] == 0, name
        assert report["completed"] == 1000
    _report("monte-carlo-soundness", "(3 x 1000 runs, zero violations)")


def test_mutants_are_falsified(tmp_path, corpus_dir):
    for name, params in MUTANTS.items():
        out = tmp_path / f"{name}.json"
        code = main(["verify", str(corpus_dir / name)] + params + ["--out", str(out)])
        assert code == 1, name
        report = json.loads(out.read_text())
        witnesses = [
            vc["counterexample"]
            for vc in report["vcs"]
            if vc["status"] == "falsified"
        ]
        assert witnesses and all(w for w in witnesses), name
    _report("mutant-falsification", f"({len(MUTANTS)} unsound goals)")


# -- criterion 8: prover consistency --------------------------------------------------------------


def test_prover_consistency_across_corpus(corpus_dir):
    disagreements = []
    for name, params in {**PARAM_SETS, **MUTANTS}.items():
        goal = parse_problem((corpus_dir / name).read_text())
        bindings = _fractions(params)
        gen = vcgen.generate(goal)
        for vc in gen.vcs:
            proved = discharge.prove(
                vc, params=bindings, falsify_samples=500, seed=0
            )
            refuted = discharge.falsify(vc, params=bindings, samples=1500, seed=1)
            if proved.status == "proved" and refuted.status == "falsified":
                disagreements.append((name, vc.vc_id))
    assert disagreements == []
    _report("prover-consistency", "(no VC both proved and falsified)")
