"""Refinement law application and script replay."""

from fractions import Fraction

import pytest

from hvcg.expr import Cmp, EQ, TRUE, Var, lit, pand, pnot
from hvcg.parsing import (
    Declarations, RefineGoal, RefinementStep, parse_pred, parse_problem,
    parse_program, parse_script,
)
from hvcg.refine import (
    LawShapeMismatch, RefinementError, apply_step, replay,
)
from hvcg.store import StateUpdate
from hvcg.syntax import (
    Assign, If, Loop, SKIP, Seq, Spec, While, program_text,
)

DECLS = Declarations(("x", "v", "t", "T", "T0"), ("g", "h"), ())


def P(text):
    return parse_pred(text, DECLS)


def step(law, path=(), **witnesses):
    return RefinementStep(law, path, witnesses)


def assign(text):
    return parse_program(text, DECLS)


# -- individual laws --------------------------------------------------------------


def test_r_skip_on_matching_spec():
    out = apply_step(Spec(P("x = 0"), P("x = 0")), step("r-skip"))
    assert out.term == SKIP and out.vcs == []


def test_r_skip_shape_mismatch_names_both_sides():
    with pytest.raises(LawShapeMismatch) as e:
        apply_step(Spec(P("x = 0"), P("x = 1")), step("r-skip"))
    assert "r-cons" in str(e.value)


def test_r_assgn_emits_entry_side_condition():
    # clock reset against [I, I and t = 0]
    I = P("0 <= x")
    target = Spec(I, pand(I, P("t = 0")))
    out = apply_step(target, step("r-assgn", prog=assign("t := 0")))
    assert isinstance(out.term, Assign)
    (vc,) = out.vcs
    assert vc.hypotheses == (I,)
    assert vc.goal == pand(I, Cmp(EQ, lit(0), lit(0)))


def test_r_assgnl_leaves_residual_spec():
    I = P("0 <= x")
    mid = pand(I, P("t = 0"))
    out = apply_step(
        Spec(I, I), step("r-assgnl", prog=assign("t := 0"), mid=mid)
    )
    assert isinstance(out.term, Seq)
    assert out.term.parts[1] == Spec(mid, I)
    assert len(out.vcs) == 1


def test_r_assgnf_substitutes_into_post():
    q = P("x = 1")
    out = apply_step(Spec(TRUE, q), step("r-assgnf", prog=assign("x := x + 1")))
    assert isinstance(out.term, Seq)
    assert out.term.parts[0] == Spec(TRUE, Cmp(EQ, Var("x") + lit(1), lit(1)))
    assert out.vcs == []


def test_r_seq_r_cond_r_inv_r_loop():
    p, q, mid = P("x = 0"), P("x = 2"), P("x = 1")
    out = apply_step(Spec(p, q), step("r-seq", mid=mid))
    assert out.term == Seq((Spec(p, mid), Spec(mid, q)))

    t = P("x <= 1")
    out = apply_step(Spec(p, q), step("r-cond", test=t))
    assert isinstance(out.term, If)
    assert out.term.then == Spec(pand(t, p), q)
    assert out.term.orelse == Spec(pand(pnot(t), p), q)

    inv = P("0 <= x")
    out = apply_step(Spec(p, q), step("r-inv", inv=inv))
    assert out.term == Spec(inv, inv)
    assert [vc.goal for vc in out.vcs] == [inv, q]

    out = apply_step(Spec(inv, inv), step("r-loop"))
    assert out.term == Loop(Spec(inv, inv), inv)


def test_r_while_shape():
    t, p = P("x <= 1"), P("0 <= x")
    post = pand(pnot(t), p)
    out = apply_step(Spec(p, post), step("r-while", test=t))
    assert isinstance(out.term, While)
    with pytest.raises(LawShapeMismatch):
        apply_step(Spec(p, p), step("r-while", test=t))


def test_r_cons_emits_both_directions():
    out = apply_step(
        Spec(P("x = 0"), P("x = 1")),
        step("r-cons", pre=P("0 <= x"), post=P("x = 1")),
    )
    assert out.term == Spec(P("0 <= x"), P("x = 1"))
    assert len(out.vcs) == 2


def test_law_refuses_non_spec_targets():
    with pytest.raises(LawShapeMismatch):
        apply_step(SKIP, step("r-skip"))


def test_unknown_law_rejected():
    with pytest.raises(RefinementError):
        apply_step(Spec(TRUE, TRUE), step("r-magic"))


def test_r_evl_family_produces_evolution_vcs():
    ode = parse_program(
        "{x' = v, v' = g & x >= 0 on [0, 1]} flow "
        "{x := g*tau^2/2 + v*tau + x, v := g*tau + v}",
        DECLS,
    )
    p, q = P("x = h and v = 0"), P("0 <= x")
    out = apply_step(Spec(p, q), step("r-evl", prog=ode))
    assert out.term == ode
    (vc,) = out.vcs
    assert vc.time is not None and vc.time.history is not None
    assert out.cert_requests[0].kind == "flow"

    # leading variant: evolution then residual spec
    out = apply_step(Spec(p, q), step("r-evll", prog=ode, mid=q))
    assert isinstance(out.term, Seq) and out.term.parts[1] == Spec(q, q)

    # following variant: residual spec then evolution
    out = apply_step(Spec(p, q), step("r-evlr", prog=ode, mid=p))
    assert isinstance(out.term, Seq) and out.term.parts[0] == Spec(p, p)
    (vc,) = out.vcs
    assert vc.hypotheses[-1] == p  # the residual midpoint feeds the evolution


def test_r_evlf_on_explicit_flows():
    evol = parse_program(
        "evol {x := g*tau^2/2 + v*tau + x, v := g*tau + v} & x >= 0", DECLS
    )
    out = apply_step(Spec(P("x = h"), P("0 <= x")), step("r-evlf", prog=evol))
    assert out.term == evol and len(out.vcs) == 1
    assert out.cert_requests == []  # explicit flows need no certificate


# -- replay --------------------------------------------------------------------------


def _load_refine(corpus_dir, name):
    goal = parse_problem((corpus_dir / name).read_text())
    assert isinstance(goal, RefineGoal)
    script = parse_script(
        (corpus_dir / goal.script_path).read_text(), goal.decls
    )
    return goal, script


def test_replay_thermostat_reaches_target(corpus_dir):
    goal, script = _load_refine(corpus_dir, "thermostat_refine.hyb")
    result = replay(script, goal)
    assert result.final == goal.target
    assert len(result.steps) == 13
    assert [c.kind for c in result.cert_requests] == ["flow", "flow"]


def test_replay_tank_reaches_target(corpus_dir):
    goal, script = _load_refine(corpus_dir, "tank_dinv" if False else "tank_refine.hyb")
    result = replay(script, goal)
    assert result.final == goal.target
    assert [c.kind for c in result.cert_requests] == ["invariant", "invariant"]


def test_replay_empty_script_reports_residual_spec(corpus_dir):
    goal, _ = _load_refine(corpus_dir, "thermostat_refine.hyb")
    from hvcg.parsing import RefinementScript

    with pytest.raises(RefinementError) as e:
        replay(RefinementScript(()), goal)
    assert "residual" in str(e.value)


def test_replay_wrong_midpoint_gives_shape_mismatch(corpus_dir):
    goal, script = _load_refine(corpus_dir, "thermostat_refine.hyb")
    # corrupt the r-seq midpoint: later steps stop matching structurally
    steps = list(script.steps)
    bad = RefinementStep("r-skip", steps[3].path, {})
    steps[3] = bad
    from hvcg.parsing import RefinementScript

    with pytest.raises(LawShapeMismatch) as e:
        replay(RefinementScript(tuple(steps)), goal)
    assert "r-skip" in str(e.value)


def test_replay_wrong_target_shows_diff(corpus_dir):
    goal, script = _load_refine(corpus_dir, "thermostat_refine.hyb")
    mutated = RefineGoal(goal.decls, goal.spec, SKIP, goal.script_path)
    with pytest.raises(RefinementError) as e:
        replay(script, mutated)
    assert "target" in str(e.value) and "replayed" in str(e.value)


def test_replay_verify_coherence(corpus_dir):
    """A successfully replayed target also verifies directly as a Hoare
    goal: the generator discharges every obligation of {P} target {Q}."""
    from hvcg import discharge, vcgen
    from hvcg.parsing import HoareGoal

    cases = (
        ("thermostat_refine.hyb",
         {"a": Fraction(1), "Tl": Fraction(18), "Th": Fraction(22),
          "Tu": Fraction(30), "tmax": Fraction(1, 10)}),
        ("tank_refine.hyb",
         {"ci": Fraction(2), "co": Fraction(1), "hl": Fraction(4),
          "hh": Fraction(10), "tmax": Fraction(1)}),
    )
    for name, params in cases:
        goal, script = _load_refine(corpus_dir, name)
        replay(script, goal)  # must succeed first
        hoare = HoareGoal(goal.decls, goal.spec.pre, goal.target, goal.spec.post)
        gen = vcgen.generate(hoare)
        for vc in gen.vcs:
            result = discharge.prove(vc, params=params, falsify_samples=100)
            assert result.status == "proved", (name, vc.vc_id)
