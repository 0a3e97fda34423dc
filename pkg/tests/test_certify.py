"""Flow certification and differential-invariant certification."""

from fractions import Fraction


from hvcg.certify import (
    backward_rate_obligation, certify_flow, diff_invariant,
)
from hvcg.expr import (
    Cmp, EQ, Exp, GE, GT, LE, LT, NE, Param, TAU, TRUE, Var, lit, pand, por,
)
from hvcg.syntax import FlowSpec, TimeDomain, VectorField

x, v, T, t = Var("x"), Var("v"), Var("T"), Var("t")
a, c, g = Param("a"), Param("c"), Param("g")


def test_zero_field_identity_flow_certifies():
    field = VectorField((("x", lit(0)), ("v", lit(0))))
    flow = FlowSpec((("x", x), ("v", v)))
    cert = certify_flow(field, flow, TimeDomain(None))
    assert cert.certified
    assert cert.derivative_status == "symbolic"
    assert cert.initial == "passed"
    assert cert.lipschitz.kind == "symbolic-affine"
    assert cert.lipschitz.bound_text == "0"


def test_thermostat_flow_certificate():
    assumptions = [Cmp(LT, lit(0), a)]
    field = VectorField((("T", -(a * (T - c))), ("t", lit(1))))
    flow = FlowSpec((("T", c - Exp(-(a * TAU)) * (c - T)), ("t", TAU + t)))
    cert = certify_flow(field, flow, TimeDomain(Param("tmax")), assumptions)
    assert cert.certified
    assert cert.derivative_status == "symbolic"
    assert cert.lipschitz.kind == "symbolic-affine"
    assert cert.lipschitz.bound_text == "a"


def test_ball_flow_certificate():
    field = VectorField((("x", v), ("v", g)))
    flow = FlowSpec(
        (("x", g * TAU**2 / lit(2) + v * TAU + x), ("v", g * TAU + v))
    )
    cert = certify_flow(field, flow, TimeDomain(None), [Cmp(LT, g, lit(0))])
    assert cert.certified and cert.derivative_status == "symbolic"
    assert cert.lipschitz.kind == "symbolic-affine"
    assert cert.lipschitz.bound_text == "1"


def test_wrong_flow_fails_derivative_match():
    field = VectorField((("x", v), ("v", g)))
    wrong = FlowSpec((("x", v * TAU + x), ("v", g * TAU + v)))  # missing the quadratic
    cert = certify_flow(field, wrong, TimeDomain(None))
    assert not cert.certified
    assert cert.derivative_status == "failed"


def test_wrong_initial_condition_fails():
    field = VectorField((("x", lit(0)),))
    flow = FlowSpec((("x", x + lit(1)),))
    cert = certify_flow(field, flow, TimeDomain(None))
    assert cert.initial == "failed"
    assert not cert.certified


def test_nonaffine_field_gets_sampled_lipschitz():
    field = VectorField((("x", x * x),))
    flow = FlowSpec((("x", x),))  # wrong on purpose; only the bound matters here
    cert = certify_flow(field, flow, TimeDomain(None))
    assert cert.lipschitz.kind == "numeric-sampled"
    assert cert.lipschitz.bound_value > 0


def test_tank_invariant_certificate():
    k, hl, hh = Param("k"), Param("hl"), Param("hh")
    h, h0, pi, tv = Var("h"), Var("h0"), Var("pi"), Var("t")
    field = VectorField((("pi", lit(0)), ("h", k), ("h0", lit(0)), ("t", lit(1))))
    dI = pand(
        Cmp(EQ, h, k * tv + h0),
        Cmp(LE, lit(0), tv),
        Cmp(LE, hl, h0),
        Cmp(LE, h0, hh),
        por(Cmp(EQ, pi, lit(0)), Cmp(EQ, pi, lit(1))),
    )
    cert = diff_invariant(dI, field, TRUE, TimeDomain(Param("tmax")))
    assert cert.valid
    rules = [atom.rule for atom in cert.atoms]
    assert rules == ["eq", "leq", "leq", "leq", "eq", "eq"]
    # the level equation resolves by equal rates on both sides
    level = cert.atoms[0]
    assert level.obligations[0].method == "symbolic"


def test_ball_energy_invariant_atom():
    h = Param("h")
    field = VectorField((("x", v), ("v", g)))
    atom = Cmp(EQ, lit(2) * g * x, lit(2) * g * h + v * v)
    cert = diff_invariant(atom, field, TRUE, TimeDomain(None))
    assert cert.valid and cert.atoms[0].rule == "eq"


def test_true_candidate_is_vacuously_valid():
    field = VectorField((("x", v),))
    cert = diff_invariant(TRUE, field, TRUE, TimeDomain(None))
    assert cert.valid and cert.atoms == ()


def test_non_invariant_is_rejected():
    # x >= 1 is not closed under x' = -1
    field = VectorField((("x", lit(-1)),))
    cert = diff_invariant(Cmp(GE, x, lit(1)), field, TRUE, TimeDomain(None))
    assert not cert.valid


def test_strict_and_not_leq_rules():
    field = VectorField((("x", lit(0)), ("v", lit(1))))
    # x < v grows apart: rate(x) = 0 <= 1 = rate(v)
    lt = diff_invariant(Cmp(LT, x, v), field, TRUE, TimeDomain(None))
    assert lt.valid and lt.atoms[0].rule == "less"
    gt = diff_invariant(Cmp(GT, v, x), field, TRUE, TimeDomain(None))
    assert gt.valid and gt.atoms[0].rule == "not-leq"
    ne = diff_invariant(Cmp(NE, x, x + lit(1)), field, TRUE, TimeDomain(None))
    assert ne.valid and ne.atoms[0].rule == "neq"


def test_unsupported_shapes_report_unknown_not_success():
    field = VectorField((("x", lit(1)),))
    cert = diff_invariant(Cmp(LE, x, x * x), field, TRUE, TimeDomain(None))
    assert not cert.valid
    assert all(o.status == "unknown" for o in cert.atoms[0].obligations)


def test_backward_branch_directly():
    # equal rates resolve in the reverse-time branch too
    field = VectorField((("x", lit(2)), ("v", lit(2))))
    ob = backward_rate_obligation(x, v, field)
    assert ob.status == "resolved"
    # rate(0) >= rate(t) fails backward, as it should
    clock = VectorField((("t", lit(1)),))
    bad = backward_rate_obligation(lit(0), Var("t"), clock)
    assert bad.status == "unknown"


def test_guard_hypotheses_toggle():
    # rate dominance that needs the guard's box: under x' = v with guard
    # restricting v to [0, 1], the candidate x <= t certifies only with the
    # guard admitted as a hypothesis
    field = VectorField((("x", Var("v")), ("t", lit(1))))
    guard = pand(Cmp(LE, lit(0), Var("v")), Cmp(LE, Var("v"), lit(1)))
    cand = Cmp(LE, x, Var("t"))
    without = diff_invariant(cand, field, guard, TimeDomain(None))
    with_guard = diff_invariant(
        cand, field, guard, TimeDomain(None), use_guard_hypotheses=True
    )
    assert not without.valid
    assert with_guard.valid
