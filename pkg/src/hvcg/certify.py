"""Certificates for the two evolution side conditions: that a declared
flow solves its vector field, and that a candidate predicate is a
differential invariant.

Flow certification checks, per variable, that the time derivative of the
flow component equals the field's rate composed with the flow (decided by
polynomial normalisation over opaque transcendental atoms, with randomized
evaluation as a documented fallback), that the flow at time zero is the
identity, and a Lipschitz bound: the induced infinity-norm of the
coefficient matrix for fields affine in the state, sampled difference
quotients otherwise.

Invariant certification normalises the candidate to negation normal form,
splits conjunctions and disjunctions into independent sub-certificates and
reduces atoms to derivative obligations along the field: equal rates for
equalities, rate dominance for strict and weak inequalities (the forward
branch; the backward branch exists for completeness but every shipped time
domain starts at zero).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .discharge import (
    AtomRegistry,
    Boxes,
    Interval,
    Normalizer,
    mine_boxes,
)
from .expr import (
    And,
    BoolLit,
    Cmp,
    EQ, NE, LT, LE, GT, GE,
    Lit,
    Or,
    Param,
    Pred,
    PolyForm,
    RealExpr,
    Sub,
    Var,
    differentiate,
    eval_expr,
    free_params,
    free_vars,
    lie_derivative,
    nnf,
    pred_text,
    expr_text,
    subst,
    subst_time,
    simplify,
)
from .syntax import FlowSpec, TimeDomain, VectorField


# ---------------------------------------------------------------------------
# shared helpers


def _sym_normalizer(
    assumptions: Sequence[Pred] = (),
    guard: Optional[Pred] = None,
) -> Normalizer:
    params = _param_intervals(assumptions)
    var_bounds: Mapping[str, Interval] = {}
    if guard is not None:
        var_bounds = mine_boxes([guard], {}, None).vars
    boxes = Boxes(var_bounds, params, Interval(Fraction(0), None))
    return Normalizer(AtomRegistry(), boxes)


def _param_intervals(assumptions: Sequence[Pred]) -> dict[str, Interval]:
    out: dict[str, Interval] = {}

    def tighten(name: str, lo=None, hi=None):
        cur = out.get(name, Interval.whole())
        nlo = cur.lo if lo is None else (lo if cur.lo is None else max(cur.lo, lo))
        nhi = cur.hi if hi is None else (hi if cur.hi is None else min(cur.hi, hi))
        out[name] = Interval(nlo, nhi)

    def scan(p: Pred):
        if isinstance(p, And):
            for a in p.args:
                scan(a)
            return
        if not isinstance(p, Cmp):
            return
        lhs, rhs, op = p.lhs, p.rhs, p.op
        if isinstance(rhs, Param) and isinstance(lhs, Lit):
            lhs, rhs, op = rhs, lhs, {LT: GT, LE: GE, GT: LT, GE: LE, EQ: EQ, NE: NE}[op]
        if isinstance(lhs, Param) and isinstance(rhs, Lit):
            v = rhs.value
            if op in (LE, LT):
                tighten(lhs.name, hi=v)
            elif op in (GE, GT):
                tighten(lhs.name, lo=v)
            elif op == EQ:
                tighten(lhs.name, lo=v, hi=v)

    for p in assumptions:
        scan(nnf(p))
    return out


def _symbolically_zero(e: RealExpr, norm: Normalizer) -> bool:
    return norm.poly(e).is_zero()


def _certainly_nonneg(e: RealExpr, norm: Normalizer) -> bool:
    return norm.interval(norm.poly(e)).certainly_ge(Fraction(0))


def _sample_value(rng: random.Random, iv: Optional[Interval]) -> float:
    lo = float(iv.lo) if iv and iv.lo is not None else -3.0
    hi = float(iv.hi) if iv and iv.hi is not None else 3.0
    if hi <= lo:
        hi = lo + 1.0
    lo = max(lo, -50.0)
    hi = min(hi, 50.0)
    return lo + (hi - lo) * rng.random()


def _numeric_equal(
    lhs: RealExpr,
    rhs: RealExpr,
    assumptions: Sequence[Pred],
    points: int = 1000,
    rel_tol: float = 1e-6,
    seed: int = 7,
) -> bool:
    rng = random.Random(seed)
    names = sorted(free_vars(lhs) | free_vars(rhs))
    pnames = sorted(free_params(lhs) | free_params(rhs))
    pboxes = _param_intervals(assumptions)
    good = 0
    for _ in range(points):
        env = {n: rng.uniform(-3.0, 3.0) for n in names}
        penv = {n: _sample_value(rng, pboxes.get(n)) for n in pnames}
        t = rng.uniform(0.0, 2.0)
        try:
            a = eval_expr(lhs, env, penv, t)
            b = eval_expr(rhs, env, penv, t)
        except Exception:
            continue
        good += 1
        if abs(a - b) > rel_tol * max(1.0, abs(a), abs(b)):
            return False
    return good >= points // 5


# ---------------------------------------------------------------------------
# flow certification


@dataclass(frozen=True)
class FlowObligation:
    variable: str
    status: str  # "symbolic" | "numeric" | "failed"
    detail: str = ""


@dataclass(frozen=True)
class LipschitzInfo:
    kind: str  # "symbolic-affine" | "numeric-sampled" | "unchecked"
    bound_text: str = ""
    bound_value: Optional[float] = None


@dataclass(frozen=True)
class FlowCertificate:
    derivative: tuple[FlowObligation, ...]
    initial: str  # "passed" | "failed"
    lipschitz: LipschitzInfo

    @property
    def certified(self) -> bool:
        return self.initial == "passed" and all(
            o.status != "failed" for o in self.derivative
        )

    @property
    def derivative_status(self) -> str:
        worst = "symbolic"
        for o in self.derivative:
            if o.status == "failed":
                return "failed"
            if o.status == "numeric":
                worst = "numeric"
        return worst

    def as_json(self) -> dict:
        return {
            "certified": self.certified,
            "derivative_match": self.derivative_status,
            "per_variable": [
                {"var": o.variable, "status": o.status, "detail": o.detail}
                for o in self.derivative
            ],
            "initial_condition": self.initial,
            "lipschitz": {
                "kind": self.lipschitz.kind,
                "bound": self.lipschitz.bound_text,
                "value": self.lipschitz.bound_value,
            },
        }


def certify_flow(
    field: VectorField,
    flow: FlowSpec,
    dom: TimeDomain,
    assumptions: Sequence[Pred] = (),
) -> FlowCertificate:
    names = sorted(set(field.names()) | set(flow.names()))
    flow_map = {x: flow.component(x) for x in names}
    norm = _sym_normalizer(assumptions)

    obligations = []
    for x in names:
        lhs = differentiate(flow_map[x], None)
        rhs = simplify(subst(field.rate(x), flow_map))
        diff = Sub(lhs, rhs)
        if _symbolically_zero(diff, norm):
            status, detail = "symbolic", ""
        elif _numeric_equal(lhs, rhs, assumptions):
            status, detail = "numeric", "randomized evaluation at 1000 points"
        else:
            status, detail = "failed", f"d/dt {expr_text(flow_map[x])} != {expr_text(rhs)}"
        obligations.append(FlowObligation(x, status, detail))

    initial = "passed"
    for x in names:
        at0 = Sub(subst_time(flow_map[x], Lit(Fraction(0))), Var(x))
        if not _symbolically_zero(at0, norm):
            initial = "failed"
            break

    lip = _lipschitz(field, assumptions, norm)
    return FlowCertificate(tuple(obligations), initial, lip)


def _lipschitz(
    field: VectorField,
    assumptions: Sequence[Pred],
    norm: Normalizer,
) -> LipschitzInfo:
    from .expr import poly_normalize

    state = set(field.names())
    rows: list[PolyForm] = []
    for x, e in field.derivs:
        p = poly_normalize(e)
        if p is None:
            return _lipschitz_sampled(field, assumptions)
        row = PolyForm(())
        for mono, c in p.terms:
            var_deg = sum(k for key, k in mono if key[0] == "v" and key[1] in state)
            if var_deg > 1:
                return _lipschitz_sampled(field, assumptions)
            if var_deg == 0:
                continue
            coeff = PolyForm(
                ((tuple(km for km in mono if km[0][0] != "v"), c),)
            )
            signed = _abs_poly(coeff, norm)
            if signed is None:
                return _lipschitz_sampled(field, assumptions)
            row = row + signed
        rows.append(row)
    best = _max_poly(rows, norm)
    if best is None:
        return _lipschitz_sampled(field, assumptions)
    iv = norm.interval(best)
    value = float(iv.hi) if iv.hi is not None else None
    return LipschitzInfo("symbolic-affine", _poly_text(best), value)


def _abs_poly(p: PolyForm, norm: Normalizer) -> Optional[PolyForm]:
    iv = norm.interval(p)
    if iv.certainly_ge(Fraction(0)):
        return p
    if iv.certainly_le(Fraction(0)):
        return p.scale(Fraction(-1))
    return None


def _max_poly(rows: list[PolyForm], norm: Normalizer) -> Optional[PolyForm]:
    for cand in rows:
        if all(
            norm.interval(cand - other).certainly_ge(Fraction(0)) or cand == other
            for other in rows
        ):
            return cand
    return None


def _poly_text(p: PolyForm) -> str:
    if p.is_zero():
        return "0"
    pieces = []
    for mono, c in p.terms:
        atoms = "*".join(
            (key[1] if len(key) > 1 else "tau") + (f"^{e}" if e > 1 else "")
            for key, e in mono
        )
        if not atoms:
            pieces.append(str(c))
        elif c == 1:
            pieces.append(atoms)
        else:
            pieces.append(f"{c}*{atoms}")
    return " + ".join(pieces)


def _lipschitz_sampled(
    field: VectorField,
    assumptions: Sequence[Pred],
    box_half_width: float = 10.0,
    pairs: int = 400,
    seed: int = 11,
) -> LipschitzInfo:
    rng = random.Random(seed)
    names = sorted(
        set(field.names())
        | set().union(set(), *(free_vars(e) for _, e in field.derivs))
    )
    pnames = sorted(set().union(set(), *(free_params(e) for _, e in field.derivs)))
    pboxes = _param_intervals(assumptions)
    best = 0.0
    got = 0
    for _ in range(pairs):
        penv = {n: _sample_value(rng, pboxes.get(n)) for n in pnames}
        u = {n: rng.uniform(-box_half_width, box_half_width) for n in names}
        v = {n: rng.uniform(-box_half_width, box_half_width) for n in names}
        try:
            fu = [eval_expr(e, u, penv) for _, e in field.derivs]
            fv = [eval_expr(e, v, penv) for _, e in field.derivs]
        except Exception:
            continue
        got += 1
        dx = max(abs(u[n] - v[n]) for n in names) or 1e-12
        df = max((abs(a - b) for a, b in zip(fu, fv)), default=0.0)
        best = max(best, df / dx)
    if got == 0:
        return LipschitzInfo("unchecked")
    return LipschitzInfo(
        "numeric-sampled", f"sampled over [-{box_half_width}, {box_half_width}]^n", best
    )


# ---------------------------------------------------------------------------
# differential invariants


@dataclass(frozen=True)
class InvObligation:
    description: str
    status: str  # "resolved" | "unknown"
    method: str = ""


@dataclass(frozen=True)
class InvAtomCert:
    atom: str
    rule: str  # eq | less | leq | neq | not-leq | not-less
    obligations: tuple[InvObligation, ...]

    @property
    def resolved(self) -> bool:
        return all(o.status == "resolved" for o in self.obligations)


@dataclass(frozen=True)
class InvariantCertificate:
    candidate: Pred
    atoms: tuple[InvAtomCert, ...]

    @property
    def valid(self) -> bool:
        return all(a.resolved for a in self.atoms)

    def as_json(self) -> dict:
        return {
            "valid": self.valid,
            "candidate": pred_text(self.candidate),
            "atoms": [
                {
                    "atom": a.atom,
                    "rule": a.rule,
                    "obligations": [
                        {"goal": o.description, "status": o.status, "method": o.method}
                        for o in a.obligations
                    ],
                }
                for a in self.atoms
            ],
        }


_RULE_NAMES = {LT: "less", LE: "leq", GT: "not-leq", GE: "not-less"}


def diff_invariant(
    candidate: Pred,
    field: VectorField,
    guard: Pred,
    dom: TimeDomain,
    assumptions: Sequence[Pred] = (),
    use_guard_hypotheses: bool = False,
) -> InvariantCertificate:
    """Certificate that the candidate is closed under the dynamics.

    Conjunctions and disjunctions certify componentwise; each atom reduces
    to derivative comparisons along the field.  Unsupported shapes are
    reported unknown, never silently accepted.
    """
    norm = _sym_normalizer(assumptions, guard if use_guard_hypotheses else None)
    fmap = field.as_mapping()
    atoms: list[InvAtomCert] = []

    def walk(p: Pred):
        if isinstance(p, (And, Or)):
            for q in p.args:
                walk(q)
            return
        if isinstance(p, BoolLit):
            return  # vacuously closed either way as a conjunct/disjunct
        if isinstance(p, Cmp):
            atoms.append(_atom_cert(p, fmap, norm))
            return
        atoms.append(
            InvAtomCert(
                pred_text(p), "unsupported", (InvObligation(pred_text(p), "unknown"),)
            )
        )

    walk(nnf(candidate))
    return InvariantCertificate(candidate, tuple(atoms))


def _atom_cert(atom: Cmp, fmap, norm: Normalizer) -> InvAtomCert:
    lhs, rhs, op = atom.lhs, atom.rhs, atom.op
    if op in (GT, GE):
        lhs, rhs = rhs, lhs  # a > b is invariant exactly when b < a is
    if op == EQ:
        obs = (_rate_equal(lhs, rhs, fmap, norm),)
        rule = "eq"
    elif op == NE:
        obs = (
            _rate_dominates(lhs, rhs, fmap, norm),
            _rate_dominates(rhs, lhs, fmap, norm),
        )
        rule = "neq"
    else:
        obs = (_rate_dominates(lhs, rhs, fmap, norm),)
        rule = _RULE_NAMES[op]
    return InvAtomCert(pred_text(atom), rule, obs)


def _rate_equal(mu: RealExpr, nu: RealExpr, fmap, norm: Normalizer) -> InvObligation:
    dl, dr = lie_derivative(mu, fmap), lie_derivative(nu, fmap)
    desc = f"rate({expr_text(mu)}) = rate({expr_text(nu)})"
    if _symbolically_zero(Sub(dl, dr), norm):
        return InvObligation(desc, "resolved", "symbolic")
    return InvObligation(desc, "unknown")


def _rate_dominates(mu: RealExpr, nu: RealExpr, fmap, norm: Normalizer) -> InvObligation:
    """Forward-time obligation for mu < nu (and mu <= nu): the rate of the
    smaller side must not exceed the rate of the larger."""
    dl, dr = lie_derivative(mu, fmap), lie_derivative(nu, fmap)
    desc = f"rate({expr_text(mu)}) <= rate({expr_text(nu)})"
    diff = Sub(dr, dl)
    if _symbolically_zero(diff, norm):
        return InvObligation(desc, "resolved", "symbolic")
    if _certainly_nonneg(diff, norm):
        return InvObligation(desc, "resolved", "interval")
    return InvObligation(desc, "unknown")


def backward_rate_obligation(
    mu: RealExpr, nu: RealExpr, field: VectorField,
    assumptions: Sequence[Pred] = (),
) -> InvObligation:
    """The reverse-time branch for mu < nu: over negative times the rate of
    the smaller side must be at least the rate of the larger.  No shipped
    time domain extends below zero, so the pipeline never emits this; it is
    exercised directly by unit tests."""
    norm = _sym_normalizer(assumptions)
    fmap = field.as_mapping()
    dl, dr = lie_derivative(mu, fmap), lie_derivative(nu, fmap)
    desc = f"rate({expr_text(mu)}) >= rate({expr_text(nu)}) for t < 0"
    diff = Sub(dl, dr)
    if _symbolically_zero(diff, norm):
        return InvObligation(desc, "resolved", "symbolic")
    if _certainly_nonneg(diff, norm):
        return InvObligation(desc, "resolved", "interval")
    return InvObligation(desc, "unknown")
