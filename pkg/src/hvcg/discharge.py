"""Arithmetic discharge: a sound-but-incomplete prover pipeline plus a
randomized falsifier.

The pipeline normalises every atom into a polynomial over an extended atom
set: program variables, the bound time, and opaque keys for exponentials,
logarithms and quotients (logarithms of products are split into sums when
every factor is provably positive, so hypotheses and goals agree on keys).
Equalities close by linear elimination plus ring normalisation.
Inequalities close by hypothesis cancellation with an interval check on
the residual, by a logarithmic transform for single-exponential shapes, or
by branch-and-bound over the box.  Every proved answer is sound; Unknown
is the honest failure mode.

Interval endpoints are rationals; exponential and logarithm endpoints go
through double precision and are widened outward by four ulps, which
covers the at-most-one-ulp error of the libm implementations with margin.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .expr import (
    And,
    BoolLit,
    Cmp,
    Div,
    EQ, NE, LT, LE, GT, GE,
    Exp,
    Or,
    Pred,
    Ln,
    Lit,
    Mul,
    Neg,
    Param,
    PolyForm,
    Pow,
    RealExpr,
    Sub,
    TRUE,
    TimeSym,
    Var,
    instantiate_params,
    nnf,
    pnot,
    pred_text,
    subst_time_pred,
)
from .vcgen import VC, TimeBinder

TAU_KEY = ("t",)
_ULPS = 4


class BoxError(ValueError):
    pass


# ---------------------------------------------------------------------------
# outward-rounded intervals


def _widen_up(x: float) -> float:
    for _ in range(_ULPS):
        x = math.nextafter(x, math.inf)
    return x


def _widen_down(x: float) -> float:
    for _ in range(_ULPS):
        x = math.nextafter(x, -math.inf)
    return x


@dataclass(frozen=True)
class Interval:
    """Closed interval with rational endpoints; None marks an unbounded side."""

    lo: Optional[Fraction]
    hi: Optional[Fraction]

    def __post_init__(self):
        if self.lo is not None and self.hi is not None and self.lo > self.hi:
            raise BoxError(f"empty interval [{self.lo}, {self.hi}]")

    @staticmethod
    def point(v) -> "Interval":
        v = Fraction(v)
        return Interval(v, v)

    @staticmethod
    def whole() -> "Interval":
        return Interval(None, None)

    def is_point(self) -> bool:
        return self.lo is not None and self.lo == self.hi

    def width(self) -> Optional[Fraction]:
        if self.lo is None or self.hi is None:
            return None
        return self.hi - self.lo

    def contains(self, v: Fraction) -> bool:
        return (self.lo is None or self.lo <= v) and (self.hi is None or v <= self.hi)

    def certainly_le(self, v: Fraction) -> bool:
        return self.hi is not None and self.hi <= v

    def certainly_lt(self, v: Fraction) -> bool:
        return self.hi is not None and self.hi < v

    def certainly_ge(self, v: Fraction) -> bool:
        return self.lo is not None and self.lo >= v

    def certainly_gt(self, v: Fraction) -> bool:
        return self.lo is not None and self.lo > v

    def excludes(self, v: Fraction) -> bool:
        return self.certainly_lt(v) or self.certainly_gt(v)


def iadd(a: Interval, b: Interval) -> Interval:
    lo = None if a.lo is None or b.lo is None else a.lo + b.lo
    hi = None if a.hi is None or b.hi is None else a.hi + b.hi
    return Interval(lo, hi)


def ineg(a: Interval) -> Interval:
    return Interval(None if a.hi is None else -a.hi, None if a.lo is None else -a.lo)


def iscale(a: Interval, c: Fraction) -> Interval:
    if c == 0:
        return Interval.point(0)
    if c > 0:
        return Interval(
            None if a.lo is None else a.lo * c, None if a.hi is None else a.hi * c
        )
    return Interval(
        None if a.hi is None else a.hi * c, None if a.lo is None else a.lo * c
    )


def _emul(x: Optional[Fraction], sx: int, y: Optional[Fraction], sy: int):
    """Multiply extended-real endpoints; None carries the sign sx/sy (+1/-1).
    Zero times an infinity is zero: variables are finite-valued, infinities
    only mark unboundedness."""
    if x is None and y is None:
        return (None, sx * sy)
    if x is None:
        if y == 0:
            return (Fraction(0), 0)
        return (None, sx * (1 if y > 0 else -1))
    if y is None:
        if x == 0:
            return (Fraction(0), 0)
        return (None, sy * (1 if x > 0 else -1))
    return (x * y, 0)


def imul(a: Interval, b: Interval) -> Interval:
    ends_a = [(a.lo, -1), (a.hi, +1)]
    ends_b = [(b.lo, -1), (b.hi, +1)]
    los: list[Optional[Fraction]] = []
    his: list[Optional[Fraction]] = []
    candidates = []
    for (x, sx), (y, sy) in itertools.product(ends_a, ends_b):
        candidates.append(_emul(x, sx, y, sy))
    lo: Optional[Fraction] = None
    hi: Optional[Fraction] = None
    lo_unbounded = any(v is None and s < 0 for v, s in candidates)
    hi_unbounded = any(v is None and s > 0 for v, s in candidates)
    finite = [v for v, _ in candidates if v is not None]
    if not lo_unbounded:
        lo = min(finite) if finite else None
    if not hi_unbounded:
        hi = max(finite) if finite else None
    return Interval(lo, hi)


def ipow(a: Interval, n: int) -> Interval:
    if n == 0:
        return Interval.point(1)
    if n % 2 == 1:
        lo = None if a.lo is None else a.lo**n
        hi = None if a.hi is None else a.hi**n
        return Interval(lo, hi)
    # even powers: nonnegative, minimum at the closest point to zero
    if a.lo is not None and a.lo >= 0:
        return Interval(a.lo**n, None if a.hi is None else a.hi**n)
    if a.hi is not None and a.hi <= 0:
        return Interval(a.hi**n, None if a.lo is None else (-a.lo) ** n)
    hi = None
    if a.lo is not None and a.hi is not None:
        hi = max(abs(a.lo), abs(a.hi)) ** n
    return Interval(Fraction(0), hi)


def iinv(a: Interval) -> Interval:
    """Reciprocal; refuses intervals containing zero."""
    if (a.lo is None or a.lo <= 0) and (a.hi is None or a.hi >= 0):
        return Interval.whole()
    if a.lo is not None and a.lo > 0:
        return Interval(
            Fraction(0) if a.hi is None else 1 / a.hi,
            1 / a.lo,
        )
    return Interval(
        1 / a.hi,  # both endpoints negative here
        Fraction(0) if a.lo is None else 1 / a.lo,
    )


def iexp(a: Interval) -> Interval:
    """exp enclosure; exact at 0 (the only rational point with a rational
    image), outward-widened floats elsewhere."""
    lo = Fraction(0)
    if a.lo is not None:
        if a.lo == 0:
            lo = Fraction(1)
        else:
            lo = max(Fraction(0), Fraction(_widen_down(math.exp(float(_shrink_down(a.lo))))))
    hi = None
    if a.hi is not None:
        if a.hi == 0:
            hi = Fraction(1)
        else:
            hi = Fraction(_widen_up(math.exp(float(_shrink_up(a.hi)))))
    return Interval(lo, hi)


def iln(a: Interval) -> Interval:
    """ln enclosure; exact at 1, unbounded information when the argument
    interval leaves the domain."""
    if a.lo is None or a.lo <= 0:
        lo = None
    elif a.lo == 1:
        lo = Fraction(0)
    else:
        lo = Fraction(_widen_down(math.log(float(_shrink_down(a.lo)))))
    if a.hi is None:
        hi = None
    elif a.hi <= 0:
        return Interval.whole()  # domain leaves the box; no information
    elif a.hi == 1:
        hi = Fraction(0)
    else:
        hi = Fraction(_widen_up(math.log(float(_shrink_up(a.hi)))))
    return Interval(lo, hi)


def _shrink_down(x: Fraction) -> float:
    f = float(x)
    return f if Fraction(f) <= x else math.nextafter(f, -math.inf)


def _shrink_up(x: Fraction) -> float:
    f = float(x)
    return f if Fraction(f) >= x else math.nextafter(f, math.inf)


# ---------------------------------------------------------------------------
# atom-level polynomials

# Atom keys, all plain comparable tuples of strings:
#   ("v", name)        program variable
#   ("p", name)        parameter (certification keeps these symbolic)
#   ("t",)             the bound time
#   ("exp", sig)       exponential of the registered polynomial
#   ("ln", sig)        logarithm of the registered polynomial
#   ("inv", sig)       reciprocal of the registered polynomial


class AtomRegistry:
    def __init__(self):
        self._by_sig: dict[str, PolyForm] = {}

    def sig(self, p: PolyForm) -> str:
        s = repr(p.terms)
        self._by_sig[s] = p
        return s

    def poly(self, s: str) -> PolyForm:
        return self._by_sig[s]


@dataclass(frozen=True)
class Boxes:
    """Interval environment for variables, parameters and the bound time."""

    vars: Mapping[str, Interval]
    params: Mapping[str, Interval]
    tau: Interval

    def var(self, name: str) -> Interval:
        return self.vars.get(name, Interval.whole())

    def param(self, name: str) -> Interval:
        return self.params.get(name, Interval.whole())

    def with_var(self, name: str, iv: Interval) -> "Boxes":
        d = dict(self.vars)
        d[name] = iv
        return Boxes(d, self.params, self.tau)

    def with_tau(self, iv: Interval) -> "Boxes":
        return Boxes(self.vars, self.params, iv)


EMPTY_BOXES = Boxes({}, {}, Interval.whole())


class Normalizer:
    """Expression-to-polynomial normalisation over the extended atoms."""

    def __init__(self, registry: AtomRegistry, boxes: Boxes):
        self.registry = registry
        self.boxes = boxes

    def poly(self, e: RealExpr) -> PolyForm:
        if isinstance(e, Ln):
            inner = self.poly(e.arg)
            if inner.constant_value() == 1:
                return PolyForm(())
            return self._ln_poly(e.arg)
        if isinstance(e, Exp):
            arg = self.poly(e.arg)
            if arg.is_zero():
                return PolyForm.const(1)
            return PolyForm.atom(("exp", self.registry.sig(arg)))
        if isinstance(e, Div):
            denom = self.poly(e.rhs)
            c = denom.constant_value()
            num = self.poly(e.lhs)
            if c is not None and c != 0:
                return num.scale(Fraction(1) / c)
            return num * PolyForm.atom(("inv", self.registry.sig(denom)))
        if isinstance(e, Lit):
            return PolyForm.const(e.value)
        if isinstance(e, Var):
            return PolyForm.atom(("v", e.name))
        if isinstance(e, Param):
            return PolyForm.atom(("p", e.name))
        if isinstance(e, TimeSym):
            return PolyForm.atom(TAU_KEY)
        if isinstance(e, Neg):
            return self.poly(e.arg).scale(Fraction(-1))
        if isinstance(e, Pow):
            return self.poly(e.base).power(e.exponent)
        if isinstance(e, Sub):
            return self.poly(e.lhs) - self.poly(e.rhs)
        if isinstance(e, Mul):
            return self.poly(e.lhs) * self.poly(e.rhs)
        # Add
        return self.poly(e.lhs) + self.poly(e.rhs)

    def _ln_poly(self, arg: RealExpr) -> PolyForm:
        """ln of a product splits into a sum when every factor is provably
        positive on the boxes; otherwise the logarithm stays opaque."""
        coeff, factors = _factorize(arg)
        if coeff > 0 and all(
            self.interval(self.poly(f)).certainly_gt(Fraction(0)) for f, _ in factors
        ):
            total = self._ln_atom(PolyForm.const(coeff)) if coeff != 1 else PolyForm(())
            for f, mult in factors:
                total = total + self._ln_atom(self.poly(f)).scale(Fraction(mult))
            return total
        return self._ln_atom(self.poly(arg))

    def _ln_atom(self, payload: PolyForm) -> PolyForm:
        return PolyForm.atom(("ln", self.registry.sig(payload)))

    # -- interval evaluation -------------------------------------------------

    def atom_interval(self, key: tuple, boxes: Boxes) -> Interval:
        kind = key[0]
        if kind == "v":
            return boxes.var(key[1])
        if kind == "p":
            return boxes.param(key[1])
        if kind == "t":
            return boxes.tau
        payload = self.registry.poly(key[1])
        inner = self.interval(payload, boxes)
        if kind == "exp":
            return iexp(inner)
        if kind == "ln":
            return iln(inner)
        if kind == "inv":
            return iinv(inner)
        raise AssertionError(f"unknown atom {key!r}")

    def interval(self, p: PolyForm, boxes: Boxes | None = None) -> Interval:
        """Enclosure of a polynomial.  Terms sharing an exponential factor
        are evaluated factored, exp(u)*(a+b), not distributed; interval
        products sub-distribute, so the factored form is never wider."""
        boxes = boxes or self.boxes
        groups: dict[tuple, dict] = {}
        for mono, c in p.terms:
            exp_part = tuple((k, e) for k, e in mono if k[0] == "exp")
            rest = tuple((k, e) for k, e in mono if k[0] != "exp")
            groups.setdefault(exp_part, {})[rest] = c
        total = Interval.point(0)
        for exp_part in sorted(groups):
            inner = Interval.point(0)
            for rest, c in sorted(groups[exp_part].items()):
                term = Interval.point(1)
                for key, exp in rest:
                    term = imul(term, ipow(self.atom_interval(key, boxes), exp))
                inner = iadd(inner, iscale(term, c))
            for key, exp in exp_part:
                inner = imul(inner, ipow(self.atom_interval(key, boxes), exp))
            total = iadd(total, inner)
        return total

    # -- substitution of an eliminated variable ------------------------------

    def poly_subst(self, p: PolyForm, key: tuple, repl: PolyForm) -> PolyForm:
        out = PolyForm(())
        for mono, c in p.terms:
            term = PolyForm.const(c)
            for k, exp in mono:
                if k == key:
                    term = term * repl.power(exp)
                else:
                    term = term * self._atom_subst(k, key, repl).power(exp)
            out = out + term
        return out

    def _atom_subst(self, k: tuple, key: tuple, repl: PolyForm) -> PolyForm:
        if k[0] in ("v", "p", "t"):
            return PolyForm.atom(k)
        payload = self.poly_subst(self.registry.poly(k[1]), key, repl)
        if k[0] == "inv":
            c = payload.constant_value()
            if c is not None and c != 0:
                return PolyForm.const(Fraction(1) / c)
            return PolyForm.atom(("inv", self.registry.sig(payload)))
        return PolyForm.atom((k[0], self.registry.sig(payload)))


def _factorize(e: RealExpr) -> tuple[Fraction, list[tuple[RealExpr, int]]]:
    """Decompose into rational coefficient times product of factor powers."""
    coeff = Fraction(1)
    factors: list[tuple[RealExpr, int]] = []

    def walk(node: RealExpr, mult: int):
        nonlocal coeff
        if isinstance(node, Lit):
            if node.value == 0:
                coeff = Fraction(0)
            else:
                coeff *= node.value**mult if mult > 0 else Fraction(1) / node.value ** (-mult)
            return
        if isinstance(node, Mul):
            walk(node.lhs, mult)
            walk(node.rhs, mult)
            return
        if isinstance(node, Div):
            walk(node.lhs, mult)
            walk(node.rhs, -mult)
            return
        if isinstance(node, Neg):
            coeff *= Fraction(-1) ** abs(mult)
            walk(node.arg, mult)
            return
        if isinstance(node, Pow):
            walk(node.base, mult * node.exponent)
            return
        factors.append((node, mult))

    walk(e, 1)
    return coeff, factors


# ---------------------------------------------------------------------------
# constraints

# op is one of "eq", "le", "lt", "ne"; the constraint reads  poly op 0.


@dataclass(frozen=True)
class Constraint:
    op: str
    poly: PolyForm


def _pred_constraints(p: Pred, norm: Normalizer) -> list[Constraint]:
    """Atomic constraints of an NNF conjunction of comparisons."""
    if isinstance(p, BoolLit):
        if p.value:
            return []
        return [Constraint("lt", PolyForm(()))]  # 0 < 0: unsatisfiable
    if isinstance(p, Cmp):
        d = norm.poly(Sub(p.lhs, p.rhs))
        if p.op == EQ:
            return [Constraint("eq", d)]
        if p.op == NE:
            return [Constraint("ne", d)]
        if p.op == LT:
            return [Constraint("lt", d)]
        if p.op == LE:
            return [Constraint("le", d)]
        if p.op == GT:
            return [Constraint("lt", d.scale(Fraction(-1)))]
        return [Constraint("le", d.scale(Fraction(-1)))]
    if isinstance(p, And):
        out = []
        for a in p.args:
            out.extend(_pred_constraints(a, norm))
        return out
    raise ValueError(f"not a conjunction of atoms: {pred_text(p)}")


def _hyp_cases(preds: Sequence[Pred], cap: int = 64) -> list[list[Pred]]:
    """Case-split disjunctive hypotheses (bounded, recursive); each case is
    a list of atomic comparisons.  Disjunctions beyond the cap are dropped,
    which only weakens the hypotheses (sound)."""
    base: list[Pred] = []
    alternatives: list[tuple[Pred, ...]] = []

    def flatten(q: Pred):
        if isinstance(q, And):
            for a in q.args:
                flatten(a)
        elif isinstance(q, Or):
            alternatives.append(q.args)
        elif q != TRUE:
            base.append(q)

    for p in preds:
        flatten(nnf(p))
    if not alternatives:
        return [base]
    total = 1
    kept: list[tuple[Pred, ...]] = []
    for alt in alternatives:
        if total * len(alt) > cap:
            continue
        total *= len(alt)
        kept.append(alt)
    cases: list[list[Pred]] = []
    for combo in itertools.product(*kept):
        cases.extend(_hyp_cases(base + list(combo), cap))
    return cases


# ---------------------------------------------------------------------------
# proof results


@dataclass
class ProofResult:
    status: str  # "proved" | "falsified" | "unknown"
    method: str = ""
    witness: Optional[dict] = None
    splits: int = 0
    samples: int = 0

    @property
    def proved(self) -> bool:
        return self.status == "proved"


@dataclass
class Budget:
    splits: int = 100_000
    used: int = 0

    def take(self) -> bool:
        if self.used >= self.splits:
            return False
        self.used += 1
        return True


# ---------------------------------------------------------------------------
# the prover


class Prover:
    def __init__(
        self,
        boxes: Boxes,
        budget: Budget,
    ):
        self.registry = AtomRegistry()
        self.boxes = boxes
        self.norm = Normalizer(self.registry, boxes)
        self.budget = budget
        self.used_interval = False

    # -- elimination ----------------------------------------------------------

    def _eliminate(
        self, hyps: list[Constraint], goal: Constraint
    ) -> tuple[list[Constraint], Constraint]:
        """Substitute away variables pinned linearly by equality hypotheses."""
        hyps = list(hyps)
        goal_ = goal
        for _ in range(32):
            pick = None
            for i, h in enumerate(hyps):
                if h.op != "eq":
                    continue
                sol = self._solve_linear(h.poly)
                if sol is not None:
                    pick = (i, sol)
                    break
            if pick is None:
                break
            i, (key, repl) = pick
            del hyps[i]
            hyps = [
                Constraint(h.op, self.norm.poly_subst(h.poly, key, repl)) for h in hyps
            ]
            goal_ = Constraint(goal_.op, self.norm.poly_subst(goal_.poly, key, repl))
        return hyps, goal_

    def _solve_linear(self, p: PolyForm) -> Optional[tuple[tuple, PolyForm]]:
        """A variable atom occurring exactly linearly with a rational
        coefficient and nowhere else (not even inside opaque payloads)."""
        return _solve_linear_poly(p, self.registry)

    # -- atomic inequality proving ---------------------------------------------

    def _residual_ok(self, r: PolyForm, strict: bool, boxes: Boxes) -> bool:
        iv = self.norm.interval(r, boxes)
        if strict:
            return iv.certainly_lt(Fraction(0))
        return iv.certainly_le(Fraction(0))

    def _cancel_candidates(self, goal: PolyForm, hyp: Constraint) -> list[Fraction]:
        cands: set[Fraction] = {Fraction(1)}
        gd = goal.as_dict()
        for mono, c in hyp.poly.terms:
            if mono in gd and c != 0:
                lam = gd[mono] / c
                if lam > 0 or hyp.op == "eq":
                    cands.add(lam)
        return sorted(cands)[:8]

    def _prove_leq(
        self,
        goal: PolyForm,
        strict: bool,
        hyps: list[Constraint],
        boxes: Boxes,
        depth: int = 2,
    ) -> bool:
        if self._residual_ok(goal, strict, boxes):
            return True
        if depth <= 0:
            return False
        usable = [h for h in hyps if h.op in ("le", "lt", "eq")]
        for h in usable:
            for lam in self._cancel_candidates(goal, h):
                if lam <= 0 and h.op != "eq":
                    continue
                if lam == 0:
                    continue
                residual = goal - h.poly.scale(lam)
                need_strict = strict and not (h.op == "lt" and lam > 0)
                if self._residual_ok(residual, need_strict, boxes):
                    return True
                if depth > 1 and self._prove_leq(
                    residual, need_strict, [x for x in hyps if x is not h], boxes, depth - 1
                ):
                    return True
        return False

    def _log_transform(self, goal: PolyForm, boxes: Boxes) -> Optional[PolyForm]:
        """Rewrite  A + E*Q <= 0  (one shared exponential factor E) into the
        equivalent logarithmic comparison, exact on the exponential payload.

        With Q certainly negative this is  A <= E*(-Q)  and becomes
        ln A - payload - ln(-Q) <= 0; with Q certainly positive it is
        E*Q <= -A  and becomes  payload + ln Q - ln(-A) <= 0.  Positivity
        of every logarithm argument is certified on the box first.
        """
        exp_terms = []
        rest_terms = []
        for m, c in goal.terms:
            if any(k[0] == "exp" for k, _ in m):
                exp_terms.append((m, c))
            else:
                rest_terms.append((m, c))
        if not exp_terms:
            return None
        ekey = None
        stripped: dict = {}
        for m, c in exp_terms:
            own = [(k, e) for k, e in m if k[0] == "exp"]
            if len(own) != 1 or own[0][1] != 1:
                return None
            if ekey is None:
                ekey = own[0][0]
            elif ekey != own[0][0]:
                return None
            rest_mono = tuple((k, e) for k, e in m if k[0] != "exp")
            stripped[rest_mono] = stripped.get(rest_mono, Fraction(0)) + c
        q = PolyForm.from_dict(stripped)
        a = PolyForm(tuple(rest_terms))
        payload = self.registry.poly(ekey[1])
        qi = self.norm.interval(q, boxes)
        if qi.certainly_lt(Fraction(0)):
            lhs = self._ln_of_poly(a, boxes)
            rhs = self._ln_of_poly(q.scale(Fraction(-1)), boxes)
            if lhs is None or rhs is None:
                return None
            return lhs - payload - rhs
        if qi.certainly_gt(Fraction(0)):
            lhs = self._ln_of_poly(q, boxes)
            rhs = self._ln_of_poly(a.scale(Fraction(-1)), boxes)
            if lhs is None or rhs is None:
                return None
            return payload + lhs - rhs
        return None

    def _ln_of_poly(self, p: PolyForm, boxes: Boxes) -> Optional[PolyForm]:
        """ln of a certainly-positive polynomial; single monomials split per
        atom so the keys line up with logarithms split from hypotheses."""
        if len(p.terms) == 1:
            mono, coeff = p.terms[0]
            if coeff <= 0:
                return None
            total = PolyForm(())
            if coeff != 1:
                total = total + PolyForm.atom(
                    ("ln", self.registry.sig(PolyForm.const(coeff)))
                )
            for key, exp in mono:
                base = PolyForm.atom(key)
                if not self.norm.interval(base, boxes).certainly_gt(Fraction(0)):
                    return None
                total = total + PolyForm.atom(
                    ("ln", self.registry.sig(base))
                ).scale(Fraction(exp))
            return total
        if not self.norm.interval(p, boxes).certainly_gt(Fraction(0)):
            return None
        return PolyForm.atom(("ln", self.registry.sig(p)))

    # -- branch and bound --------------------------------------------------------

    def _branch_and_bound(
        self,
        goal: PolyForm,
        strict: bool,
        hyps: list[Constraint],
        boxes: Boxes,
    ) -> bool:
        # splitting cannot shrink an unbounded direction of the goal
        for key in _deep_atoms(goal, self.registry):
            if key[0] in ("v", "t", "p"):
                iv = self.norm.atom_interval(key, boxes)
                if iv.lo is None or iv.hi is None:
                    return False
        dims = self._split_dims(goal, hyps, boxes)
        if not dims:
            return False
        stack = [boxes]
        while stack:
            box = stack.pop()
            if self._case_vacuous(hyps, box):
                continue
            if self._prove_leq(goal, strict, hyps, box, depth=1):
                continue
            if self._certainly_violated(goal, strict, hyps, box):
                return False  # a genuine counterexample region; stop splitting
            if self._certainly_violated(goal, strict, hyps, _collapse(box, dims)):
                return False  # the box centre is a concrete counterexample
            split = self._pick_dim(dims, box)
            if split is None or not self.budget.take():
                return False
            name, is_tau = split
            iv = box.tau if is_tau else box.var(name)
            mid = (iv.lo + iv.hi) / 2
            left, right = Interval(iv.lo, mid), Interval(mid, iv.hi)
            if is_tau:
                stack.append(box.with_tau(right))
                stack.append(box.with_tau(left))
            else:
                stack.append(box.with_var(name, right))
                stack.append(box.with_var(name, left))
        return True

    def _split_dims(self, goal, hyps, boxes: Boxes) -> list[tuple[str, bool]]:
        keys: set[tuple] = set(_deep_atoms(goal, self.registry))
        for h in hyps:
            keys |= _deep_atoms(h.poly, self.registry)
        dims: list[tuple[str, bool]] = []
        for k in sorted(keys):
            if k[0] == "v" and boxes.var(k[1]).width() is not None:
                dims.append((k[1], False))
            if k == TAU_KEY and boxes.tau.width() is not None:
                dims.append(("tau", True))
        return dims

    def _pick_dim(self, dims, box: Boxes) -> Optional[tuple[str, bool]]:
        best = None
        best_width = Fraction(0)
        for name, is_tau in dims:
            iv = box.tau if is_tau else box.var(name)
            w = iv.width()
            if w is not None and w > best_width:
                best_width = w
                best = (name, is_tau)
        return best

    def _certainly_violated(
        self, goal: PolyForm, strict: bool, hyps: list[Constraint], boxes: Boxes
    ) -> bool:
        """True when the whole box consists of counterexamples: every
        hypothesis certainly holds and the goal certainly fails."""
        for h in hyps:
            iv = self.norm.interval(h.poly, boxes)
            zero = Fraction(0)
            ok = (
                (h.op == "le" and iv.certainly_le(zero))
                or (h.op == "lt" and iv.certainly_lt(zero))
                or (h.op == "eq" and iv.is_point() and iv.lo == zero)
                or (h.op == "ne" and iv.excludes(zero))
            )
            if not ok:
                return False
        gi = self.norm.interval(goal, boxes)
        if strict:
            return gi.certainly_ge(Fraction(0))
        return gi.certainly_gt(Fraction(0))

    def _case_vacuous(self, hyps: list[Constraint], boxes: Boxes) -> bool:
        for h in hyps:
            iv = self.norm.interval(h.poly, boxes)
            if h.op == "eq" and iv.excludes(Fraction(0)):
                return True
            if h.op == "le" and iv.certainly_gt(Fraction(0)):
                return True
            if h.op == "lt" and iv.certainly_ge(Fraction(0)):
                return True
            if h.op == "ne" and h.poly.is_zero():
                return True
        return False

    # -- atomic task entry ---------------------------------------------------------

    def prove_atomic(self, hyp_preds: list[Pred], goal: Cmp) -> Optional[str]:
        """Prove one comparison under atomic hypotheses; returns the method
        name or None."""
        try:
            hyps: list[Constraint] = []
            for p in hyp_preds:
                hyps.extend(_pred_constraints(p, self.norm))
            (goal_c,) = _pred_constraints(goal, self.norm)
        except ValueError:
            return None
        if self._case_vacuous(hyps, self.boxes):
            return "vacuous"
        hyps, goal_c = self._eliminate(hyps, goal_c)
        if self._case_vacuous(hyps, self.boxes):
            return "vacuous"
        if goal_c.op == "eq":
            if goal_c.poly.is_zero():
                return "ring"
            return None
        if goal_c.op == "ne":
            for flipped in (goal_c.poly, goal_c.poly.scale(Fraction(-1))):
                if self._ineq(Constraint("lt", flipped), hyps):
                    return self._ineq_method
            return None
        if self._ineq(goal_c, hyps):
            return self._ineq_method
        return None

    _ineq_method = "interval"

    def _ineq(self, goal: Constraint, hyps: list[Constraint]) -> bool:
        strict = goal.op == "lt"
        const = goal.poly.constant_value()
        if const is not None:
            ok = const < 0 if strict else const <= 0
            if ok:
                self._ineq_method = "ring"
                return True
        if self._prove_leq(goal.poly, strict, hyps, self.boxes):
            self._ineq_method = "interval"
            self.used_interval = True
            return True
        logged = self._log_transform(goal.poly, self.boxes)
        if logged is not None and self._prove_leq(logged, strict, hyps, self.boxes):
            self._ineq_method = "interval"
            self.used_interval = True
            return True
        if self._branch_and_bound(goal.poly, strict, hyps, self.boxes):
            self._ineq_method = "interval"
            self.used_interval = True
            return True
        return False


def _collapse(box: Boxes, dims) -> Boxes:
    """Degenerate box at the centre of every splittable dimension."""
    out = box
    for name, is_tau in dims:
        iv = box.tau if is_tau else box.var(name)
        if iv.lo is None or iv.hi is None:
            continue
        mid = Interval.point((iv.lo + iv.hi) / 2)
        out = out.with_tau(mid) if is_tau else out.with_var(name, mid)
    return out


def _deep_atoms(p: PolyForm, registry: AtomRegistry) -> set[tuple]:
    out: set[tuple] = set()
    for key in p.atoms():
        out.add(key)
        if key[0] in ("exp", "ln", "inv"):
            out |= _deep_atoms(registry.poly(key[1]), registry)
    return out


# ---------------------------------------------------------------------------
# boolean structure and the public prover


def _prove_pred(
    prover: Prover, hyps: list[Pred], goal: Pred, depth: int = 8
) -> Optional[str]:
    """Prove an arbitrary quantifier-free goal; returns worst method used."""
    if depth < 0:
        return None
    goal = nnf(goal)
    if isinstance(goal, BoolLit):
        if goal.value:
            return "ring"
        # only provable when the hypotheses are contradictory
        method = None
        for case in _hyp_cases(hyps):
            m = prover.prove_atomic(case, Cmp(LT, Lit(Fraction(0)), Lit(Fraction(0))))
            if m is None:
                return None
            method = _worse(method, m)
        return method or "vacuous"
    if isinstance(goal, And):
        worst = None
        for part in goal.args:
            m = _prove_pred(prover, hyps, part, depth - 1)
            if m is None:
                return None
            worst = _worse(worst, m)
        return worst
    if isinstance(goal, Or):
        for i, part in enumerate(goal.args):
            rest = [nnf(pnot(p)) for j, p in enumerate(goal.args) if j != i]
            m = _prove_pred(prover, hyps + rest, part, depth - 1)
            if m is not None:
                return m
        return None
    if isinstance(goal, Cmp):
        worst = None
        for case in _hyp_cases(hyps):
            m = prover.prove_atomic(case, goal)
            if m is None:
                return None
            worst = _worse(worst, m)
        return worst
    return None


_METHOD_ORDER = {"vacuous": 0, "ring": 1, "interval": 2}


def _worse(a: Optional[str], b: str) -> str:
    if a is None:
        return b
    return a if _METHOD_ORDER[a] >= _METHOD_ORDER[b] else b


# ---------------------------------------------------------------------------
# box assembly


def mine_boxes(
    hyps: Sequence[Pred],
    user_bounds: Mapping[str, Interval],
    tau_upper: Optional[Fraction],
) -> Boxes:
    """Variable boxes from user bounds, tightened by interval-shaped
    hypotheses (a variable against a constant) and propagated across
    variable-to-variable equalities."""
    vars_box: dict[str, Interval] = dict(user_bounds)
    aliases: list[tuple[str, str]] = []

    def tighten(name: str, lo=None, hi=None):
        cur = vars_box.get(name, Interval.whole())
        nlo = cur.lo if lo is None else (lo if cur.lo is None else max(cur.lo, lo))
        nhi = cur.hi if hi is None else (hi if cur.hi is None else min(cur.hi, hi))
        if nlo is not None and nhi is not None and nlo > nhi:
            return  # contradictory hints; leave as-is, the prover will prune
        vars_box[name] = Interval(nlo, nhi)

    def scan(p: Pred):
        if isinstance(p, And):
            for a in p.args:
                scan(a)
            return
        if not isinstance(p, Cmp):
            return
        lhs, rhs, op = p.lhs, p.rhs, p.op
        if op == EQ and isinstance(lhs, Var) and isinstance(rhs, Var):
            aliases.append((lhs.name, rhs.name))
            return
        if isinstance(rhs, Var) and isinstance(lhs, Lit):
            lhs, rhs, op = rhs, lhs, {LT: GT, LE: GE, GT: LT, GE: LE, EQ: EQ, NE: NE}[op]
        if isinstance(lhs, Var) and isinstance(rhs, Lit):
            v = rhs.value
            if op in (LE, LT):
                tighten(lhs.name, hi=v)
            elif op in (GE, GT):
                tighten(lhs.name, lo=v)
            elif op == EQ:
                tighten(lhs.name, lo=v, hi=v)

    for h in hyps:
        scan(nnf(h))
    for _ in range(3):
        for a, b in aliases:
            ia = vars_box.get(a, Interval.whole())
            ib = vars_box.get(b, Interval.whole())
            tighten(a, lo=ib.lo, hi=ib.hi)
            tighten(b, lo=ia.lo, hi=ia.hi)
    tau = Interval(Fraction(0), tau_upper)
    return Boxes(vars_box, {}, tau)


# ---------------------------------------------------------------------------
# public entry points


def _instantiated_vc(vc: VC, params: Mapping[str, Fraction]) -> VC:
    hyps = tuple(instantiate_params(h, params) for h in vc.hypotheses)
    goal = instantiate_params(vc.goal, params)
    time = vc.time
    if time is not None:
        upper = None if time.upper is None else instantiate_params(time.upper, params)
        history = (
            None if time.history is None else instantiate_params(time.history, params)
        )
        time = TimeBinder(upper, history)
    return VC(vc.vc_id, vc.rule, hyps, goal, time)


def _expand_binder(vc: VC) -> tuple[list[Pred], Pred, Optional[Fraction]]:
    """Hypotheses, goal and tau upper bound with the guard history
    instantiated at the bound time and at zero (sound weakening)."""
    hyps = list(vc.hypotheses)
    upper: Optional[Fraction] = None
    if vc.time is not None:
        if vc.time.upper is not None:
            if not isinstance(vc.time.upper, Lit):
                raise BoxError("time bound must be instantiated to a rational")
            upper = vc.time.upper.value
        if vc.time.history is not None:
            hyps.append(vc.time.history)
            hyps.append(subst_time_pred(vc.time.history, Lit(Fraction(0))))
    return hyps, vc.goal, upper


def prove(
    vc: VC,
    bounds: Mapping[str, Interval] | None = None,
    params: Mapping[str, Fraction] | None = None,
    budget: int = 100_000,
    falsify_samples: int = 10_000,
    seed: int = 0,
) -> ProofResult:
    """Prove or falsify one VC; Unknown when the pipeline gives up."""
    vc = _instantiated_vc(vc, params or {})
    hyps, goal, tau_upper = _expand_binder(vc)
    boxes = mine_boxes(hyps, bounds or {}, tau_upper)
    b = Budget(budget)
    prover = Prover(boxes, b)
    method = _prove_pred(prover, hyps, goal)
    if method is not None:
        return ProofResult("proved", method, splits=b.used)
    result = _sample_falsify(vc, hyps, goal, boxes, falsify_samples, seed)
    result.splits = b.used
    return result


def falsify(
    vc: VC,
    bounds: Mapping[str, Interval] | None = None,
    params: Mapping[str, Fraction] | None = None,
    samples: int = 10_000,
    seed: int = 0,
) -> ProofResult:
    """Search for a concrete counterexample; never proves."""
    if samples < 1:
        raise ValueError("need at least one sample")
    vc = _instantiated_vc(vc, params or {})
    hyps, goal, tau_upper = _expand_binder(vc)
    boxes = mine_boxes(hyps, bounds or {}, tau_upper)
    return _sample_falsify(vc, hyps, goal, boxes, samples, seed)


_SAMPLE_CLAMP = Fraction(100)
_SAMPLE_GRID = 10_000


def _sample_box(iv: Interval, rng: random.Random) -> Fraction:
    lo = iv.lo if iv.lo is not None else -_SAMPLE_CLAMP
    hi = iv.hi if iv.hi is not None else _SAMPLE_CLAMP
    if lo > hi:
        lo = hi
    return lo + (hi - lo) * Fraction(rng.randint(0, _SAMPLE_GRID), _SAMPLE_GRID)


def _certain_pred(p: Pred, norm: Normalizer, point: Boxes, want: bool) -> bool:
    """Pointwise certainty via outward interval evaluation at a point box."""
    q = nnf(p) if want else nnf(pnot(p))
    return _certainly_true(q, norm, point)


def _certainly_true(p: Pred, norm: Normalizer, box: Boxes) -> bool:
    if isinstance(p, BoolLit):
        return p.value
    if isinstance(p, And):
        return all(_certainly_true(a, norm, box) for a in p.args)
    if isinstance(p, Or):
        return any(_certainly_true(a, norm, box) for a in p.args)
    if isinstance(p, Cmp):
        d = norm.poly(Sub(p.lhs, p.rhs))
        iv = norm.interval(d, box)
        zero = Fraction(0)
        if p.op == EQ:
            return iv.is_point() and iv.lo == zero
        if p.op == NE:
            return iv.excludes(zero)
        if p.op == LT:
            return iv.certainly_lt(zero)
        if p.op == LE:
            return iv.certainly_le(zero)
        if p.op == GT:
            return iv.certainly_gt(zero)
        return iv.certainly_ge(zero)
    return False


def _sample_falsify(
    vc: VC,
    hyps: list[Pred],
    goal: Pred,
    boxes: Boxes,
    samples: int,
    seed: int,
) -> ProofResult:
    """Uniform sampling inside the box, per hypothesis case.  Variables
    pinned linearly by equality hypotheses are computed rather than
    sampled, so constraint surfaces get hit.  A candidate only counts when
    outward interval re-evaluation at the point certifies every hypothesis
    true and the goal false."""
    rng = random.Random(seed)
    registry = AtomRegistry()
    norm = Normalizer(registry, boxes)
    all_names = sorted(set().union(set(), *(_pred_var_names(h) for h in hyps), _pred_var_names(goal)))
    has_binder = vc.time is not None
    history = vc.time.history if has_binder and vc.time.history is not None else None
    cases = _hyp_cases(hyps) or [[]]
    per_case = max(1, samples // len(cases))
    tried = 0
    for case in cases:
        try:
            constraints = [c for p in case for c in _pred_constraints(p, norm)]
        except ValueError:
            continue
        solutions: list[tuple[tuple, PolyForm]] = []
        work = list(constraints)
        for _ in range(32):
            found = None
            for i, h in enumerate(work):
                if h.op != "eq":
                    continue
                sol = _solve_linear_poly(h.poly, registry)
                if sol is not None:
                    found = (i, sol)
                    break
            if found is None:
                break
            i, (key, repl) = found
            del work[i]
            work = [
                Constraint(h.op, norm.poly_subst(h.poly, key, repl)) for h in work
            ]
            solutions = [
                (k, norm.poly_subst(p, key, repl)) for k, p in solutions
            ] + [(key, repl)]
        pinned = {key[1] for key, _ in solutions}
        free_names = [n for n in all_names if n not in pinned]
        for _ in range(per_case):
            tried += 1
            assign = {n: _sample_box(boxes.var(n), rng) for n in free_names}
            tau_val = _sample_box(boxes.tau, rng) if has_binder else Fraction(0)
            ok = True
            for key, repl in reversed(solutions):
                v = _poly_value(repl, assign, tau_val, norm)
                if v is None:
                    ok = False
                    break
                assign[key[1]] = v
            if not ok:
                continue
            point_vars = {n: Interval.point(v) for n, v in assign.items()}
            point = Boxes(point_vars, {}, Interval.point(tau_val))
            for h in hyps:
                if not _certain_pred(h, norm, point, True):
                    ok = False
                    break
            if ok and history is not None:
                hist_box = Boxes(point_vars, {}, Interval(Fraction(0), tau_val))
                if not _certainly_true(nnf(history), norm, hist_box):
                    ok = False
            if not ok:
                continue
            if _certain_pred(goal, norm, point, False):
                witness = {n: assign[n] for n in sorted(assign)}
                if has_binder:
                    witness["tau"] = tau_val
                return ProofResult(
                    "falsified", "sampling", witness=witness, samples=tried
                )
    return ProofResult("unknown", samples=tried)


def _solve_linear_poly(
    p: PolyForm, registry: AtomRegistry
) -> Optional[tuple[tuple, PolyForm]]:
    for mono, c in p.terms:
        if len(mono) != 1:
            continue
        key, exp = mono[0]
        if exp != 1 or key[0] != "v":
            continue
        rest = PolyForm(tuple((m, k) for m, k in p.terms if m != mono))
        if key in _deep_atoms(rest, registry):
            continue
        return key, rest.scale(Fraction(-1) / c)
    return None


def _poly_value(
    p: PolyForm,
    assign: Mapping[str, Fraction],
    tau_val: Fraction,
    norm: Normalizer,
) -> Optional[Fraction]:
    point_vars = {n: Interval.point(v) for n, v in assign.items()}
    point = Boxes(point_vars, {}, Interval.point(tau_val))
    try:
        iv = norm.interval(p, point)
    except BoxError:
        return None
    if iv.is_point():
        return iv.lo
    return None


def _pred_var_names(p: Pred) -> set[str]:
    from .expr import free_vars

    return set(free_vars(p))


def sample_pred_point(
    pred: Pred,
    bounds: Mapping[str, Interval] | None = None,
    params: Mapping[str, Fraction] | None = None,
    rng: random.Random | None = None,
    attempts: int = 400,
) -> Optional[dict[str, Fraction]]:
    """A rational point satisfying the predicate, or None.

    Variables pinned linearly by equalities are computed, the rest sampled
    uniformly inside the mined box; the candidate is accepted only when
    outward interval evaluation certifies the predicate at the point."""
    rng = rng or random.Random(0)
    pred_i = instantiate_params(pred, params or {})
    boxes = mine_boxes([pred_i], bounds or {}, None)
    registry = AtomRegistry()
    norm = Normalizer(registry, boxes)
    names = sorted(_pred_var_names(pred_i))
    cases = _hyp_cases([pred_i]) or [[]]
    per_case = max(1, attempts // len(cases))
    for case in cases:
        try:
            constraints = [c for p in case for c in _pred_constraints(p, norm)]
        except ValueError:
            continue
        solutions: list[tuple[tuple, PolyForm]] = []
        work = list(constraints)
        for _ in range(32):
            found = None
            for i, h in enumerate(work):
                if h.op != "eq":
                    continue
                sol = _solve_linear_poly(h.poly, registry)
                if sol is not None:
                    found = (i, sol)
                    break
            if found is None:
                break
            i, (key, repl) = found
            del work[i]
            work = [Constraint(h.op, norm.poly_subst(h.poly, key, repl)) for h in work]
            solutions = [
                (k, norm.poly_subst(p, key, repl)) for k, p in solutions
            ] + [(key, repl)]
        pinned = {key[1] for key, _ in solutions}
        free_names = [n for n in names if n not in pinned]
        for _ in range(per_case):
            assign = {n: _sample_box(boxes.var(n), rng) for n in free_names}
            ok = True
            for key, repl in reversed(solutions):
                v = _poly_value(repl, assign, Fraction(0), norm)
                if v is None:
                    ok = False
                    break
                assign[key[1]] = v
            if not ok:
                continue
            point = Boxes(
                {n: Interval.point(v) for n, v in assign.items()},
                {},
                Interval.point(0),
            )
            if _certain_pred(pred_i, norm, point, True):
                return assign
    return None
