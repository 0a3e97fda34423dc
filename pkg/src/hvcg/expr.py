"""Symbolic real-valued expressions and quantifier-free predicates.

Expression trees are immutable. They close over three binder classes that
are kept apart on purpose: program variables (assignable), parameters
(never assigned, constrained by assumption predicates) and one reserved
time symbol used inside flow bodies and evolution goals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Union

Number = Union[int, float, Fraction]


class ExprError(Exception):
    pass


class UnboundNameError(ExprError):
    pass


class EvalDomainError(ExprError):
    """Division by zero or a logarithm of a non-positive argument."""


# ---------------------------------------------------------------------------
# expression nodes


@dataclass(frozen=True)
class RealExpr:
    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __pow__(self, n: int):
        return Pow(self, n)

    def __neg__(self):
        return Neg(self)


@dataclass(frozen=True)
class Lit(RealExpr):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Var(RealExpr):
    name: str


@dataclass(frozen=True)
class Param(RealExpr):
    name: str


@dataclass(frozen=True)
class TimeSym(RealExpr):
    """The reserved time symbol (spelled ``tau`` in the surface syntax)."""


TAU = TimeSym()


@dataclass(frozen=True)
class Add(RealExpr):
    lhs: RealExpr
    rhs: RealExpr


@dataclass(frozen=True)
class Sub(RealExpr):
    lhs: RealExpr
    rhs: RealExpr


@dataclass(frozen=True)
class Mul(RealExpr):
    lhs: RealExpr
    rhs: RealExpr


@dataclass(frozen=True)
class Div(RealExpr):
    lhs: RealExpr
    rhs: RealExpr


@dataclass(frozen=True)
class Neg(RealExpr):
    arg: RealExpr


@dataclass(frozen=True)
class Pow(RealExpr):
    base: RealExpr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or self.exponent < 0:
            raise ExprError("power exponents must be natural numbers")


@dataclass(frozen=True)
class Exp(RealExpr):
    arg: RealExpr


@dataclass(frozen=True)
class Ln(RealExpr):
    arg: RealExpr


def as_expr(value) -> RealExpr:
    if isinstance(value, RealExpr):
        return value
    if isinstance(value, (int, Fraction)):
        return Lit(Fraction(value))
    raise ExprError(f"cannot coerce {value!r} to an expression")


def lit(value) -> Lit:
    return Lit(Fraction(value))


# ---------------------------------------------------------------------------
# predicates

EQ, NE, LT, LE, GT, GE = "=", "!=", "<", "<=", ">", ">="
REL_OPS = (EQ, NE, LT, LE, GT, GE)

_NEGATED = {EQ: NE, NE: EQ, LT: GE, LE: GT, GT: LE, GE: LT}
_SWAPPED = {EQ: EQ, NE: NE, LT: GT, LE: GE, GT: LT, GE: LE}


@dataclass(frozen=True)
class Pred:
    pass


@dataclass(frozen=True)
class BoolLit(Pred):
    value: bool


TRUE = BoolLit(True)
FALSE = BoolLit(False)


@dataclass(frozen=True)
class Cmp(Pred):
    op: str
    lhs: RealExpr
    rhs: RealExpr

    def __post_init__(self):
        if self.op not in REL_OPS:
            raise ExprError(f"unknown relation {self.op!r}")


@dataclass(frozen=True)
class And(Pred):
    args: tuple[Pred, ...]


@dataclass(frozen=True)
class Or(Pred):
    args: tuple[Pred, ...]


@dataclass(frozen=True)
class Not(Pred):
    arg: Pred


def pand(*preds: Pred) -> Pred:
    """Conjunction, flattened, with boolean-literal absorption."""
    out: list[Pred] = []
    for p in preds:
        if isinstance(p, And):
            out.extend(p.args)
        elif p == FALSE:
            return FALSE
        elif p != TRUE:
            out.append(p)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def por(*preds: Pred) -> Pred:
    out: list[Pred] = []
    for p in preds:
        if isinstance(p, Or):
            out.extend(p.args)
        elif p == TRUE:
            return TRUE
        elif p != FALSE:
            out.append(p)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def pnot(p: Pred) -> Pred:
    if p == TRUE:
        return FALSE
    if p == FALSE:
        return TRUE
    if isinstance(p, Not):
        return p.arg
    return Not(p)


def implies(antecedent: Pred, consequent: Pred) -> Pred:
    return por(pnot(antecedent), consequent)


# ---------------------------------------------------------------------------
# evaluation


def eval_expr(
    e: RealExpr,
    variables: Mapping[str, Number],
    parameters: Mapping[str, Number] | None = None,
    tau: Number | None = None,
) -> Number:
    """Evaluate recursively; exact over rationals, double precision otherwise."""
    params = parameters or {}

    def ev(node: RealExpr) -> Number:
        if isinstance(node, Lit):
            return node.value
        if isinstance(node, Var):
            try:
                return variables[node.name]
            except KeyError:
                raise UnboundNameError(f"unbound variable {node.name!r}") from None
        if isinstance(node, Param):
            try:
                return params[node.name]
            except KeyError:
                raise UnboundNameError(f"unbound parameter {node.name!r}") from None
        if isinstance(node, TimeSym):
            if tau is None:
                raise UnboundNameError("time symbol used without a time value")
            return tau
        if isinstance(node, Add):
            return ev(node.lhs) + ev(node.rhs)
        if isinstance(node, Sub):
            return ev(node.lhs) - ev(node.rhs)
        if isinstance(node, Mul):
            return ev(node.lhs) * ev(node.rhs)
        if isinstance(node, Div):
            denom = ev(node.rhs)
            if denom == 0:
                raise EvalDomainError("division by zero")
            num = ev(node.lhs)
            if isinstance(num, Fraction) and isinstance(denom, Fraction):
                return num / denom
            return num / denom
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, Pow):
            return ev(node.base) ** node.exponent
        if isinstance(node, Exp):
            return math.exp(ev(node.arg))
        if isinstance(node, Ln):
            v = ev(node.arg)
            if v <= 0:
                raise EvalDomainError("logarithm of a non-positive value")
            return math.log(v)
        raise ExprError(f"unknown node {node!r}")

    return ev(e)


def eval_pred(
    p: Pred,
    variables: Mapping[str, Number],
    parameters: Mapping[str, Number] | None = None,
    tau: Number | None = None,
) -> bool:
    if isinstance(p, BoolLit):
        return p.value
    if isinstance(p, Cmp):
        a = eval_expr(p.lhs, variables, parameters, tau)
        b = eval_expr(p.rhs, variables, parameters, tau)
        return {
            EQ: a == b,
            NE: a != b,
            LT: a < b,
            LE: a <= b,
            GT: a > b,
            GE: a >= b,
        }[p.op]
    if isinstance(p, And):
        return all(eval_pred(q, variables, parameters, tau) for q in p.args)
    if isinstance(p, Or):
        return any(eval_pred(q, variables, parameters, tau) for q in p.args)
    if isinstance(p, Not):
        return not eval_pred(p.arg, variables, parameters, tau)
    raise ExprError(f"unknown predicate {p!r}")


# ---------------------------------------------------------------------------
# structural queries


def free_vars(e: RealExpr | Pred) -> frozenset[str]:
    """Program variables occurring in the tree (parameters tracked separately)."""
    out: set[str] = set()

    def walk(node):
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            walk(node.lhs)
            walk(node.rhs)
        elif isinstance(node, (Neg, Not)):
            walk(node.arg)
        elif isinstance(node, Pow):
            walk(node.base)
        elif isinstance(node, (Exp, Ln)):
            walk(node.arg)
        elif isinstance(node, Cmp):
            walk(node.lhs)
            walk(node.rhs)
        elif isinstance(node, (And, Or)):
            for a in node.args:
                walk(a)

    walk(e)
    return frozenset(out)


def free_params(e: RealExpr | Pred) -> frozenset[str]:
    out: set[str] = set()

    def walk(node):
        if isinstance(node, Param):
            out.add(node.name)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            walk(node.lhs)
            walk(node.rhs)
        elif isinstance(node, (Neg, Not)):
            walk(node.arg)
        elif isinstance(node, Pow):
            walk(node.base)
        elif isinstance(node, (Exp, Ln)):
            walk(node.arg)
        elif isinstance(node, Cmp):
            walk(node.lhs)
            walk(node.rhs)
        elif isinstance(node, (And, Or)):
            for a in node.args:
                walk(a)

    walk(e)
    return frozenset(out)


def uses_time(e: RealExpr | Pred) -> bool:
    if isinstance(e, TimeSym):
        return True
    if isinstance(e, (Add, Sub, Mul, Div, Cmp)):
        return uses_time(e.lhs) or uses_time(e.rhs)
    if isinstance(e, (Neg, Exp, Ln)):
        return uses_time(e.arg)
    if isinstance(e, Not):
        return uses_time(e.arg)
    if isinstance(e, Pow):
        return uses_time(e.base)
    if isinstance(e, (And, Or)):
        return any(uses_time(a) for a in e.args)
    return False


def not_depends(name: str, e: RealExpr | Pred) -> bool:
    """Syntactic non-dependence on a program variable, checked after
    simplification.  Sound but incomplete for the semantic notion."""
    node = simplify(e) if isinstance(e, RealExpr) else simplify_pred(e)
    return name not in free_vars(node)


# ---------------------------------------------------------------------------
# substitution


def subst(e: RealExpr, mapping: Mapping[str, RealExpr]) -> RealExpr:
    """Parallel substitution of expressions for program variables."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, (Lit, Param, TimeSym)):
        return e
    if isinstance(e, Add):
        return Add(subst(e.lhs, mapping), subst(e.rhs, mapping))
    if isinstance(e, Sub):
        return Sub(subst(e.lhs, mapping), subst(e.rhs, mapping))
    if isinstance(e, Mul):
        return Mul(subst(e.lhs, mapping), subst(e.rhs, mapping))
    if isinstance(e, Div):
        return Div(subst(e.lhs, mapping), subst(e.rhs, mapping))
    if isinstance(e, Neg):
        return Neg(subst(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(subst(e.base, mapping), e.exponent)
    if isinstance(e, Exp):
        return Exp(subst(e.arg, mapping))
    if isinstance(e, Ln):
        return Ln(subst(e.arg, mapping))
    raise ExprError(f"unknown node {e!r}")


def subst_pred(p: Pred, mapping: Mapping[str, RealExpr]) -> Pred:
    if isinstance(p, BoolLit):
        return p
    if isinstance(p, Cmp):
        return Cmp(p.op, subst(p.lhs, mapping), subst(p.rhs, mapping))
    if isinstance(p, And):
        return And(tuple(subst_pred(a, mapping) for a in p.args))
    if isinstance(p, Or):
        return Or(tuple(subst_pred(a, mapping) for a in p.args))
    if isinstance(p, Not):
        return Not(subst_pred(p.arg, mapping))
    raise ExprError(f"unknown predicate {p!r}")


def subst_time(e: RealExpr, replacement: RealExpr) -> RealExpr:
    if isinstance(e, TimeSym):
        return replacement
    if isinstance(e, (Lit, Var, Param)):
        return e
    if isinstance(e, Add):
        return Add(subst_time(e.lhs, replacement), subst_time(e.rhs, replacement))
    if isinstance(e, Sub):
        return Sub(subst_time(e.lhs, replacement), subst_time(e.rhs, replacement))
    if isinstance(e, Mul):
        return Mul(subst_time(e.lhs, replacement), subst_time(e.rhs, replacement))
    if isinstance(e, Div):
        return Div(subst_time(e.lhs, replacement), subst_time(e.rhs, replacement))
    if isinstance(e, Neg):
        return Neg(subst_time(e.arg, replacement))
    if isinstance(e, Pow):
        return Pow(subst_time(e.base, replacement), e.exponent)
    if isinstance(e, Exp):
        return Exp(subst_time(e.arg, replacement))
    if isinstance(e, Ln):
        return Ln(subst_time(e.arg, replacement))
    raise ExprError(f"unknown node {e!r}")


def subst_time_pred(p: Pred, replacement: RealExpr) -> Pred:
    if isinstance(p, BoolLit):
        return p
    if isinstance(p, Cmp):
        return Cmp(p.op, subst_time(p.lhs, replacement), subst_time(p.rhs, replacement))
    if isinstance(p, And):
        return And(tuple(subst_time_pred(a, replacement) for a in p.args))
    if isinstance(p, Or):
        return Or(tuple(subst_time_pred(a, replacement) for a in p.args))
    if isinstance(p, Not):
        return Not(subst_time_pred(p.arg, replacement))
    raise ExprError(f"unknown predicate {p!r}")


def instantiate_params(e, bindings: Mapping[str, Fraction]):
    """Replace parameters by rational literals, in an expression or predicate."""
    if isinstance(e, Pred):
        if isinstance(e, BoolLit):
            return e
        if isinstance(e, Cmp):
            return Cmp(
                e.op,
                instantiate_params(e.lhs, bindings),
                instantiate_params(e.rhs, bindings),
            )
        if isinstance(e, And):
            return And(tuple(instantiate_params(a, bindings) for a in e.args))
        if isinstance(e, Or):
            return Or(tuple(instantiate_params(a, bindings) for a in e.args))
        if isinstance(e, Not):
            return Not(instantiate_params(e.arg, bindings))
    if isinstance(e, Param):
        if e.name in bindings:
            return Lit(Fraction(bindings[e.name]))
        return e
    if isinstance(e, (Lit, Var, TimeSym)):
        return e
    if isinstance(e, (Add, Sub, Mul, Div)):
        return type(e)(
            instantiate_params(e.lhs, bindings), instantiate_params(e.rhs, bindings)
        )
    if isinstance(e, Neg):
        return Neg(instantiate_params(e.arg, bindings))
    if isinstance(e, Pow):
        return Pow(instantiate_params(e.base, bindings), e.exponent)
    if isinstance(e, Exp):
        return Exp(instantiate_params(e.arg, bindings))
    if isinstance(e, Ln):
        return Ln(instantiate_params(e.arg, bindings))
    raise ExprError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# simplification

def _const(e: RealExpr) -> Optional[Fraction]:
    return e.value if isinstance(e, Lit) else None


def simplify(e: RealExpr) -> RealExpr:
    """Light normalisation: constant folding and unit/zero identities.

    Equality decisions are made by polynomial normalisation, not here; this
    pass only keeps derivative and substitution output readable and small.
    """
    if isinstance(e, (Lit, Var, Param, TimeSym)):
        return e
    if isinstance(e, Add):
        a, b = simplify(e.lhs), simplify(e.rhs)
        ca, cb = _const(a), _const(b)
        if ca is not None and cb is not None:
            return Lit(ca + cb)
        if ca == 0:
            return b
        if cb == 0:
            return a
        return Add(a, b)
    if isinstance(e, Sub):
        a, b = simplify(e.lhs), simplify(e.rhs)
        ca, cb = _const(a), _const(b)
        if ca is not None and cb is not None:
            return Lit(ca - cb)
        if cb == 0:
            return a
        if ca == 0:
            return simplify(Neg(b))
        if a == b:
            return Lit(Fraction(0))
        return Sub(a, b)
    if isinstance(e, Mul):
        a, b = simplify(e.lhs), simplify(e.rhs)
        ca, cb = _const(a), _const(b)
        if ca is not None and cb is not None:
            return Lit(ca * cb)
        if ca == 0 or cb == 0:
            return Lit(Fraction(0))
        if ca == 1:
            return b
        if cb == 1:
            return a
        if ca == -1:
            return simplify(Neg(b))
        if cb == -1:
            return simplify(Neg(a))
        return Mul(a, b)
    if isinstance(e, Div):
        a, b = simplify(e.lhs), simplify(e.rhs)
        ca, cb = _const(a), _const(b)
        if cb is not None and cb != 0:
            if ca is not None:
                return Lit(ca / cb)
            if cb == 1:
                return a
        if ca == 0 and (cb is None or cb != 0):
            return Lit(Fraction(0))
        return Div(a, b)
    if isinstance(e, Neg):
        a = simplify(e.arg)
        ca = _const(a)
        if ca is not None:
            return Lit(-ca)
        if isinstance(a, Neg):
            return a.arg
        return Neg(a)
    if isinstance(e, Pow):
        a = simplify(e.base)
        if e.exponent == 0:
            return Lit(Fraction(1))
        if e.exponent == 1:
            return a
        ca = _const(a)
        if ca is not None:
            return Lit(ca**e.exponent)
        return Pow(a, e.exponent)
    if isinstance(e, Exp):
        a = simplify(e.arg)
        if _const(a) == 0:
            return Lit(Fraction(1))
        return Exp(a)
    if isinstance(e, Ln):
        a = simplify(e.arg)
        if _const(a) == 1:
            return Lit(Fraction(0))
        return Ln(a)
    raise ExprError(f"unknown node {e!r}")


def simplify_pred(p: Pred) -> Pred:
    if isinstance(p, BoolLit):
        return p
    if isinstance(p, Cmp):
        return Cmp(p.op, simplify(p.lhs), simplify(p.rhs))
    if isinstance(p, And):
        return pand(*(simplify_pred(a) for a in p.args))
    if isinstance(p, Or):
        return por(*(simplify_pred(a) for a in p.args))
    if isinstance(p, Not):
        return pnot(simplify_pred(p.arg))
    raise ExprError(f"unknown predicate {p!r}")


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e: RealExpr, wrt: str | None = None) -> RealExpr:
    """Symbolic derivative; ``wrt=None`` differentiates along the time symbol."""

    def d(node: RealExpr) -> RealExpr:
        if isinstance(node, Lit) or isinstance(node, Param):
            return Lit(Fraction(0))
        if isinstance(node, Var):
            return Lit(Fraction(1 if node.name == wrt else 0))
        if isinstance(node, TimeSym):
            return Lit(Fraction(1 if wrt is None else 0))
        if isinstance(node, Add):
            return Add(d(node.lhs), d(node.rhs))
        if isinstance(node, Sub):
            return Sub(d(node.lhs), d(node.rhs))
        if isinstance(node, Mul):
            return Add(Mul(d(node.lhs), node.rhs), Mul(node.lhs, d(node.rhs)))
        if isinstance(node, Div):
            return Div(
                Sub(Mul(d(node.lhs), node.rhs), Mul(node.lhs, d(node.rhs))),
                Pow(node.rhs, 2),
            )
        if isinstance(node, Neg):
            return Neg(d(node.arg))
        if isinstance(node, Pow):
            if node.exponent == 0:
                return Lit(Fraction(0))
            return Mul(
                Mul(Lit(Fraction(node.exponent)), Pow(node.base, node.exponent - 1)),
                d(node.base),
            )
        if isinstance(node, Exp):
            return Mul(Exp(node.arg), d(node.arg))
        if isinstance(node, Ln):
            return Div(d(node.arg), node.arg)
        raise ExprError(f"unknown node {node!r}")

    return simplify(d(e))


def lie_derivative(mu: RealExpr, field: Mapping[str, RealExpr]) -> RealExpr:
    """Directional derivative of ``mu`` along a vector field: the sum of
    each partial derivative times the corresponding derivative expression."""
    total: RealExpr = Lit(Fraction(0))
    for name in sorted(free_vars(mu)):
        rate = field.get(name, Lit(Fraction(0)))
        total = Add(total, Mul(differentiate(mu, name), rate))
    return simplify(total)


# ---------------------------------------------------------------------------
# negation normal form


def nnf(p: Pred) -> Pred:
    """Push negations to the atoms, flipping relations on the way."""
    if isinstance(p, BoolLit) or isinstance(p, Cmp):
        return p
    if isinstance(p, And):
        return pand(*(nnf(a) for a in p.args))
    if isinstance(p, Or):
        return por(*(nnf(a) for a in p.args))
    if isinstance(p, Not):
        q = p.arg
        if isinstance(q, BoolLit):
            return BoolLit(not q.value)
        if isinstance(q, Cmp):
            return Cmp(_NEGATED[q.op], q.lhs, q.rhs)
        if isinstance(q, Not):
            return nnf(q.arg)
        if isinstance(q, And):
            return por(*(nnf(Not(a)) for a in q.args))
        if isinstance(q, Or):
            return pand(*(nnf(Not(a)) for a in q.args))
    raise ExprError(f"unknown predicate {p!r}")


def negate_cmp(c: Cmp) -> Cmp:
    return Cmp(_NEGATED[c.op], c.lhs, c.rhs)


def swap_cmp(c: Cmp) -> Cmp:
    return Cmp(_SWAPPED[c.op], c.rhs, c.lhs)


# ---------------------------------------------------------------------------
# polynomial normal form

# A monomial maps atom keys to positive integer exponents; the canonical
# form is a sorted tuple of (key, exponent) pairs.  Keys are small tuples:
# ("v", name) for variables, ("p", name) for parameters, ("t",) for the
# time symbol.  The discharge engine reuses the same machinery with an
# extra key class for opaque subterms.

Monomial = tuple[tuple[tuple, int], ...]
AtomizeFn = Callable[[RealExpr], Optional[tuple]]


class NotPolynomial(ExprError):
    pass


@dataclass(frozen=True)
class PolyForm:
    """Canonical multivariate polynomial with rational coefficients."""

    terms: tuple[tuple[Monomial, Fraction], ...]

    @staticmethod
    def from_dict(d: Mapping[Monomial, Fraction]) -> "PolyForm":
        items = tuple(sorted((m, c) for m, c in d.items() if c != 0))
        return PolyForm(items)

    def as_dict(self) -> dict[Monomial, Fraction]:
        return dict(self.terms)

    @staticmethod
    def const(c) -> "PolyForm":
        c = Fraction(c)
        return PolyForm(((tuple(), c),) if c != 0 else tuple())

    @staticmethod
    def atom(key: tuple) -> "PolyForm":
        return PolyForm(((((key, 1),), Fraction(1)),))

    def is_zero(self) -> bool:
        return not self.terms

    def constant_value(self) -> Optional[Fraction]:
        if self.is_zero():
            return Fraction(0)
        if len(self.terms) == 1 and self.terms[0][0] == tuple():
            return self.terms[0][1]
        return None

    def __add__(self, other: "PolyForm") -> "PolyForm":
        d = self.as_dict()
        for m, c in other.terms:
            d[m] = d.get(m, Fraction(0)) + c
        return PolyForm.from_dict(d)

    def __sub__(self, other: "PolyForm") -> "PolyForm":
        return self + other.scale(Fraction(-1))

    def scale(self, c: Fraction) -> "PolyForm":
        if c == 0:
            return PolyForm(tuple())
        return PolyForm(tuple((m, k * c) for m, k in self.terms))

    def __mul__(self, other: "PolyForm") -> "PolyForm":
        d: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                keys: dict[tuple, int] = dict(m1)
                for k, e in m2:
                    keys[k] = keys.get(k, 0) + e
                m = tuple(sorted(keys.items()))
                d[m] = d.get(m, Fraction(0)) + c1 * c2
        return PolyForm.from_dict(d)

    def power(self, n: int) -> "PolyForm":
        out = PolyForm.const(1)
        for _ in range(n):
            out = out * self
        return out

    def atoms(self) -> frozenset[tuple]:
        return frozenset(k for m, _ in self.terms for k, _ in m)


def poly_of(e: RealExpr, atomize: AtomizeFn) -> PolyForm:
    """Normalise into a polynomial over the keys produced by ``atomize``.

    Raises NotPolynomial when a subterm cannot be treated as an atom and is
    not polynomial (a quotient by a non-constant, exp, ln).
    """
    if isinstance(e, Lit):
        return PolyForm.const(e.value)
    key = atomize(e)
    if key is not None:
        return PolyForm.atom(key)
    if isinstance(e, Add):
        return poly_of(e.lhs, atomize) + poly_of(e.rhs, atomize)
    if isinstance(e, Sub):
        return poly_of(e.lhs, atomize) - poly_of(e.rhs, atomize)
    if isinstance(e, Mul):
        return poly_of(e.lhs, atomize) * poly_of(e.rhs, atomize)
    if isinstance(e, Neg):
        return poly_of(e.arg, atomize).scale(Fraction(-1))
    if isinstance(e, Pow):
        return poly_of(e.base, atomize).power(e.exponent)
    if isinstance(e, Div):
        denom = poly_of(e.rhs, atomize)
        c = denom.constant_value()
        if c is None or c == 0:
            raise NotPolynomial("quotient by a non-constant")
        return poly_of(e.lhs, atomize).scale(Fraction(1) / c)
    raise NotPolynomial(f"non-polynomial node {type(e).__name__}")


def _basic_atomize(e: RealExpr) -> Optional[tuple]:
    if isinstance(e, Var):
        return ("v", e.name)
    if isinstance(e, Param):
        return ("p", e.name)
    if isinstance(e, TimeSym):
        return ("t",)
    return None


def poly_normalize(e: RealExpr) -> Optional[PolyForm]:
    """Canonical polynomial over variables, parameters and the time symbol,
    or None when the expression is not a polynomial."""
    try:
        return poly_of(e, _basic_atomize)
    except NotPolynomial:
        return None


def poly_equal(a: RealExpr, b: RealExpr) -> Optional[bool]:
    """Ring equality test; None when either side is not polynomial."""
    pa, pb = poly_normalize(a), poly_normalize(b)
    if pa is None or pb is None:
        return None
    return (pa - pb).is_zero()


# ---------------------------------------------------------------------------
# printing

_PREC_OR, _PREC_AND, _PREC_NOT = 1, 2, 3
_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def expr_text(e: RealExpr, prec: int = 0) -> str:
    def wrap(s: str, inner: int) -> str:
        return f"({s})" if inner < prec else s

    if isinstance(e, Lit):
        v = e.value
        if v.denominator == 1:
            return wrap(str(v.numerator), _PREC_ATOM if v >= 0 else _PREC_UNARY)
        return wrap(f"{v.numerator}/{v.denominator}", _PREC_MUL)
    if isinstance(e, Var) or isinstance(e, Param):
        return e.name
    if isinstance(e, TimeSym):
        return "tau"
    if isinstance(e, Add):
        return wrap(
            f"{expr_text(e.lhs, _PREC_ADD)} + {expr_text(e.rhs, _PREC_ADD + 1)}",
            _PREC_ADD,
        )
    if isinstance(e, Sub):
        return wrap(
            f"{expr_text(e.lhs, _PREC_ADD)} - {expr_text(e.rhs, _PREC_ADD + 1)}",
            _PREC_ADD,
        )
    if isinstance(e, Mul):
        return wrap(
            f"{expr_text(e.lhs, _PREC_MUL)}*{expr_text(e.rhs, _PREC_MUL + 1)}",
            _PREC_MUL,
        )
    if isinstance(e, Div):
        return wrap(
            f"{expr_text(e.lhs, _PREC_MUL)}/{expr_text(e.rhs, _PREC_MUL + 1)}",
            _PREC_MUL,
        )
    if isinstance(e, Neg):
        return wrap(f"-{expr_text(e.arg, _PREC_UNARY)}", _PREC_UNARY)
    if isinstance(e, Pow):
        return wrap(f"{expr_text(e.base, _PREC_POW + 1)}^{e.exponent}", _PREC_POW)
    if isinstance(e, Exp):
        return f"exp({expr_text(e.arg)})"
    if isinstance(e, Ln):
        return f"ln({expr_text(e.arg)})"
    raise ExprError(f"unknown node {e!r}")


def pred_text(p: Pred, prec: int = 0) -> str:
    def wrap(s: str, inner: int) -> str:
        return f"({s})" if inner < prec else s

    if isinstance(p, BoolLit):
        return "true" if p.value else "false"
    if isinstance(p, Cmp):
        return wrap(f"{expr_text(p.lhs)} {p.op} {expr_text(p.rhs)}", _PREC_NOT)
    if isinstance(p, And):
        return wrap(
            " and ".join(pred_text(a, _PREC_AND + 1) for a in p.args), _PREC_AND
        )
    if isinstance(p, Or):
        return wrap(" or ".join(pred_text(a, _PREC_OR + 1) for a in p.args), _PREC_OR)
    if isinstance(p, Not):
        return wrap(f"not {pred_text(p.arg, _PREC_NOT + 1)}", _PREC_NOT)
    raise ExprError(f"unknown predicate {p!r}")


# ---------------------------------------------------------------------------
# compilation to python callables (used by the simulator)


def compile_expr(
    e: RealExpr,
    var_order: Iterable[str],
    parameters: Mapping[str, Number],
):
    """Compile to a float-valued function of (state_list, tau)."""
    index = {name: i for i, name in enumerate(var_order)}

    def src(node: RealExpr) -> str:
        if isinstance(node, Lit):
            return f"({float(node.value)!r})"
        if isinstance(node, Var):
            if node.name not in index:
                raise UnboundNameError(f"unbound variable {node.name!r}")
            return f"s[{index[node.name]}]"
        if isinstance(node, Param):
            if node.name not in parameters:
                raise UnboundNameError(f"unbound parameter {node.name!r}")
            return f"({float(parameters[node.name])!r})"
        if isinstance(node, TimeSym):
            return "t"
        if isinstance(node, Add):
            return f"({src(node.lhs)} + {src(node.rhs)})"
        if isinstance(node, Sub):
            return f"({src(node.lhs)} - {src(node.rhs)})"
        if isinstance(node, Mul):
            return f"({src(node.lhs)} * {src(node.rhs)})"
        if isinstance(node, Div):
            return f"({src(node.lhs)} / {src(node.rhs)})"
        if isinstance(node, Neg):
            return f"(-{src(node.arg)})"
        if isinstance(node, Pow):
            return f"({src(node.base)} ** {node.exponent})"
        if isinstance(node, Exp):
            return f"_exp({src(node.arg)})"
        if isinstance(node, Ln):
            return f"_log({src(node.arg)})"
        raise ExprError(f"unknown node {node!r}")

    code = f"lambda s, t=0.0: {src(e)}"
    return eval(code, {"_exp": math.exp, "_log": math.log})


def compile_pred(
    p: Pred,
    var_order: Iterable[str],
    parameters: Mapping[str, Number],
):
    """Compile a predicate to a boolean function of (state_list, tau).

    ``slack`` loosens non-strict comparisons; the simulator uses a small
    positive slack when checking for violations so that floating-point dust
    from the integrator does not count as one.
    """
    index = {name: i for i, name in enumerate(var_order)}

    def esrc(node: RealExpr) -> str:
        return _expr_src(node, index, parameters)

    def psrc(node: Pred) -> str:
        if isinstance(node, BoolLit):
            return "True" if node.value else "False"
        if isinstance(node, Cmp):
            a, b = esrc(node.lhs), esrc(node.rhs)
            op = {EQ: "==", NE: "!=", LT: "<", LE: "<=", GT: ">", GE: ">="}[node.op]
            if node.op in (LE, GE, EQ):
                # widen by the slack so boundary values pass
                if node.op == LE:
                    return f"({a} <= {b} + slack)"
                if node.op == GE:
                    return f"({a} >= {b} - slack)"
                return f"(abs({a} - ({b})) <= slack)"
            return f"({a} {op} {b})"
        if isinstance(node, And):
            return "(" + " and ".join(psrc(a) for a in node.args) + ")"
        if isinstance(node, Or):
            return "(" + " or ".join(psrc(a) for a in node.args) + ")"
        if isinstance(node, Not):
            return f"(not {psrc(node.arg)})"
        raise ExprError(f"unknown predicate {node!r}")

    code = f"lambda s, t=0.0, slack=0.0: {psrc(p)}"
    return eval(code, {"_exp": math.exp, "_log": math.log})


def _expr_src(node: RealExpr, index, parameters) -> str:
    if isinstance(node, Lit):
        return f"({float(node.value)!r})"
    if isinstance(node, Var):
        if node.name not in index:
            raise UnboundNameError(f"unbound variable {node.name!r}")
        return f"s[{index[node.name]}]"
    if isinstance(node, Param):
        if node.name not in parameters:
            raise UnboundNameError(f"unbound parameter {node.name!r}")
        return f"({float(parameters[node.name])!r})"
    if isinstance(node, TimeSym):
        return "t"
    if isinstance(node, Add):
        return f"({_expr_src(node.lhs, index, parameters)} + {_expr_src(node.rhs, index, parameters)})"
    if isinstance(node, Sub):
        return f"({_expr_src(node.lhs, index, parameters)} - {_expr_src(node.rhs, index, parameters)})"
    if isinstance(node, Mul):
        return f"({_expr_src(node.lhs, index, parameters)} * {_expr_src(node.rhs, index, parameters)})"
    if isinstance(node, Div):
        return f"({_expr_src(node.lhs, index, parameters)} / {_expr_src(node.rhs, index, parameters)})"
    if isinstance(node, Neg):
        return f"(-{_expr_src(node.arg, index, parameters)})"
    if isinstance(node, Pow):
        return f"({_expr_src(node.base, index, parameters)} ** {node.exponent})"
    if isinstance(node, Exp):
        return f"_exp({_expr_src(node.arg, index, parameters)})"
    if isinstance(node, Ln):
        return f"_log({_expr_src(node.arg, index, parameters)})"
    raise ExprError(f"unknown node {node!r}")
