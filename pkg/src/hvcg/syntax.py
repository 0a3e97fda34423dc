"""Hybrid program abstract syntax, derived-construct desugaring and the
pretty printer.

Core commands are assignments, tests, guarded evolutions (by vector field
or by explicit flow), sequence, choice and iteration.  Conditionals and
annotated loops are sugar; specification statements only appear inside
refinement goals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .expr import (
    Lit,
    Pred,
    RealExpr,
    Var,
    expr_text,
    free_vars,
    pred_text,
    pnot,
    simplify,
    subst_time,
    uses_time,
)
from .store import StateUpdate


class SyntaxError_(ValueError):
    """Malformed program construction (scope or shape)."""


@dataclass(frozen=True)
class VectorField:
    """One derivative expression per continuous variable; unlisted
    variables do not move.  Fields are autonomous: no time symbol."""

    derivs: tuple[tuple[str, RealExpr], ...]

    def __post_init__(self):
        seen = set()
        for name, e in self.derivs:
            if name in seen:
                raise SyntaxError_(f"duplicate derivative for {name!r}")
            seen.add(name)
            if uses_time(e):
                raise SyntaxError_("vector fields must not mention the time symbol")

    def rate(self, name: str) -> RealExpr:
        for k, e in self.derivs:
            if k == name:
                return e
        return Lit(Fraction(0))

    def names(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.derivs)

    def as_mapping(self) -> dict[str, RealExpr]:
        return dict(self.derivs)


@dataclass(frozen=True)
class TimeDomain:
    """Times [0, bound] (bound a parameter or rational) or [0, oo).

    The interval of existence of solutions is the whole real line in every
    shipped model; the marker records that U sits inside it and 0 belongs
    to both.
    """

    bound: Optional[RealExpr] = None
    existence: str = "UNIV"

    def is_bounded(self) -> bool:
        return self.bound is not None


@dataclass(frozen=True)
class FlowSpec:
    """Explicit solution map: per-variable expressions over state,
    parameters and the time symbol.  Unlisted variables stay put."""

    comps: tuple[tuple[str, RealExpr], ...]

    def __post_init__(self):
        seen = set()
        for name, _ in self.comps:
            if name in seen:
                raise SyntaxError_(f"duplicate flow component for {name!r}")
            seen.add(name)

    def names(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.comps)

    def component(self, name: str) -> RealExpr:
        for k, e in self.comps:
            if k == name:
                return e
        return Var(name)

    def at(self, time: RealExpr) -> StateUpdate:
        """The simultaneous state update produced by following the flow
        for the given time expression."""
        return StateUpdate.sim(
            tuple((x, simplify(subst_time(e, time))) for x, e in self.comps)
        )

    def as_mapping(self) -> dict[str, RealExpr]:
        return dict(self.comps)


# ---------------------------------------------------------------------------
# program nodes


@dataclass(frozen=True)
class HybridProgram:
    pass


@dataclass(frozen=True)
class Assign(HybridProgram):
    update: StateUpdate


SKIP = Assign(StateUpdate.seq(()))


@dataclass(frozen=True)
class Test(HybridProgram):
    cond: Pred


@dataclass(frozen=True)
class Ode(HybridProgram):
    field: VectorField
    guard: Pred
    dom: TimeDomain
    dinv: Optional[Pred] = None
    flow: Optional[FlowSpec] = None


@dataclass(frozen=True)
class Evol(HybridProgram):
    flow: FlowSpec
    guard: Pred
    dom: TimeDomain


@dataclass(frozen=True)
class Seq(HybridProgram):
    parts: tuple[HybridProgram, ...]


@dataclass(frozen=True)
class Choice(HybridProgram):
    parts: tuple[HybridProgram, ...]


@dataclass(frozen=True)
class Star(HybridProgram):
    body: HybridProgram
    inv: Optional[Pred] = None


@dataclass(frozen=True)
class If(HybridProgram):
    cond: Pred
    then: HybridProgram
    orelse: HybridProgram


@dataclass(frozen=True)
class While(HybridProgram):
    cond: Pred
    body: HybridProgram
    inv: Optional[Pred] = None


@dataclass(frozen=True)
class Loop(HybridProgram):
    body: HybridProgram
    inv: Pred


@dataclass(frozen=True)
class Spec(HybridProgram):
    pre: Pred
    post: Pred


@dataclass(frozen=True)
class Midpoint(HybridProgram):
    """A user assertion inside a sequence; splits VC generation there."""

    pred: Pred


def seq(*parts: HybridProgram) -> HybridProgram:
    flat: list[HybridProgram] = []
    for p in parts:
        if isinstance(p, Seq):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return SKIP
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def choice(*parts: HybridProgram) -> HybridProgram:
    flat: list[HybridProgram] = []
    for p in parts:
        if isinstance(p, Choice):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return Choice(tuple(flat))


def desugar(prog: HybridProgram) -> HybridProgram:
    """Translate conditionals and annotated loops into the core algebra.

    Conditionals become guarded choices, while-loops become a guarded star
    followed by the exit test, and annotated loops become stars.  Invariant
    annotations ride along as star metadata.
    """
    if isinstance(prog, (Assign, Test, Ode, Evol, Spec, Midpoint)):
        return prog
    if isinstance(prog, Seq):
        return seq(*(desugar(p) for p in prog.parts))
    if isinstance(prog, Choice):
        return choice(*(desugar(p) for p in prog.parts))
    if isinstance(prog, Star):
        return Star(desugar(prog.body), prog.inv)
    if isinstance(prog, If):
        return choice(
            seq(Test(prog.cond), desugar(prog.then)),
            seq(Test(pnot(prog.cond)), desugar(prog.orelse)),
        )
    if isinstance(prog, While):
        return seq(
            Star(seq(Test(prog.cond), desugar(prog.body)), prog.inv),
            Test(pnot(prog.cond)),
        )
    if isinstance(prog, Loop):
        return Star(desugar(prog.body), prog.inv)
    raise SyntaxError_(f"unknown program node {prog!r}")


def program_vars(prog: HybridProgram) -> frozenset[str]:
    out: set[str] = set()

    def walk(p: HybridProgram):
        if isinstance(p, Assign):
            for x, e in p.update.assignments:
                out.add(x)
                out.update(free_vars(e))
        elif isinstance(p, (Test, Midpoint)):
            out.update(free_vars(p.cond if isinstance(p, Test) else p.pred))
        elif isinstance(p, Ode):
            for x, e in p.field.derivs:
                out.add(x)
                out.update(free_vars(e))
            out.update(free_vars(p.guard))
            if p.dinv is not None:
                out.update(free_vars(p.dinv))
            if p.flow is not None:
                for x, e in p.flow.comps:
                    out.add(x)
                    out.update(free_vars(e))
        elif isinstance(p, Evol):
            for x, e in p.flow.comps:
                out.add(x)
                out.update(free_vars(e))
            out.update(free_vars(p.guard))
        elif isinstance(p, (Seq, Choice)):
            for q in p.parts:
                walk(q)
        elif isinstance(p, Star):
            walk(p.body)
            if p.inv is not None:
                out.update(free_vars(p.inv))
        elif isinstance(p, If):
            out.update(free_vars(p.cond))
            walk(p.then)
            walk(p.orelse)
        elif isinstance(p, While):
            out.update(free_vars(p.cond))
            walk(p.body)
            if p.inv is not None:
                out.update(free_vars(p.inv))
        elif isinstance(p, Loop):
            out.update(free_vars(p.inv))
            walk(p.body)
        elif isinstance(p, Spec):
            out.update(free_vars(p.pre))
            out.update(free_vars(p.post))

    walk(prog)
    return frozenset(out)


# ---------------------------------------------------------------------------
# pretty printing

_P_CHOICE, _P_SEQ, _P_POST = 1, 2, 3


def _dom_text(dom: TimeDomain) -> str:
    if dom.bound is None:
        return "on [0, inf)"
    return f"on [0, {expr_text(dom.bound)}]"


def program_text(prog: HybridProgram, prec: int = 0) -> str:
    def wrap(s: str, inner: int) -> str:
        return f"({s})" if inner < prec else s

    if isinstance(prog, Assign):
        u = prog.update
        if u.is_identity():
            return "skip"
        if u.simultaneous and len(u.assignments) > 1:
            names = ", ".join(x for x, _ in u.assignments)
            rhss = ", ".join(expr_text(e) for _, e in u.assignments)
            return wrap(f"{names} := {rhss}", _P_POST)
        if len(u.assignments) == 1:
            x, e = u.assignments[0]
            return wrap(f"{x} := {expr_text(e)}", _P_POST)
        return wrap(
            " ; ".join(f"{x} := {expr_text(e)}" for x, e in u.assignments), _P_SEQ
        )
    if isinstance(prog, Test):
        return wrap(f"? {pred_text(prog.cond)}", _P_POST)
    if isinstance(prog, Midpoint):
        return wrap(f"assert {{{pred_text(prog.pred)}}}", _P_POST)
    if isinstance(prog, Ode):
        inner = ", ".join(f"{x}' = {expr_text(e)}" for x, e in prog.field.derivs)
        s = f"{{{inner} & {pred_text(prog.guard)} {_dom_text(prog.dom)}}}"
        if prog.dinv is not None:
            s += f" dinv ({pred_text(prog.dinv)})"
        if prog.flow is not None:
            comps = ", ".join(f"{x} := {expr_text(e)}" for x, e in prog.flow.comps)
            s += f" flow {{{comps}}}"
        return wrap(s, _P_POST)
    if isinstance(prog, Evol):
        comps = ", ".join(f"{x} := {expr_text(e)}" for x, e in prog.flow.comps)
        return wrap(
            f"evol {{{comps}}} & {pred_text(prog.guard)} {_dom_text(prog.dom)}",
            _P_POST,
        )
    if isinstance(prog, Seq):
        return wrap(
            " ; ".join(program_text(p, _P_SEQ + 1) for p in prog.parts), _P_SEQ
        )
    if isinstance(prog, Choice):
        return wrap(
            " ++ ".join(program_text(p, _P_CHOICE + 1) for p in prog.parts),
            _P_CHOICE,
        )
    if isinstance(prog, Star):
        return wrap(f"{program_text(prog.body, _P_POST + 1)}*", _P_POST)
    if isinstance(prog, If):
        return wrap(
            f"if {pred_text(prog.cond)} then {program_text(prog.then, _P_POST + 1)}"
            f" else {program_text(prog.orelse, _P_POST + 1)}",
            _P_POST,
        )
    if isinstance(prog, While):
        inv = f" inv ({pred_text(prog.inv)})" if prog.inv is not None else ""
        return wrap(
            f"while {pred_text(prog.cond)}{inv} do {program_text(prog.body, _P_POST + 1)}",
            _P_POST,
        )
    if isinstance(prog, Loop):
        return wrap(
            f"loop {program_text(prog.body, _P_POST + 1)} inv ({pred_text(prog.inv)})",
            _P_POST,
        )
    if isinstance(prog, Spec):
        return wrap(f"[{pred_text(prog.pre)}, {pred_text(prog.post)}]", _P_POST)
    raise SyntaxError_(f"unknown program node {prog!r}")
