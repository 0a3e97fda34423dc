"""Verification-condition generation for hybrid correctness goals.

The generator walks the desugared program backwards.  Postconditions are
kept as a list of obligation items (path hypotheses plus a goal) so that
each conditional branch and each evolution command yields its own
self-contained arithmetic VC.  Tests add hypotheses, assignments
substitute, loops and user assertions act as barriers that anchor the
pending items and emit them.

Evolution commands by flow produce the one genuinely hybrid VC shape: a
goal under a universally quantified time over the domain, with the guard
history available as a hypothesis over earlier instants.  Evolution
commands by differential invariant stay first-order: an entry implication,
the invariance obligations (delegated to certification) and an exit
implication.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .expr import (
    Pred,
    RealExpr,
    TAU,
    implies,
    pand,
    pred_text,
    simplify_pred,
)
from .parsing import HoareGoal
from .store import StateUpdate
from .syntax import (
    Assign,
    Choice,
    Evol,
    FlowSpec,
    HybridProgram,
    Midpoint,
    Ode,
    Seq,
    Spec,
    Star,
    Test,
    TimeDomain,
    desugar,
)


class MissingAnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class TimeBinder:
    """A universally quantified time over [0, upper] (upper None: [0, oo)).

    ``history`` is the guard composed with the flow; it may mention the
    time symbol, read as an arbitrary instant no later than the bound one.
    """

    upper: Optional[RealExpr]
    history: Optional[Pred]


@dataclass(frozen=True)
class VC:
    vc_id: str
    rule: str
    hypotheses: tuple[Pred, ...]
    goal: Pred
    time: Optional[TimeBinder] = None

    def describe(self) -> str:
        hyps = " and ".join(pred_text(h) for h in self.hypotheses) or "true"
        time = ""
        if self.time is not None:
            dom = "[0, oo)" if self.time.upper is None else "[0, bound]"
            time = f" forall t in {dom}:"
        return f"{self.vc_id} [{self.rule}]{time} {hyps} |- {pred_text(self.goal)}"


@dataclass(frozen=True)
class CertRequest:
    """An obligation routed to the certification engine."""

    kind: str  # "flow" or "invariant"
    ode: Ode


@dataclass
class GenResult:
    vcs: list[VC]
    cert_requests: list[CertRequest]


@dataclass(frozen=True)
class _Item:
    """One pending obligation: hypotheses collected along the path and a
    goal, optionally under a time binder."""

    hyps: tuple[Pred, ...]
    goal: Pred
    time: Optional[TimeBinder]
    rule: str

    def with_hyp(self, p: Pred) -> "_Item":
        return replace(self, hyps=(p,) + self.hyps)

    def substituted(self, update: StateUpdate) -> "_Item":
        time = self.time
        if time is not None and time.history is not None:
            time = TimeBinder(time.upper, update.subst(time.history))
        return _Item(
            tuple(update.subst(h) for h in self.hyps),
            update.subst(self.goal),
            time,
            self.rule,
        )

    def as_pred(self) -> Pred:
        """Collapse a binder-free item back into one implication."""
        assert self.time is None
        return implies(pand(*self.hyps), self.goal)


class _Generator:
    def __init__(self, assumptions: Sequence[Pred]):
        self.assumptions = tuple(assumptions)
        self.emitted: list[tuple[str, tuple[Pred, ...], Pred, Optional[TimeBinder]]] = []
        self.cert_requests: list[CertRequest] = []

    def emit(self, rule: str, entry: Sequence[Pred], item: _Item) -> None:
        hyps = self.assumptions + tuple(entry) + item.hyps
        self.emitted.append((rule, hyps, item.goal, item.time))

    def finalize(self, rule: str, entry: Sequence[Pred], items: Sequence[_Item]) -> None:
        for item in items:
            self.emit(rule if item.rule == "" else item.rule, entry, item)

    # -- the backward pass --------------------------------------------------

    def backward(self, prog: HybridProgram, items: list[_Item]) -> list[_Item]:
        if isinstance(prog, Assign):
            return [it.substituted(prog.update) for it in items]
        if isinstance(prog, Test):
            return [it.with_hyp(prog.cond) for it in items]
        if isinstance(prog, Midpoint):
            self.finalize("assert", (prog.pred,), items)
            return [_Item((), prog.pred, None, "assert-entry")]
        if isinstance(prog, Seq):
            out = items
            for part in reversed(prog.parts):
                out = self.backward(part, out)
            return out
        if isinstance(prog, Choice):
            merged: list[_Item] = []
            for part in prog.parts:
                merged.extend(self.backward(part, list(items)))
            return merged
        if isinstance(prog, Star):
            if prog.inv is None:
                raise MissingAnnotationError(
                    "iteration without an invariant annotation; "
                    "write 'loop p inv I' or 'while P inv I do p'"
                )
            inv = prog.inv
            for item in items:
                self.emit("loop-exit" if item.rule == "" else item.rule, (inv,), item)
            body_items = self.backward(prog.body, [_Item((), inv, None, "")])
            self.finalize("loop-body", (inv,), body_items)
            return [_Item((), inv, None, "loop-entry")]
        if isinstance(prog, Ode):
            return self._backward_ode(prog, items)
        if isinstance(prog, Evol):
            return self._evolution(prog.flow, prog.guard, prog.dom, items, "evolve-flow")
        if isinstance(prog, Spec):
            raise MissingAnnotationError(
                "specification statements only appear in refinement goals"
            )
        raise MissingAnnotationError(f"cannot generate VCs for {prog!r}")

    def _backward_ode(self, ode: Ode, items: list[_Item]) -> list[_Item]:
        if ode.flow is not None and ode.dinv is not None:
            raise MissingAnnotationError(
                "an evolution carries either a flow or a dinv, not both"
            )
        if ode.flow is not None:
            self.cert_requests.append(CertRequest("flow", ode))
            return self._evolution(ode.flow, ode.guard, ode.dom, items, "evolve-sol")
        if ode.dinv is not None:
            self.cert_requests.append(CertRequest("invariant", ode))
            for item in items:
                self.emit(
                    "inv-exit" if item.rule == "" else item.rule,
                    (ode.dinv, ode.guard),
                    item,
                )
            return [_Item((), ode.dinv, None, "inv-entry")]
        raise MissingAnnotationError(
            "evolution command needs a 'flow {...}' or 'dinv P' annotation"
        )

    def _evolution(
        self,
        flow: FlowSpec,
        guard: Pred,
        dom: TimeDomain,
        items: list[_Item],
        rule: str,
    ) -> list[_Item]:
        at_tau = flow.at(TAU)
        history = simplify_pred(at_tau.subst(guard))
        binder = TimeBinder(dom.bound, history)
        out: list[_Item] = []
        for item in items:
            if item.time is not None:
                raise MissingAnnotationError(
                    "consecutive evolutions need an assert {...} between them"
                )
            out.append(
                _Item(
                    tuple(simplify_pred(at_tau.subst(h)) for h in item.hyps),
                    simplify_pred(at_tau.subst(item.goal)),
                    binder,
                    rule,
                )
            )
        return out


def generate(goal: HoareGoal) -> GenResult:
    """All proof obligations of a Hoare correctness goal, in program order."""
    gen = _Generator(goal.decls.assumptions)
    core = desugar(goal.program)
    items = gen.backward(core, [_Item((), goal.post, None, "")])
    for item in items:
        gen.emit("entry" if item.rule == "" else item.rule, (goal.pre,), item)
    ordered = list(reversed(gen.emitted))
    vcs = [
        VC(f"vc{i + 1}", rule, hyps, g, time)
        for i, (rule, hyps, g, time) in enumerate(ordered)
    ]
    return GenResult(vcs, gen.cert_requests)


def weakest_pre(
    prog: HybridProgram,
    post: Pred,
    assumptions: Sequence[Pred] = (),
) -> tuple[Pred, GenResult]:
    """Backward predicate transformer plus the VCs emitted along the way.

    The returned predicate conjoins the binder-free obligations; leading
    evolution commands contribute their quantified obligation to the VC
    list instead (a quantifier-free formula cannot carry it).
    """
    gen = _Generator(assumptions)
    items = gen.backward(desugar(prog), [_Item((), post, None, "")])
    plain = [it for it in items if it.time is None]
    timed = [it for it in items if it.time is not None]
    for item in timed:
        gen.emit("evolve-head", (), item)
    pre = pand(*(it.as_pred() for it in plain))
    ordered = list(reversed(gen.emitted))
    vcs = [
        VC(f"vc{i + 1}", rule, hyps, g, time)
        for i, (rule, hyps, g, time) in enumerate(ordered)
    ]
    return pre, GenResult(vcs, gen.cert_requests)


def evolution_vc(
    pre: Pred,
    flow: FlowSpec,
    guard: Pred,
    dom: TimeDomain,
    post: Pred,
    assumptions: Sequence[Pred] = (),
    rule: str = "evolve-sol",
) -> VC:
    """The flow-based evolution obligation with an explicit entry predicate;
    shared with the refinement engine."""
    at_tau = flow.at(TAU)
    history = simplify_pred(at_tau.subst(guard))
    return VC(
        "vc1",
        rule,
        tuple(assumptions) + (pre,),
        simplify_pred(at_tau.subst(post)),
        TimeBinder(dom.bound, history),
    )
