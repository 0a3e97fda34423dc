"""Stepwise refinement: a catalog of laws that rewrite specification
statements into program text, and a script replayer.

Each law rewrites the specification statement addressed by a path into a
construct plus smaller specification statements, emitting arithmetic side
conditions as ordinary VCs.  Entry-side consequences are fused into the
assignment and evolution laws (the emitted implication is the side
condition); structural laws whose shape does not match fail loudly and an
explicit consequence step must be inserted instead, never a silent
weakening.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .expr import (
    Pred,
    nnf,
    pand,
    pnot,
    pred_text,
    simplify_pred,
)
from .parsing import RefineGoal, RefinementScript, RefinementStep
from .syntax import (
    Assign,
    Choice,
    Evol,
    HybridProgram,
    If,
    Loop,
    Ode,
    SKIP,
    Seq,
    Spec,
    Star,
    While,
    program_text,
    seq,
)
from .vcgen import VC, CertRequest, evolution_vc

LAWS = (
    "r-skip", "r-cons", "r-seq", "r-cond", "r-while", "r-inv", "r-loop",
    "r-assgn", "r-assgnl", "r-assgnf",
    "r-evl", "r-evll", "r-evlr", "r-evlf", "r-evlfl", "r-evlfr",
)


class RefinementError(ValueError):
    pass


class LawShapeMismatch(RefinementError):
    pass


@dataclass
class StepResult:
    term: HybridProgram
    vcs: list[VC]
    cert_requests: list[CertRequest]


@dataclass
class StepReport:
    law: str
    path: tuple[int, ...]
    vcs: list[VC]


@dataclass
class ReplayResult:
    final: HybridProgram
    steps: list[StepReport]
    vcs: list[VC]
    cert_requests: list[CertRequest]


def _norm(p: Pred) -> Pred:
    return nnf(simplify_pred(p))


def _same_pred(a: Pred, b: Pred) -> bool:
    return _norm(a) == _norm(b)


# -- path navigation ---------------------------------------------------------


def _children(term: HybridProgram) -> tuple[HybridProgram, ...]:
    if isinstance(term, (Seq, Choice)):
        return term.parts
    if isinstance(term, Star):
        return (term.body,)
    if isinstance(term, (Loop, While)):
        return (term.body,)
    if isinstance(term, If):
        return (term.then, term.orelse)
    return ()


def _rebuild(term: HybridProgram, index: int, child: HybridProgram) -> HybridProgram:
    if isinstance(term, Seq):
        parts = list(term.parts)
        parts[index] = child
        return seq(*parts)
    if isinstance(term, Choice):
        parts = list(term.parts)
        parts[index] = child
        return Choice(tuple(parts))
    if isinstance(term, Star):
        return Star(child, term.inv)
    if isinstance(term, Loop):
        return Loop(child, term.inv)
    if isinstance(term, While):
        return While(term.cond, child, term.inv)
    if isinstance(term, If):
        if index == 0:
            return If(term.cond, child, term.orelse)
        return If(term.cond, term.then, child)
    raise RefinementError(f"node {type(term).__name__} has no children")


def _at_path(term: HybridProgram, path: tuple[int, ...]) -> HybridProgram:
    node = term
    for i in path:
        kids = _children(node)
        if i >= len(kids):
            raise RefinementError(
                f"path component {i} out of range in {type(node).__name__}"
            )
        node = kids[i]
    return node


def _replace_at(
    term: HybridProgram, path: tuple[int, ...], new: HybridProgram
) -> HybridProgram:
    if not path:
        return new
    i = path[0]
    kids = _children(term)
    if i >= len(kids):
        raise RefinementError(f"path component {i} out of range")
    return _rebuild(term, i, _replace_at(kids[i], path[1:], new))


# -- the law catalogue --------------------------------------------------------


def apply_step(
    term: HybridProgram,
    step: RefinementStep,
    assumptions: Sequence[Pred] = (),
    vc_prefix: str = "s",
) -> StepResult:
    """Apply one refinement law at a path; the addressed node must be a
    specification statement."""
    if step.law not in LAWS:
        raise RefinementError(f"unknown law {step.law!r}")
    target = _at_path(term, step.path)
    if not isinstance(target, Spec):
        raise LawShapeMismatch(
            f"{step.law} at {_path_text(step.path)}: target is "
            f"{type(target).__name__}, not a specification statement"
        )
    new, goals, certs = _apply_law(step, target)
    vcs = [
        VC(f"{vc_prefix}-vc{i + 1}", rule, tuple(assumptions) + hyps, goal, time)
        for i, (rule, hyps, goal, time) in enumerate(goals)
    ]
    return StepResult(_replace_at(term, step.path, new), vcs, certs)


def _need(step: RefinementStep, key: str):
    if key not in step.witnesses:
        raise LawShapeMismatch(f"{step.law} needs a '{key}' witness")
    return step.witnesses[key]


def _need_assign(step: RefinementStep) -> Assign:
    prog = _need(step, "prog")
    if not isinstance(prog, Assign):
        raise LawShapeMismatch(f"{step.law} witness must be an assignment")
    return prog


def _need_evolution(step: RefinementStep, want_flow: bool):
    prog = _need(step, "prog")
    if isinstance(prog, Evol):
        return prog
    if isinstance(prog, Ode):
        if want_flow and prog.flow is None and prog.dinv is None:
            raise LawShapeMismatch(
                f"{step.law} witness evolution needs a flow or dinv annotation"
            )
        return prog
    raise LawShapeMismatch(f"{step.law} witness must be an evolution command")


def _apply_law(step: RefinementStep, spec: Spec):
    law, pre, post = step.law, spec.pre, spec.post
    goals: list[tuple] = []
    certs: list[CertRequest] = []

    def side(rule: str, hyp: Pred, goal: Pred):
        goals.append((rule, (hyp,), goal, None))

    if law == "r-skip":
        if not _same_pred(pre, post):
            raise LawShapeMismatch(
                "r-skip needs [P, P]; insert r-cons first "
                f"(pre {pred_text(pre)!r} vs post {pred_text(post)!r})"
            )
        return SKIP, goals, certs

    if law == "r-cons":
        new_pre = _need(step, "pre")
        new_post = _need(step, "post")
        side("consequence-pre", pre, new_pre)
        side("consequence-post", new_post, post)
        return Spec(new_pre, new_post), goals, certs

    if law == "r-seq":
        mid = _need(step, "mid")
        return seq(Spec(pre, mid), Spec(mid, post)), goals, certs

    if law == "r-cond":
        test = _need(step, "test")
        return (
            If(test, Spec(pand(test, pre), post), Spec(pand(pnot(test), pre), post)),
            goals,
            certs,
        )

    if law == "r-while":
        test = _need(step, "test")
        if not _same_pred(post, pand(pnot(test), pre)):
            raise LawShapeMismatch(
                "r-while needs post = (not test and pre); got "
                f"{pred_text(post)!r}"
            )
        return While(test, Spec(pand(test, pre), pre), pre), goals, certs

    if law == "r-inv":
        inv = _need(step, "inv")
        side("invariant-entry", pre, inv)
        side("invariant-exit", inv, post)
        return Spec(inv, inv), goals, certs

    if law == "r-loop":
        if not _same_pred(pre, post):
            raise LawShapeMismatch("r-loop needs [I, I]; insert r-cons first")
        return Loop(Spec(pre, post), pre), goals, certs

    if law == "r-assgn":
        assign = _need_assign(step)
        side("assign", pre, assign.update.subst(post))
        return assign, goals, certs

    if law == "r-assgnl":
        assign = _need_assign(step)
        mid = _need(step, "mid")
        side("assign-leading", pre, assign.update.subst(mid))
        return seq(assign, Spec(mid, post)), goals, certs

    if law == "r-assgnf":
        assign = _need_assign(step)
        return seq(Spec(pre, assign.update.subst(post)), assign), goals, certs

    if law in ("r-evl", "r-evlf"):
        prog = _need_evolution(step, want_flow=(law == "r-evl"))
        goals.extend(_evolution_goals(prog, pre, post, certs))
        return prog, goals, certs

    if law in ("r-evll", "r-evlfl"):
        prog = _need_evolution(step, want_flow=(law == "r-evll"))
        mid = _need(step, "mid")
        goals.extend(_evolution_goals(prog, pre, mid, certs))
        return seq(prog, Spec(mid, post)), goals, certs

    if law in ("r-evlr", "r-evlfr"):
        prog = _need_evolution(step, want_flow=(law == "r-evlr"))
        mid = _need(step, "mid")
        goals.extend(_evolution_goals(prog, mid, post, certs))
        return seq(Spec(pre, mid), prog), goals, certs

    raise RefinementError(f"unhandled law {law!r}")


def _evolution_goals(prog, pre: Pred, post: Pred, certs: list[CertRequest]):
    """Side conditions for introducing an evolution command against
    [pre, post]; flows give the quantified evolution obligation, invariant
    annotations give the entry and exit implications."""
    if isinstance(prog, Evol):
        vc = evolution_vc(pre, prog.flow, prog.guard, prog.dom, post, rule="evolve-flow")
        return [(vc.rule, vc.hypotheses, vc.goal, vc.time)]
    assert isinstance(prog, Ode)
    if prog.flow is not None:
        certs.append(CertRequest("flow", prog))
        vc = evolution_vc(pre, prog.flow, prog.guard, prog.dom, post, rule="evolve-sol")
        return [(vc.rule, vc.hypotheses, vc.goal, vc.time)]
    if prog.dinv is not None:
        certs.append(CertRequest("invariant", prog))
        return [
            ("inv-entry", (pre,), prog.dinv, None),
            ("inv-exit", (prog.dinv, prog.guard), post, None),
        ]
    raise LawShapeMismatch("evolution witness carries neither flow nor dinv")


# -- replay --------------------------------------------------------------------


def _has_spec(term: HybridProgram) -> bool:
    if isinstance(term, Spec):
        return True
    return any(_has_spec(c) for c in _children(term))


def replay(
    script: RefinementScript,
    goal: RefineGoal,
) -> ReplayResult:
    """Apply the script's steps left to right; the final term must be free
    of specification statements and syntactically equal to the target."""
    term: HybridProgram = goal.spec
    reports: list[StepReport] = []
    vcs: list[VC] = []
    certs: list[CertRequest] = []
    for i, step in enumerate(script.steps, start=1):
        result = apply_step(
            term, step, goal.decls.assumptions, vc_prefix=f"s{i}"
        )
        term = result.term
        reports.append(StepReport(step.law, step.path, result.vcs))
        vcs.extend(result.vcs)
        certs.extend(result.cert_requests)
    if _has_spec(term):
        raise RefinementError(
            f"residual specification statement after replay: {program_text(term)}"
        )
    if term != goal.target:
        raise RefinementError(
            "replayed program differs from the target\n"
            f"  replayed: {program_text(term)}\n"
            f"  target:   {program_text(goal.target)}"
        )
    return ReplayResult(term, reports, vcs, certs)


def _path_text(path: tuple[int, ...]) -> str:
    return ".".join(str(i) for i in path) if path else "."
