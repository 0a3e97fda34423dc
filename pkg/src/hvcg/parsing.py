"""Concrete syntax for verification problem files and refinement scripts.

A problem file declares variables and parameters and then states one goal:

    var x, v : real
    param g : real assume g < 0
    hoare { P } program { Q }

or a refinement goal ``refine [P, Q] to program by "script.ref"``.  The
reserved word ``tau`` is the time symbol inside flow bodies; ``inf`` marks
an unbounded time domain.  Comments run from ``//`` to end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import syntax
from .expr import (
    Cmp,
    EQ, NE, LT, LE, GT, GE,
    FALSE,
    Lit,
    Param,
    Pred,
    RealExpr,
    TAU,
    TRUE,
    Var,
    free_vars,
    pand,
    pnot,
    por,
    uses_time,
)
from .store import StateUpdate
from .syntax import (
    Assign,
    Evol,
    FlowSpec,
    HybridProgram,
    If,
    Loop,
    Midpoint,
    Ode,
    SKIP,
    Spec,
    Star,
    TimeDomain,
    VectorField,
    While,
    choice,
    seq,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


KEYWORDS = {
    "var", "param", "real", "assume", "bounds", "in", "hoare", "refine",
    "to", "by",
    "if", "then", "else", "while", "inv", "do", "loop", "skip",
    "evol", "on", "dinv", "flow", "assert",
    "and", "or", "not", "true", "false",
    "tau", "inf", "exp", "ln",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>:=|\+\+|<=|>=|!=|[-+*/^;,(){}\[\]?=<>.'&:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | keyword | string | op | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and lexeme in KEYWORDS:
                tokens.append(Token("keyword", lexeme, line, col))
            else:
                tokens.append(Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


@dataclass
class Declarations:
    variables: tuple[str, ...] = ()
    parameters: tuple[str, ...] = ()
    assumptions: tuple[Pred, ...] = ()
    # default box per variable: (name, lower or None, upper or None)
    bounds: tuple[tuple[str, Optional[Fraction], Optional[Fraction]], ...] = ()


@dataclass
class HoareGoal:
    decls: Declarations
    pre: Pred
    program: HybridProgram
    post: Pred


@dataclass
class RefineGoal:
    decls: Declarations
    spec: Spec
    target: HybridProgram
    script_path: Optional[str] = None


@dataclass(frozen=True)
class RefinementStep:
    law: str
    path: tuple[int, ...]
    witnesses: dict


@dataclass(frozen=True)
class RefinementScript:
    steps: tuple[RefinementStep, ...]


class Parser:
    def __init__(self, tokens: list[Token], decls: Declarations | None = None):
        self.tokens = tokens
        self.pos = 0
        self.decls = decls or Declarations()
        self.allow_tau = False

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def accept(self, kind: str, text: str | None = None) -> Optional[Token]:
        if self.at(kind, text):
            return self.next()
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {tok.text or tok.kind!r}",
                             tok.line, tok.col)
        return self.next()

    def fail(self, message: str):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)

    # -- declarations -------------------------------------------------------

    def parse_declarations(self):
        variables: list[str] = []
        parameters: list[str] = []
        assumptions: list[Pred] = []
        bounds: list[tuple] = []
        while (
            self.at("keyword", "var")
            or self.at("keyword", "param")
            or self.at("keyword", "bounds")
        ):
            if self.accept("keyword", "bounds"):
                bounds.append(self._parse_bounds_decl())
                self.decls = Declarations(
                    tuple(variables), tuple(parameters), tuple(assumptions),
                    tuple(bounds),
                )
                continue
            is_var = self.next().text == "var"
            names = [self._decl_name(variables, parameters)]
            while self.accept("op", ","):
                names.append(self._decl_name(variables, parameters))
            self.expect("op", ":")
            self.expect("keyword", "real")
            if is_var:
                variables.extend(names)
            else:
                parameters.extend(names)
                self.decls = Declarations(
                    tuple(variables), tuple(parameters), tuple(assumptions),
                    tuple(bounds),
                )
                if self.accept("keyword", "assume"):
                    p = self.parse_pred()
                    if free_vars(p):
                        self.fail("parameter assumptions may not mention variables")
                    assumptions.append(p)
            self.decls = Declarations(
                tuple(variables), tuple(parameters), tuple(assumptions),
                tuple(bounds),
            )
        return self.decls

    def _parse_bounds_decl(self) -> tuple:
        name = self._var_name()
        self.expect("keyword", "in")
        self.expect("op", "[")
        lo = self._bound_endpoint()
        self.expect("op", ",")
        hi = self._bound_endpoint()
        self.expect("op", "]")
        return (name, lo, hi)

    def _bound_endpoint(self) -> Optional[Fraction]:
        negative = bool(self.accept("op", "-"))
        if self.accept("keyword", "inf"):
            return None
        tok = self.expect("number")
        value = Fraction(tok.text)
        return -value if negative else value

    def _decl_name(self, variables, parameters) -> str:
        tok = self.peek()
        if tok.kind == "keyword":
            self.fail(f"{tok.text!r} is reserved and cannot be declared")
        name = self.expect("ident").text
        if name in variables or name in parameters:
            raise ParseError(f"duplicate declaration of {name!r}", tok.line, tok.col)
        return name

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> RealExpr:
        e = self.parse_mul()
        while True:
            if self.accept("op", "+"):
                e = e + self.parse_mul()
            elif self.accept("op", "-"):
                e = e - self.parse_mul()
            else:
                return e

    def parse_mul(self) -> RealExpr:
        e = self.parse_unary()
        while True:
            if self.accept("op", "*"):
                e = e * self.parse_unary()
            elif self.accept("op", "/"):
                e = e / self.parse_unary()
            else:
                return e

    def parse_unary(self) -> RealExpr:
        if self.accept("op", "-"):
            inner = self.parse_unary()
            if isinstance(inner, Lit):
                return Lit(-inner.value)
            return -inner
        return self.parse_pow()

    def parse_pow(self) -> RealExpr:
        base = self.parse_atom_expr()
        if self.accept("op", "^"):
            tok = self.expect("number")
            if "." in tok.text:
                raise ParseError("power exponents must be natural numbers",
                                 tok.line, tok.col)
            return base ** int(tok.text)
        return base

    def parse_atom_expr(self) -> RealExpr:
        tok = self.peek()
        if self.accept("op", "("):
            e = self.parse_expr()
            self.expect("op", ")")
            return e
        if tok.kind == "number":
            self.next()
            return Lit(Fraction(tok.text))
        if self.accept("keyword", "tau"):
            if not self.allow_tau:
                raise ParseError("the time symbol is only allowed in flow bodies",
                                 tok.line, tok.col)
            return TAU
        if self.accept("keyword", "exp"):
            self.expect("op", "(")
            e = self.parse_expr()
            self.expect("op", ")")
            from .expr import Exp
            return Exp(e)
        if self.accept("keyword", "ln"):
            self.expect("op", "(")
            e = self.parse_expr()
            self.expect("op", ")")
            from .expr import Ln
            return Ln(e)
        if tok.kind == "ident":
            self.next()
            if tok.text in self.decls.variables:
                return Var(tok.text)
            if tok.text in self.decls.parameters:
                return Param(tok.text)
            raise ParseError(f"undeclared name {tok.text!r}", tok.line, tok.col)
        self.fail("expected an expression")

    # -- predicates ---------------------------------------------------------

    _RELOPS = {"=": EQ, "!=": NE, "<": LT, "<=": LE, ">": GT, ">=": GE}

    def parse_pred(self) -> Pred:
        p = self.parse_and_pred()
        while self.accept("keyword", "or"):
            p = por(p, self.parse_and_pred())
        return p

    def parse_and_pred(self) -> Pred:
        p = self.parse_not_pred()
        while self.accept("keyword", "and"):
            p = pand(p, self.parse_not_pred())
        return p

    def parse_not_pred(self) -> Pred:
        if self.accept("keyword", "not"):
            return pnot(self.parse_not_pred())
        return self.parse_atom_pred()

    def parse_atom_pred(self) -> Pred:
        if self.accept("keyword", "true"):
            return TRUE
        if self.accept("keyword", "false"):
            return FALSE
        # try a comparison first, fall back to a parenthesised predicate
        mark = self.pos
        try:
            lhs = self.parse_expr()
            tok = self.peek()
            if tok.kind == "op" and tok.text in self._RELOPS:
                self.next()
                rhs = self.parse_expr()
                return Cmp(self._RELOPS[tok.text], lhs, rhs)
            raise ParseError("expected a relation", tok.line, tok.col)
        except ParseError:
            self.pos = mark
        if self.accept("op", "("):
            p = self.parse_pred()
            self.expect("op", ")")
            return p
        self.fail("expected a predicate")

    # -- time domains and evolutions ----------------------------------------

    def parse_time_domain(self) -> TimeDomain:
        if not self.accept("keyword", "on"):
            return TimeDomain(None)
        self.expect("op", "[")
        zero = self.expect("number")
        if Fraction(zero.text) != 0:
            raise ParseError("time domains must start at 0", zero.line, zero.col)
        self.expect("op", ",")
        if self.accept("keyword", "inf"):
            self.expect("op", ")")
            return TimeDomain(None)
        bound = self.parse_expr()
        if free_vars(bound) or uses_time(bound):
            self.fail("time bounds must be parameters or rationals")
        self.expect("op", "]")
        return TimeDomain(bound)

    def parse_flow_comps(self) -> FlowSpec:
        self.expect("op", "{")
        comps = []
        old = self.allow_tau
        self.allow_tau = True
        while True:
            name = self._var_name()
            self.expect("op", ":=")
            comps.append((name, self.parse_expr()))
            if not self.accept("op", ","):
                break
        self.allow_tau = old
        self.expect("op", "}")
        return FlowSpec(tuple(comps))

    def _var_name(self) -> str:
        tok = self.expect("ident")
        if tok.text not in self.decls.variables:
            raise ParseError(f"undeclared variable {tok.text!r}", tok.line, tok.col)
        return tok.text

    # -- programs -----------------------------------------------------------

    def parse_program(self) -> HybridProgram:
        parts = [self.parse_seq_program()]
        while self.accept("op", "++"):
            parts.append(self.parse_seq_program())
        return choice(*parts)

    def parse_seq_program(self) -> HybridProgram:
        parts = [self.parse_postfix_program()]
        while self.accept("op", ";"):
            parts.append(self.parse_postfix_program())
        return seq(*parts)

    def parse_postfix_program(self) -> HybridProgram:
        prog = self.parse_primary_program()
        while self.accept("op", "*"):
            prog = Star(prog)
        return prog

    def parse_primary_program(self) -> HybridProgram:
        tok = self.peek()
        if self.accept("keyword", "skip"):
            return SKIP
        if self.accept("op", "("):
            prog = self.parse_program()
            self.expect("op", ")")
            return prog
        if self.accept("op", "?"):
            return syntax.Test(self.parse_pred())
        if self.accept("keyword", "assert"):
            self.expect("op", "{")
            p = self.parse_pred()
            self.expect("op", "}")
            return Midpoint(p)
        if self.accept("keyword", "if"):
            cond = self.parse_pred()
            self.expect("keyword", "then")
            then = self.parse_postfix_program()
            self.expect("keyword", "else")
            orelse = self.parse_postfix_program()
            return If(cond, then, orelse)
        if self.accept("keyword", "while"):
            cond = self.parse_pred()
            inv = None
            if self.accept("keyword", "inv"):
                inv = self.parse_pred()
            self.expect("keyword", "do")
            body = self.parse_postfix_program()
            return While(cond, body, inv)
        if self.accept("keyword", "loop"):
            body = self.parse_postfix_program()
            self.expect("keyword", "inv")
            inv = self.parse_pred()
            return Loop(body, inv)
        if self.accept("keyword", "evol"):
            flow = self.parse_flow_comps()
            self.expect("op", "&")
            guard = self.parse_pred()
            dom = self.parse_time_domain()
            return Evol(flow, guard, dom)
        if self.at("op", "{"):
            if self._looks_like_ode():
                return self.parse_ode()
            self.fail("expected a program")
        if self.at("op", "["):
            self.next()
            pre = self.parse_pred()
            self.expect("op", ",")
            post = self.parse_pred()
            self.expect("op", "]")
            return Spec(pre, post)
        if tok.kind == "ident":
            return self.parse_assignment()
        self.fail("expected a program")

    def _looks_like_ode(self) -> bool:
        return (
            self.peek().text == "{"
            and self.peek(1).kind == "ident"
            and self.peek(2).text == "'"
        )

    def parse_ode(self) -> Ode:
        self.expect("op", "{")
        derivs = []
        while True:
            name = self._var_name()
            self.expect("op", "'")
            self.expect("op", "=")
            derivs.append((name, self.parse_expr()))
            if not self.accept("op", ","):
                break
        self.expect("op", "&")
        guard = self.parse_pred()
        dom = self.parse_time_domain()
        self.expect("op", "}")
        dinv = None
        flow = None
        if self.accept("keyword", "dinv"):
            dinv = self.parse_pred()
        if self.accept("keyword", "flow"):
            flow = self.parse_flow_comps()
        return Ode(VectorField(tuple(derivs)), guard, dom, dinv, flow)

    def parse_assignment(self) -> Assign:
        names = [self._var_name()]
        while self.accept("op", ","):
            names.append(self._var_name())
        self.expect("op", ":=")
        exprs = [self.parse_expr()]
        while self.accept("op", ","):
            exprs.append(self.parse_expr())
        if len(names) != len(exprs):
            self.fail("assignment arity mismatch")
        pairs = tuple(zip(names, exprs))
        if len(pairs) == 1:
            return Assign(StateUpdate.seq(pairs))
        return Assign(StateUpdate.sim(pairs))

    # -- goals ---------------------------------------------------------------

    def parse_goal(self):
        if self.accept("keyword", "hoare"):
            self.expect("op", "{")
            pre = self.parse_pred()
            self.expect("op", "}")
            program = self.parse_program()
            self.expect("op", "{")
            post = self.parse_pred()
            self.expect("op", "}")
            return HoareGoal(self.decls, pre, program, post)
        if self.accept("keyword", "refine"):
            self.expect("op", "[")
            pre = self.parse_pred()
            self.expect("op", ",")
            post = self.parse_pred()
            self.expect("op", "]")
            self.expect("keyword", "to")
            target = self.parse_program()
            script = None
            if self.accept("keyword", "by"):
                script = self._parse_path_like()
            return RefineGoal(self.decls, Spec(pre, post), target, script)
        self.fail("expected 'hoare' or 'refine'")

    def _parse_path_like(self) -> str:
        tok = self.peek()
        if tok.kind == "string":
            self.next()
            return tok.text[1:-1]
        pieces = []
        while self.peek().kind in ("ident", "number", "keyword") or self.at("op", ".") or self.at("op", "/") or self.at("op", "-"):
            pieces.append(self.next().text)
        if not pieces:
            self.fail("expected a script path")
        return "".join(pieces)


# ---------------------------------------------------------------------------
# entry points


def parse_problem(text: str):
    parser = Parser(tokenize(text))
    parser.parse_declarations()
    goal = parser.parse_goal()
    parser.expect("eof")
    return goal


def parse_program(text: str, decls: Declarations) -> HybridProgram:
    parser = Parser(tokenize(text), decls)
    prog = parser.parse_program()
    parser.expect("eof")
    return prog


def parse_pred(text: str, decls: Declarations) -> Pred:
    parser = Parser(tokenize(text), decls)
    p = parser.parse_pred()
    parser.expect("eof")
    return p


_STEP_RE = re.compile(r"^\s*step\s+(?P<law>[\w-]+)\s+at\s+(?P<path>[.\d]+)"
                      r"(?:\s+with\s+(?P<rest>.*))?\s*$")

_WITNESS_KEYWORDS = ("prog", "mid", "test", "inv", "pre", "post")


def parse_script(text: str, decls: Declarations) -> RefinementScript:
    """Line-oriented refinement scripts: ``step <law> at <path> [with ...]``.

    Witness clauses are introduced by ``prog`` (a program fragment),
    ``mid``, ``test``, ``inv``, ``pre`` or ``post`` (predicates).
    """
    steps: list[RefinementStep] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        m = _STEP_RE.match(line)
        if m is None:
            raise ParseError("expected 'step <law> at <path> [with ...]'", lineno, 1)
        law = m.group("law")
        path = _parse_step_path(m.group("path"), lineno)
        witnesses: dict = {}
        rest = m.group("rest")
        if rest:
            parser = Parser(tokenize(rest), decls)
            while not parser.at("eof"):
                tok = parser.peek()
                word = tok.text
                if word not in _WITNESS_KEYWORDS:
                    raise ParseError(f"unknown witness clause {word!r}",
                                     lineno, tok.col)
                parser.next()
                if word == "prog":
                    witnesses["prog"] = parser.parse_program()
                else:
                    witnesses[word] = parser.parse_pred()
        steps.append(RefinementStep(law, path, witnesses))
    return RefinementScript(tuple(steps))


def _parse_step_path(text: str, lineno: int) -> tuple[int, ...]:
    if text == ".":
        return ()
    try:
        return tuple(int(piece) for piece in text.split("."))
    except ValueError:
        raise ParseError(f"bad path {text!r}", lineno, 1) from None
