"""Hoare-logic and refinement-calculus verification for hybrid programs.

Submodules: kat (finite-state algebra oracle), store (lenses and state
updates), expr (symbolic expressions and predicates), syntax (program AST
and printer), parsing (problem files and refinement scripts), dynamics
(simulator), certify (flow and invariant certificates), vcgen
(verification conditions), refine (refinement law replay), discharge
(arithmetic prover and falsifier), cli (command-line driver).
"""

from . import certify, discharge, dynamics, expr, kat, parsing, refine, store, syntax, vcgen

__all__ = [
    "certify",
    "discharge",
    "dynamics",
    "expr",
    "kat",
    "parsing",
    "refine",
    "store",
    "syntax",
    "vcgen",
]
