"""Lens-based program stores and state updates.

The shipped store is a total map from declared variable names to reals.
Each variable induces a get/put lens; two lenses are independent exactly
when they name different variables.  State updates keep their right-hand
sides symbolic so that substitution and verification-condition generation
stay at the expression level.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

from .expr import (
    Number,
    Pred,
    RealExpr,
    UnboundNameError,
    eval_expr,
    subst,
    subst_pred,
)


@dataclass(frozen=True)
class Store:
    """Immutable total map from declared variables to real values."""

    items: tuple[tuple[str, Number], ...]

    @staticmethod
    def of(mapping: Mapping[str, Number] | Iterable[tuple[str, Number]]) -> "Store":
        if isinstance(mapping, Mapping):
            return Store(tuple(mapping.items()))
        return Store(tuple(mapping))

    def get(self, name: str) -> Number:
        for k, v in self.items:
            if k == name:
                return v
        raise UnboundNameError(f"variable {name!r} not declared in this store")

    def put(self, name: str, value: Number) -> "Store":
        if all(k != name for k, _ in self.items):
            raise UnboundNameError(f"variable {name!r} not declared in this store")
        return Store(tuple((k, value if k == name else v) for k, v in self.items))

    def names(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.items)

    def as_dict(self) -> dict[str, Number]:
        return dict(self.items)

    def __contains__(self, name: str) -> bool:
        return any(k == name for k, _ in self.items)


@dataclass(frozen=True)
class Lens:
    """The get/put accessor pair determined by a variable name."""

    name: str

    def get(self, s: Store) -> Number:
        return s.get(self.name)

    def put(self, s: Store, value: Number) -> Store:
        return s.put(self.name, value)


def independent(x: Lens, y: Lens) -> bool:
    return x.name != y.name


@dataclass(frozen=True)
class StateUpdate:
    """An ordered list of variable/expression pairs.

    Two application modes exist.  In the sequential mode each right-hand
    side is evaluated in the store produced by the updates before it, which
    is what assignment chains ``x := e ; x := f`` denote.  In the
    simultaneous mode every right-hand side is evaluated in the entry
    store; later writes to the same variable supersede earlier ones.  Both
    modes satisfy eval(subst(u, e), s) == eval(e, apply(u, s)).
    """

    assignments: tuple[tuple[str, RealExpr], ...]
    simultaneous: bool = False

    @staticmethod
    def seq(pairs: Iterable[tuple[str, RealExpr]]) -> "StateUpdate":
        return StateUpdate(tuple(pairs), simultaneous=False)

    @staticmethod
    def sim(pairs: Iterable[tuple[str, RealExpr]]) -> "StateUpdate":
        return StateUpdate(tuple(pairs), simultaneous=True)

    def is_identity(self) -> bool:
        return not self.assignments

    def targets(self) -> tuple[str, ...]:
        return tuple(x for x, _ in self.assignments)

    def then(self, name: str, e: RealExpr) -> "StateUpdate":
        if self.simultaneous:
            raise ValueError("cannot extend a simultaneous update sequentially")
        return StateUpdate(self.assignments + ((name, e),), simultaneous=False)

    def apply(
        self,
        s: Store,
        parameters: Mapping[str, Number] | None = None,
        tau: Number | None = None,
    ) -> Store:
        if self.simultaneous:
            values = [
                (x, eval_expr(e, s.as_dict(), parameters, tau))
                for x, e in self.assignments
            ]
            out = s
            for x, v in values:
                out = out.put(x, v)
            return out
        out = s
        for x, e in self.assignments:
            out = out.put(x, eval_expr(e, out.as_dict(), parameters, tau))
        return out

    def subst(self, target: Union[RealExpr, Pred]) -> Union[RealExpr, Pred]:
        """The substitution operator: composing a term with this update."""
        if self.simultaneous:
            mapping: dict[str, RealExpr] = {}
            for x, e in self.assignments:
                mapping[x] = e  # later writes win
            return _subst_any(target, mapping)
        out = target
        for x, e in reversed(self.assignments):
            out = _subst_any(out, {x: e})
        return out


def _subst_any(target, mapping):
    if isinstance(target, Pred):
        return subst_pred(target, mapping)
    return subst(target, mapping)


def substitute(e: Union[RealExpr, Pred], name: str, replacement: RealExpr):
    """Single-variable substitution e[replacement/name]."""
    return StateUpdate.seq(((name, replacement),)).subst(e)


def assign_transformer(
    update: StateUpdate,
    parameters: Mapping[str, Number] | None = None,
):
    """The deterministic state transformer of an update: a singleton image."""

    def run(s: Store) -> frozenset[Store]:
        return frozenset({update.apply(s, parameters)})

    return run
