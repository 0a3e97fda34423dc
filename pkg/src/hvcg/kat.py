"""Exact finite-state model of the state-transformer Kleene algebra with
tests, extended with specification statements.

States are the integers 0..n-1 of a small finite space.  A transformer maps
each state to a set of successor states; tests are the transformers below
the unit.  Everything here is computed exactly, so the model serves as the
oracle that certifies every algebraic law the symbolic engines rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable


class SpaceMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class FinSpace:
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("state space needs at least one state")

    def states(self) -> range:
        return range(self.size)


@dataclass(frozen=True)
class FinTransformer:
    """A map from each state to the set of its successors."""

    space: FinSpace
    image: tuple[frozenset[int], ...]

    def __post_init__(self):
        if len(self.image) != self.space.size:
            raise ValueError("image must list every state")
        for succ in self.image:
            if not succ <= frozenset(self.space.states()):
                raise ValueError("successor outside the state space")

    @staticmethod
    def of(space: FinSpace, mapping: Callable[[int], Iterable[int]]) -> "FinTransformer":
        return FinTransformer(
            space, tuple(frozenset(mapping(s)) for s in space.states())
        )

    def __call__(self, state: int) -> frozenset[int]:
        return self.image[state]

    def leq(self, other: "FinTransformer") -> bool:
        """Pointwise inclusion: the algebra ordering."""
        _same_space(self, other)
        return all(a <= b for a, b in zip(self.image, other.image))


@dataclass(frozen=True)
class FinTest:
    """A subset of the space, embedded as a subidentity transformer."""

    space: FinSpace
    member: tuple[bool, ...]

    def __post_init__(self):
        if len(self.member) != self.space.size:
            raise ValueError("membership must cover every state")

    @staticmethod
    def of(space: FinSpace, subset: Iterable[int]) -> "FinTest":
        chosen = set(subset)
        return FinTest(space, tuple(s in chosen for s in space.states()))

    def __call__(self, state: int) -> bool:
        return self.member[state]

    def as_transformer(self) -> FinTransformer:
        return FinTransformer(
            self.space,
            tuple(
                frozenset({s}) if self.member[s] else frozenset()
                for s in self.space.states()
            ),
        )

    def complement(self) -> "FinTest":
        return FinTest(self.space, tuple(not m for m in self.member))

    def meet(self, other: "FinTest") -> "FinTest":
        _same_space(self, other)
        return FinTest(self.space, tuple(a and b for a, b in zip(self.member, other.member)))

    def join(self, other: "FinTest") -> "FinTest":
        _same_space(self, other)
        return FinTest(self.space, tuple(a or b for a, b in zip(self.member, other.member)))


def _same_space(a, b):
    if a.space != b.space:
        raise SpaceMismatchError("operands live over different state spaces")


def eta(space: FinSpace) -> FinTransformer:
    """The unit: each state maps to itself."""
    return FinTransformer.of(space, lambda s: {s})


def zero(space: FinSpace) -> FinTransformer:
    return FinTransformer.of(space, lambda s: set())


def top(space: FinSpace) -> FinTransformer:
    full = frozenset(space.states())
    return FinTransformer(space, tuple(full for _ in space.states()))


def full_test(space: FinSpace) -> FinTest:
    return FinTest(space, tuple(True for _ in space.states()))


def empty_test(space: FinSpace) -> FinTest:
    return FinTest(space, tuple(False for _ in space.states()))


def kleisli_compose(f: FinTransformer, g: FinTransformer) -> FinTransformer:
    """Sequential composition: the union of g over every f-successor."""
    _same_space(f, g)
    return FinTransformer(
        f.space,
        tuple(
            frozenset().union(*(g.image[y] for y in f.image[x])) if f.image[x] else frozenset()
            for x in f.space.states()
        ),
    )


def choice(f: FinTransformer, g: FinTransformer) -> FinTransformer:
    _same_space(f, g)
    return FinTransformer(
        f.space, tuple(a | b for a, b in zip(f.image, g.image))
    )


def star(f: FinTransformer) -> FinTransformer:
    """Least fixpoint of X = unit + f;X, by iteration to stabilisation.

    The lattice of transformers over a finite space is finite, so the
    iteration terminates; the explicit check guards against bugs rather
    than against divergence.
    """
    current = eta(f.space)
    for _ in range(f.space.size * f.space.size + 2):
        nxt = choice(eta(f.space), kleisli_compose(f, current))
        if nxt == current:
            return current
        current = nxt
    raise AssertionError("star iteration failed to stabilise")


def hoare_valid(p: FinTest, f: FinTransformer, q: FinTest) -> bool:
    """Partial-correctness triple: from every p-state, f lands inside q."""
    _same_space(p, f)
    _same_space(f, q.as_transformer())
    qset = frozenset(s for s in f.space.states() if q(s))
    return all(f.image[s] <= qset for s in f.space.states() if p(s))


def spec_statement(p: FinTest, q: FinTest) -> FinTransformer:
    """The greatest transformer satisfying the triple {p} - {q}."""
    _same_space(p, q.as_transformer())
    space = p.space
    full = frozenset(space.states())
    qset = frozenset(s for s in space.states() if q(s))
    return FinTransformer(
        space, tuple(qset if p(s) else full for s in space.states())
    )


def refines(f: FinTransformer, g: FinTransformer) -> bool:
    """f refines g when f is below g pointwise (fewer behaviours)."""
    return f.leq(g)


def if_then_else(p: FinTest, f: FinTransformer, g: FinTransformer) -> FinTransformer:
    pt = p.as_transformer()
    nt = p.complement().as_transformer()
    return choice(kleisli_compose(pt, f), kleisli_compose(nt, g))


def while_do(p: FinTest, f: FinTransformer) -> FinTransformer:
    pt = p.as_transformer()
    nt = p.complement().as_transformer()
    return kleisli_compose(star(kleisli_compose(pt, f)), nt)


def all_transformers(space: FinSpace):
    """Every transformer over the space; exponential, keep n tiny."""
    from itertools import chain, combinations, product

    states = list(space.states())

    def subsets(xs):
        return chain.from_iterable(combinations(xs, r) for r in range(len(xs) + 1))

    per_state = [tuple(frozenset(s) for s in subsets(states)) for _ in states]
    for images in product(*per_state):
        yield FinTransformer(space, tuple(images))


def all_tests(space: FinSpace):
    from itertools import product

    for members in product((False, True), repeat=space.size):
        yield FinTest(space, members)
