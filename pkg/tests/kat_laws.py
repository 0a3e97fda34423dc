"""Law checkers for the finite state-transformer model.

Each function takes concrete transformers/tests over one space and returns
whether the law instance holds; the module-level suites run them over a
seeded sampler.  Shared between the unit tests and the acceptance gate.
"""

from __future__ import annotations

import random

from hvcg.kat import (
    FinSpace,
    FinTest,
    FinTransformer,
    choice,
    eta,
    hoare_valid,
    if_then_else,
    kleisli_compose as comp,
    refines,
    spec_statement,
    star,
    while_do,
    zero,
)


def rand_transformer(space: FinSpace, rng: random.Random) -> FinTransformer:
    n = space.size
    return FinTransformer(
        space,
        tuple(
            frozenset(s for s in range(n) if rng.random() < 0.4)
            for _ in range(n)
        ),
    )


def rand_test(space: FinSpace, rng: random.Random) -> FinTest:
    return FinTest(space, tuple(rng.random() < 0.5 for _ in range(space.size)))


def leq(f: FinTransformer, g: FinTransformer) -> bool:
    return f.leq(g)


# -- idempotent semiring and star axioms -------------------------------------


def kleene_axioms(space, f, g, h) -> list[tuple[str, bool]]:
    one, zr = eta(space), zero(space)
    out = [
        ("choice-assoc", choice(f, choice(g, h)) == choice(choice(f, g), h)),
        ("choice-comm", choice(f, g) == choice(g, f)),
        ("choice-idem", choice(f, f) == f),
        ("choice-zero", choice(f, zr) == f),
        ("comp-assoc", comp(f, comp(g, h)) == comp(comp(f, g), h)),
        ("comp-unit-l", comp(one, f) == f),
        ("comp-unit-r", comp(f, one) == f),
        ("comp-zero-l", comp(zr, f) == zr),
        ("comp-zero-r", comp(f, zr) == zr),
        ("dist-l", comp(f, choice(g, h)) == choice(comp(f, g), comp(f, h))),
        ("dist-r", comp(choice(f, g), h) == choice(comp(f, h), comp(g, h))),
        ("star-unfold-l", leq(choice(one, comp(f, star(f))), star(f))),
        ("star-unfold-r", leq(choice(one, comp(star(f), f)), star(f))),
    ]
    # star induction, both sides
    if leq(choice(g, comp(f, h)), h):
        out.append(("star-induct-l", leq(comp(star(f), g), h)))
    if leq(choice(g, comp(h, f)), h):
        out.append(("star-induct-r", leq(comp(g, star(f)), h)))
    return out


def boolean_axioms(space, p, q, r) -> list[tuple[str, bool]]:
    def t(x: FinTest) -> FinTransformer:
        return x.as_transformer()

    out = [
        ("meet-as-comp", t(p.meet(q)) == comp(t(p), t(q))),
        ("join-as-choice", t(p.join(q)) == choice(t(p), t(q))),
        ("meet-comm", p.meet(q) == q.meet(p)),
        ("join-comm", p.join(q) == q.join(p)),
        ("distrib", p.meet(q.join(r)) == p.meet(q).join(p.meet(r))),
        ("complement-meet", t(p.meet(p.complement())) == zero(space)),
        ("complement-join", t(p.join(p.complement())) == eta(space)),
        ("double-complement", p.complement().complement() == p),
        ("de-morgan", p.meet(q).complement() == p.complement().join(q.complement())),
    ]
    return out


# -- Hoare logic rules --------------------------------------------------------


def hoare_rules(space, f, g, p, q, r, t, i, j) -> list[tuple[str, bool]]:
    out = [("h-skip", hoare_valid(p, eta(space), p))]
    # h-cons: strengthen pre, weaken post
    pq = p.meet(q)
    qr = q.join(r)
    if hoare_valid(q, f, q):
        out.append(("h-cons", hoare_valid(pq, f, qr)))
    if hoare_valid(p, f, r) and hoare_valid(r, g, q):
        out.append(("h-seq", hoare_valid(p, comp(f, g), q)))
    if hoare_valid(t.meet(p), f, q) and hoare_valid(t.complement().meet(p), g, q):
        out.append(("h-cond", hoare_valid(p, if_then_else(t, f, g), q)))
    if hoare_valid(t.meet(p), f, p):
        out.append(("h-while", hoare_valid(p, while_do(t, f), t.complement().meet(p))))
    if hoare_valid(i, f, i):
        # h-inv with p <= i <= q
        out.append(("h-inv", hoare_valid(i.meet(p), f, i.join(q))))
        out.append(("h-loop-inv", hoare_valid(i.meet(p), star(f), i.join(q))))
        if hoare_valid(j, f, j):
            out.append(("h-inv-mult", hoare_valid(i.meet(j), f, i.meet(j))))
            out.append(("h-inv-plus", hoare_valid(i.join(j), f, i.join(j))))
    if hoare_valid(i.meet(t), f, i):
        out.append(
            ("h-while-inv",
             hoare_valid(i.meet(p), while_do(t, f), t.complement().meet(i).join(q)))
        )
    return out


# -- refinement laws -----------------------------------------------------------


def refinement_laws(space, f, g, p, q, r, t, i) -> list[tuple[str, bool]]:
    sp = spec_statement
    out = [
        ("r-skip", refines(eta(space), sp(p, p))),
        ("r-seq", refines(comp(sp(p, r), sp(r, q)), sp(p, q))),
        ("r-cond", refines(
            if_then_else(t, sp(t.meet(p), q), sp(t.complement().meet(p), q)),
            sp(p, q))),
        ("r-while", refines(
            while_do(t, sp(t.meet(p), p)), sp(p, t.complement().meet(p)))),
        ("r-loop", refines(star(sp(i, i)), sp(i, i))),
        ("below-any-post-true", refines(f, sp(FinTest.of(space, []), FinTest.of(space, range(space.size))))),
        ("above-magic", refines(sp(FinTest.of(space, range(space.size)), FinTest.of(space, [])), f)),
        ("galois", hoare_valid(p, f, q) == refines(f, sp(p, q))),
    ]
    # r-cons: with p <= p' and q' <= q
    p_, q_ = p.join(r), q.meet(r)
    out.append(("r-cons", refines(sp(p_, q_), sp(p, q))))
    # r-inv with an invariant squeezed between pre and post: p <= I <= Q
    inv = p.join(i)
    out.append(("r-inv", refines(sp(inv, inv), sp(p, inv.join(q)))))
    return out


def run_law_suite(samples: int, seed: int = 2024, max_n: int = 4):
    """Run every law over fresh random instances; returns failure list."""
    rng = random.Random(seed)
    failures = []
    for k in range(samples):
        space = FinSpace(rng.randint(1, max_n))
        f, g, h = (rand_transformer(space, rng) for _ in range(3))
        p, q, r, t, i, j = (rand_test(space, rng) for _ in range(6))
        checks = (
            kleene_axioms(space, f, g, h)
            + boolean_axioms(space, p, q, r)
            + hoare_rules(space, f, g, p, q, r, t, i, j)
            + refinement_laws(space, f, g, p, q, r, t, i)
        )
        for name, ok in checks:
            if not ok:
                failures.append((k, name))
    return failures
