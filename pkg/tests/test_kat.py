"""Finite state-transformer model: operations and algebraic laws."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from hvcg.kat import (
    FinSpace,
    FinTest,
    FinTransformer,
    SpaceMismatchError,
    all_tests,
    all_transformers,
    empty_test,
    eta,
    full_test,
    hoare_valid,
    if_then_else,
    kleisli_compose as comp,
    refines,
    spec_statement,
    star,
    top,
    while_do,
    zero,
)
from kat_laws import (
    boolean_axioms,
    hoare_rules,
    kleene_axioms,
    rand_test,
    rand_transformer,
    refinement_laws,
    run_law_suite,
)

S3 = FinSpace(3)


def cyclic(space: FinSpace) -> FinTransformer:
    return FinTransformer.of(space, lambda s: {(s + 1) % space.size})


spaces = st.integers(min_value=1, max_value=4).map(FinSpace)


@st.composite
def transformers(draw, space=None):
    sp = space or draw(spaces)
    images = draw(
        st.lists(
            st.sets(st.integers(0, sp.size - 1)),
            min_size=sp.size,
            max_size=sp.size,
        )
    )
    return FinTransformer(sp, tuple(frozenset(i) for i in images))


# -- basic operations ---------------------------------------------------------


def test_compose_unit_law():
    f = cyclic(S3)
    assert comp(f, eta(S3)) == f
    assert comp(eta(S3), f) == f


def test_compose_annihilation():
    g = rand_transformer(S3, random.Random(1))
    assert comp(zero(S3), g) == zero(S3)


def test_compose_definition_enumeration():
    f = cyclic(S3)
    g = FinTransformer.of(S3, lambda s: {0})
    composed = comp(f, g)
    # brute-force the set comprehension
    for s in S3.states():
        expected = frozenset().union(*(g(y) for y in f(s)))
        assert composed(s) == expected == frozenset({0})


def test_space_mismatch_rejected():
    with pytest.raises(SpaceMismatchError):
        comp(cyclic(S3), cyclic(FinSpace(2)))


def test_star_of_zero_is_unit():
    assert star(zero(S3)) == eta(S3)


def test_star_cyclic_reaches_everything():
    # oracle: iterate the fixpoint by hand
    f = cyclic(S3)
    expected = frozenset({0, 1, 2})
    assert star(f)(0) == expected


def test_complement_of_empty_is_full():
    assert empty_test(S3).complement() == full_test(S3)


def test_hoare_skip():
    p = FinTest.of(S3, [0, 2])
    assert hoare_valid(p, eta(S3), p)


def test_hoare_vacuous_on_zero():
    assert hoare_valid(full_test(S3), zero(S3), empty_test(S3))


def test_hoare_counterexample():
    sp = FinSpace(2)
    p = FinTest.of(sp, [0])
    f = FinTransformer(sp, (frozenset({1}), frozenset()))
    q = FinTest.of(sp, [0])
    assert not hoare_valid(p, f, q)


def test_hoare_equivalent_formulations():
    # {p} f {q}  iff  p;f;not-q = 0  iff  p;f <= f;q
    rng = random.Random(7)
    for _ in range(300):
        sp = FinSpace(rng.randint(1, 4))
        f = rand_transformer(sp, rng)
        p, q = rand_test(sp, rng), rand_test(sp, rng)
        lhs = hoare_valid(p, f, q)
        pt, qt = p.as_transformer(), q.as_transformer()
        nq = q.complement().as_transformer()
        assert lhs == (comp(comp(pt, f), nq) == zero(sp))
        assert lhs == comp(pt, f).leq(comp(f, qt))


def test_spec_statement_vacuous_precondition():
    q = FinTest.of(S3, [1])
    assert spec_statement(empty_test(S3), q) == top(S3)


def test_spec_statement_brute_force_n3():
    # the greatest transformer satisfying the triple, by enumeration
    p = FinTest.of(S3, [0])
    q = FinTest.of(S3, [1])
    sp = spec_statement(p, q)
    assert sp(0) == frozenset({1})
    assert sp(1) == sp(2) == frozenset({0, 1, 2})
    union = [set() for _ in S3.states()]
    for f in all_transformers(S3):
        if hoare_valid(p, f, q):
            for s in S3.states():
                union[s] |= f(s)
    assert tuple(frozenset(u) for u in union) == sp.image


@pytest.mark.parametrize("n", [1, 2, 3])
def test_spec_statement_galois_and_extremality_exhaustive(n):
    space = FinSpace(n)
    for p in all_tests(space):
        for q in all_tests(space):
            sp = spec_statement(p, q)
            assert hoare_valid(p, sp, q)
            for f in all_transformers(space):
                assert hoare_valid(p, f, q) == refines(f, sp)


def test_if_then_else_full_test():
    f, g = cyclic(S3), rand_transformer(S3, random.Random(3))
    assert if_then_else(full_test(S3), f, g) == f


def test_while_false_test_is_skip():
    f = cyclic(S3)
    assert while_do(empty_test(S3), f) == eta(S3)


def test_while_example_n2():
    sp = FinSpace(2)
    p = FinTest.of(sp, [0])
    f = FinTransformer(sp, (frozenset({1}), frozenset({1})))
    assert while_do(p, f)(0) == frozenset({1})


# -- law suites ------------------------------------------------------------------


@given(st.data())
@settings(max_examples=300, deadline=None)
def test_kleene_axioms_hypothesis(data):
    sp = data.draw(spaces)
    f = data.draw(transformers(sp))
    g = data.draw(transformers(sp))
    h = data.draw(transformers(sp))
    for name, ok in kleene_axioms(sp, f, g, h):
        assert ok, name


@given(st.data())
@settings(max_examples=300, deadline=None)
def test_boolean_algebra_hypothesis(data):
    sp = data.draw(spaces)
    rng = random.Random(data.draw(st.integers(0, 2**20)))
    p, q, r = (rand_test(sp, rng) for _ in range(3))
    for name, ok in boolean_axioms(sp, p, q, r):
        assert ok, name


def test_hoare_and_refinement_rules_random():
    rng = random.Random(11)
    for _ in range(2000):
        sp = FinSpace(rng.randint(1, 4))
        f, g = rand_transformer(sp, rng), rand_transformer(sp, rng)
        p, q, r, t, i, j = (rand_test(sp, rng) for _ in range(6))
        for name, ok in hoare_rules(sp, f, g, p, q, r, t, i, j):
            assert ok, name
        for name, ok in refinement_laws(sp, f, g, p, q, r, t, i):
            assert ok, name


def test_refinement_laws_exhaustive_n2():
    space = FinSpace(2)
    tests = list(all_tests(space))
    transformers_ = list(all_transformers(space))
    rng = random.Random(5)
    for _ in range(400):
        f = rng.choice(transformers_)
        g = rng.choice(transformers_)
        p, q, r, t, i = (rng.choice(tests) for _ in range(5))
        for name, ok in refinement_laws(space, f, g, p, q, r, t, i):
            assert ok, name


def test_quick_law_suite():
    assert run_law_suite(500, seed=99) == []
