import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from conftest import tower_of
from markovtower.projcat import (
    CategoryError,
    TLMorphism,
    act_identity_on_tl,
    act_on_identity,
    compose,
    identity,
    left_kink_residual,
    linking_map,
    module_action,
    morphism,
    pivotal_trace,
    random_morphism,
    simple_objects,
    verify_category_laws,
    verify_linking_map,
    verify_pivotal,
    verify_simple_objects,
)
from markovtower.tljdiag import TLElement

seeds = st.integers(0, 2**32 - 1)
objects = st.integers(0, 2)


def test_identity_composition(rng):
    t = tower_of("D4", 6)
    for a, b in [(1, 3), (3, 1), (2, 2), (0, 2)]:
        f = random_morphism(t, a, b, rng)
        assert compose(t, identity(t, b), f).dist(f) < 1e-12
        assert compose(t, f, identity(t, a)).dist(f) < 1e-12


def test_endomorphisms_multiply(rng):
    t = tower_of("A3", 6)
    f, g = random_morphism(t, 3, 3, rng), random_morphism(t, 3, 3, rng)
    assert compose(t, g, f).carrier.dist(g.carrier @ f.carrier) < 1e-14


def test_level_and_parity_errors(rng):
    t = tower_of("A3", 6)
    with pytest.raises(CategoryError):
        morphism(t, 1, 2, t.levels[1].one())
    with pytest.raises(CategoryError):
        morphism(t, 1, 3, t.levels[1].one())
    f, g = random_morphism(t, 1, 3, rng), random_morphism(t, 1, 1, rng)
    with pytest.raises(CategoryError):
        compose(t, g, f)


@given(seeds, objects, objects, objects)
def test_dagger_contract(seed, a, b, c):
    b = b if (b - a) % 2 == 0 else b + 1
    c = c if (c - b) % 2 == 0 else c + 1
    rng = np.random.default_rng(seed)
    t = tower_of("E6", 6)
    f, g = random_morphism(t, a, b, rng), random_morphism(t, b, c, rng)
    lhs = compose(t, g, f).dagger()
    rhs = compose(t, f.dagger(), g.dagger())
    assert lhs.dist(rhs) < 1e-10 * max(1.0, lhs.carrier.max_abs())


@given(seeds, objects, objects, objects, objects)
def test_associativity_mixed_directions(seed, a, b, c, e):
    b = b if (b - a) % 2 == 0 else b + 1
    c = c if (c - b) % 2 == 0 else c + 1
    e = e if (e - c) % 2 == 0 else e + 1
    rng = np.random.default_rng(seed)
    t = tower_of("A3", 6)
    f, g, h = (random_morphism(t, a, b, rng), random_morphism(t, b, c, rng), random_morphism(t, c, e, rng))
    lhs = compose(t, h, compose(t, g, f))
    rhs = compose(t, compose(t, h, g), f)
    assert lhs.dist(rhs) < 1e-8 * max(1.0, lhs.carrier.max_abs())


def test_linking_map_a3_0111(rng):
    t = tower_of("A3", 6)
    lm = linking_map(t, 0, 1, 1, 1)
    for _ in range(5):
        x, y = lm.random_element(rng), lm.random_element(rng)
        assert lm.homomorphism_residual(x, y) < 1e-8
        assert lm.dagger_residual(x) < 1e-8
    assert lm.unit_residual() < 1e-10


def test_linking_map_unit_is_projection():
    t = tower_of("D4", 6)
    lm = linking_map(t, 0, 1, 1, 1)
    img = lm.apply(lm.unit())
    for a in range(4):
        for b in range(4):
            blocks = img[(a, b)]
            for blk in blocks:
                expected = np.eye(blk.shape[0]) if a == b else np.zeros_like(blk)
                assert np.allclose(blk, expected, atol=1e-10)


def test_linking_map_too_deep():
    with pytest.raises(Exception):
        linking_map(tower_of("A3", 4), 0, 1, 1, 1)


def test_linking_report_small():
    t = tower_of("A3", 6)
    report = verify_linking_map(t, [(0, 1, 1, 1), (1, 0, 1, 1), (2, 1, 0, 1)], pairs=5, seed=3)
    assert report.passed, report.summary()


@given(seeds, st.integers(0, 1), st.integers(0, 2), st.integers(0, 2))
@example(0, 1, 2, 2)
def test_left_kink(seed, n, i, j):
    rng = np.random.default_rng(seed)
    t = tower_of("D4", 9)
    x = t.levels[n + 2 * i + j].random(rng)
    assert left_kink_residual(t, x, n, i, j) < 1e-9 * max(1.0, x.max_abs())


def test_action_by_empty_identity(rng):
    t = tower_of("A3", 6)
    f = random_morphism(t, 1, 3, rng)
    assert module_action(t, f, 0).dist(f) < 1e-14
    assert act_on_identity(t, f, 0).dist(f) < 1e-14
    assert module_action(t, 2, 1).dist(identity(t, 3)) == 0


def test_action_signature_errors():
    t = tower_of("A3", 6)
    with pytest.raises(CategoryError):
        module_action(t, identity(t, 1), TLMorphism(1, 1, TLElement.identity(1, t.modulus)))
    with pytest.raises(CategoryError):
        TLMorphism(1, 2, TLElement.identity(1, t.modulus))


def test_tl_action_is_padding():
    t = tower_of("A3", 6)
    capcup = TLMorphism(2, 2, TLElement.parse("()", t.modulus))
    img = act_identity_on_tl(t, 2, capcup)
    assert (img.source, img.target) == (4, 4)
    assert img.carrier.dist(t.e(3, 4) * t.modulus) < 1e-12


@pytest.mark.parametrize("name", ["A3", "D4"])
def test_category_laws_report(name):
    report = verify_category_laws(tower_of(name, 6), samples=2, seed=5)
    assert report.passed, report.summary()
    assert {c.label for c in report.checks} >= {"assoc", "exchange", "bifunctor", "action-assoc"}


def test_pivotal_basics():
    t = tower_of("A3", 6)
    assert pivotal_trace(t, identity(t, 0)) == pytest.approx(1.0)
    assert pivotal_trace(t, identity(t, 2)) == pytest.approx(2.0)
    with pytest.raises(CategoryError):
        pivotal_trace(t, morphism(t, 1, 3, t.levels[2].one()))


@pytest.mark.parametrize("name", ["A3", "D4", "E6"])
def test_pivotal_report(name):
    report = verify_pivotal(tower_of(name, 7), samples=3, seed=2)
    assert report.passed, report.summary()
    assert report.max_residual("Tr3") < 1e-9


@pytest.mark.parametrize("name,count", [("A2", 2), ("A3", 3), ("E6", 6)])
def test_simple_objects(name, count):
    t = tower_of(name, 8)
    assert len(simple_objects(t)) == count
    report = verify_simple_objects(t)
    assert report.passed, report.summary()
