import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import tower_of
from markovtower.tljdiag import (
    DiagramError,
    TLDiagram,
    TLElement,
    basis_diagrams,
    cabled_diagram,
    cabled_projection,
    catalan,
    diagram,
    diagram_multiply,
    diagram_word,
    generic_dimension,
    image_dimension,
    jones_projection_diagram,
    relation_diagram,
    represent,
)

D = 1.7  # a generic modulus


def stack_oracle(a: TLDiagram, b: TLDiagram) -> tuple[tuple, int]:
    """Glue ``a`` on top of ``b`` by walking strands; returns (pairs, loops)."""
    n_mid = b.top
    assert a.bottom == n_mid
    adj = {}

    def b_pt(p):
        return ("bot", p) if p < b.bottom else ("mid", p - b.bottom)

    def a_pt(p):
        return ("mid", p) if p < a.bottom else ("top", p - a.bottom)

    for p, q in enumerate(b.pairing):
        adj.setdefault(b_pt(p), []).append(b_pt(q))
    for p, q in enumerate(a.pairing):
        adj.setdefault(a_pt(p), []).append(a_pt(q))
    seen = set()
    pairs = set()
    for start in [("bot", i) for i in range(b.bottom)] + [("top", i) for i in range(a.top)]:
        if start in seen:
            continue
        prev, cur = None, start
        seen.add(cur)
        while True:
            nbrs = [x for x in adj[cur] if x != prev] or adj[cur]
            nxt = nbrs[0]
            prev, cur = cur, nxt
            seen.add(cur)
            if cur[0] != "mid":
                break
            # each middle point has two neighbours: one from a, one from b
            other = [x for x in adj[cur] if x != prev]
            prev, cur = cur, other[0] if other else prev
            seen.add(cur)
            if cur[0] != "mid":
                break
        pairs.add(frozenset([start, cur]))
    loops = 0
    for i in range(n_mid):
        pt = ("mid", i)
        if pt in seen:
            continue
        loops += 1
        stack = [pt]
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(adj[x])
    return frozenset(pairs), loops


def as_pairs(dgm: TLDiagram) -> frozenset:
    def pt(p):
        return ("bot", p) if p < dgm.bottom else ("top", p - dgm.bottom)

    return frozenset(frozenset([pt(p), pt(q)]) for p, q in enumerate(dgm.pairing) if p < q)


def el(dgm, c=1.0, d=D):
    return TLElement.from_diagram(dgm, d, c)


def test_stacking_matches_oracle_on_tl3_and_tl4():
    for n in (3, 4):
        basis = basis_diagrams(n)
        for a, b in itertools.product(basis, basis):
            prod = diagram_multiply(el(a), el(b))
            (dgm, c), = prod.terms.items()
            pairs, loops = stack_oracle(a, b)
            assert as_pairs(dgm) == pairs
            assert c == pytest.approx(D**loops)


def test_identity_is_unit():
    for dgm in basis_diagrams(3):
        x = el(dgm)
        one = TLElement.identity(3, D)
        assert one @ x == x and x @ one == x


def test_capcup_squared():
    e = el(diagram("()"))
    assert (e @ e).dist(e * D) < 1e-15


def test_e1e2e1_is_e1():
    e1, e2 = el(diagram("()|")), el(diagram("|()"))
    assert (e1 @ e2 @ e1) == e1


def test_jones_relations():
    e = {i: jones_projection_diagram(i, 4, D) for i in (1, 2, 3)}
    assert (e[1] @ e[1]).dist(e[1]) < 1e-15
    assert (e[1] @ e[3]) == (e[3] @ e[1])
    assert (e[1] @ e[2] @ e[1]).dist(e[1] * D**-2) < 1e-15
    assert (e[3] @ e[2] @ e[3]).dist(e[3] * D**-2) < 1e-15
    assert (e[2].adjoint()) == e[2]
    (dgm, c), = jones_projection_diagram(1, 2, D).terms.items()
    assert dgm == diagram("()") and c == pytest.approx(1 / D)


def test_index_errors():
    with pytest.raises(DiagramError):
        jones_projection_diagram(0, 3, D)
    with pytest.raises(DiagramError):
        jones_projection_diagram(3, 3, D)
    with pytest.raises(DiagramError):
        el(diagram("()")) @ el(diagram("|"))


def test_non_planar_rejected():
    with pytest.raises(DiagramError):
        TLDiagram(2, 2, (3, 2, 1, 0))


def test_text_round_trip():
    for n in range(1, 5):
        for dgm in basis_diagrams(n):
            assert diagram(dgm.to_text()) == dgm


def test_associativity_on_tl3_triples():
    basis = [el(b) for b in basis_diagrams(3)]
    for x, y, z in itertools.product(basis, repeat=3):
        assert (x @ y) @ z == x @ (y @ z)


def test_adjoint_is_anti_homomorphism():
    basis = [el(b) for b in basis_diagrams(4)]
    for x, y in itertools.product(basis, repeat=2):
        assert (x @ y).adjoint() == y.adjoint() @ x.adjoint()
        assert x.adjoint().adjoint() == x


def test_cabled_projection():
    for j in range(3):
        assert cabled_projection(j, 1, D) == jones_projection_diagram(j + 1, j + 2, D)
    f = cabled_projection(0, 2, D)
    (dgm, c), = f.terms.items()
    assert dgm == cabled_diagram(0, 2) and c == pytest.approx(D**-2)
    for j, k in [(0, 2), (1, 2), (0, 3), (2, 2)]:
        f = cabled_projection(j, k, D)
        assert (f @ f).dist(f) < 1e-12
        assert f.adjoint() == f
        (dgm, c), = f.terms.items()
        assert dgm == cabled_diagram(j, k) and c == pytest.approx(D**-k)


@pytest.mark.parametrize("j,k", [(0, 2), (1, 2), (0, 3), (1, 3)])
def test_multistep_relation_as_diagrams(j, k):
    n = j + 2 * k
    word = TLElement.identity(n, D)
    for i in range(j + k, j + 2 * k):
        word = word @ jones_projection_diagram(i, n, D)
    assert (word @ relation_diagram(j, k, D)).dist(cabled_projection(j, k, D)) < 1e-12


def brute_catalan(n):
    """Count non-crossing perfect matchings of 2n points by filtering all matchings."""

    def matchings(points):
        if not points:
            yield []
            return
        a = points[0]
        for i in range(1, len(points)):
            rest = points[1:i] + points[i + 1:]
            for m in matchings(rest):
                yield [(a, points[i])] + m

    def crossing(p, q):
        (a, b), (c, d) = sorted(p), sorted(q)
        return a < c < b < d or c < a < d < b

    return sum(
        1
        for m in matchings(list(range(2 * n)))
        if not any(crossing(p, q) for p, q in itertools.combinations(m, 2))
    )


@pytest.mark.parametrize("n", range(7))
def test_generic_dimension_is_catalan(n):
    assert generic_dimension(n) == catalan(n) == brute_catalan(n)


def test_small_dimensions():
    assert [generic_dimension(n) for n in range(5)] == [1, 1, 2, 5, 14]


def test_represent_identity_and_generators():
    t = tower_of("E6", 6)
    assert represent(t, TLElement.identity(4, t.modulus)).dist(t.levels[4].one()) < 1e-14
    for i in range(1, 5):
        assert represent(t, jones_projection_diagram(i, 5, t.modulus)).dist(t.e(i, 5)) < 1e-12


def test_represent_relation_vanishes():
    for name in ("A3", "D4", "E6"):
        t = tower_of(name, 6)
        d = t.modulus
        e1, e2 = jones_projection_diagram(1, 3, d), jones_projection_diagram(2, 3, d)
        assert represent(t, e1 @ e2 @ e1 - e1 * d**-2).max_abs() < 1e-10


def test_represent_cabled_matches_word():
    t = tower_of("A3", 6)
    f = represent(t, cabled_projection(0, 2, t.modulus))
    word = t.e(2, 4) @ t.e(1, 4) @ t.e(3, 4) @ t.e(2, 4) * t.modulus**2
    assert f.dist(word) < 1e-12


def test_represent_modulus_mismatch():
    t = tower_of("A3", 4)
    with pytest.raises(Exception):
        represent(t, jones_projection_diagram(1, 2, 1.5))


def test_diagram_word_reproduces_diagram():
    d = D
    for n in (3, 4, 5):
        for dgm in basis_diagrams(n):
            word, power = diagram_word(dgm)
            x = TLElement.identity(n, d)
            for i in word:
                x = x @ el(diagram("|" * (i - 1) + "()" + "|" * (n - i - 1)))
            (got, c), = x.terms.items()
            assert got == dgm
            assert c == pytest.approx(d**power)


def test_image_dimension_a3_exhausts_tower():
    t = tower_of("A3", 4)
    assert [image_dimension(t, n) for n in range(5)] == [1, 1, 2, 4, 8] == t.level_dims()


@pytest.mark.parametrize("name", ["A2", "A4", "D4", "E6"])
def test_image_dimension_bounded_by_catalan(name):
    t = tower_of(name, 6)
    for n in range(7):
        assert image_dimension(t, n) <= min(generic_dimension(n), t.level_dims()[n])


def random_tl(n, d, rng):
    basis = basis_diagrams(n)
    return TLElement(n, n, {b: c for b, c in zip(basis, rng.standard_normal(len(basis)))}, d)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["A4", "D5", "E6"]), st.integers(2, 5))
def test_represent_is_star_homomorphism(seed, name, n):
    rng = np.random.default_rng(seed)
    t = tower_of(name, 6)
    x, y = random_tl(n, t.modulus, rng), random_tl(n, t.modulus, rng)
    rx, ry = represent(t, x), represent(t, y)
    assert represent(t, x @ y).dist(rx @ ry) < 1e-10 * max(1.0, (rx @ ry).max_abs())
    assert represent(t, x.adjoint()).dist(rx.adjoint()) < 1e-12 * max(1.0, rx.max_abs())
