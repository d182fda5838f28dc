import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import tower_of
from markovtower.graph import builtin, is_pointed_isomorphic
from markovtower.multimatrix import AlgebraElement, MultiMatrixAlgebra, UnitalInclusion
from markovtower.tljdiag import cabled_projection, represent
from markovtower.tower import (
    MarkovTower,
    TowerError,
    bratteli_to_dot,
    build_tower,
    cabled_projection_in_tower,
    compress,
    finite_depth,
    multistep,
    multistep_relation_check,
    new_blocks,
    principal_graph,
    shift,
    tower_summary,
    verify_elementary_properties,
    verify_markov_axioms,
)

GRAPHS = ["A2", "A3", "A4", "A5", "D4", "D5", "E6"]
seeds = st.integers(0, 2**32 - 1)


def walk_counts(graph, k):
    """Number of walks of length k from the basepoint to each vertex."""
    verts = list(graph.vertices)
    a = graph.adjacency()
    start = np.zeros(len(verts))
    start[verts.index(graph.basepoint)] = 1
    counts = start @ np.linalg.matrix_power(a, k)
    return {v: int(round(c)) for v, c in zip(verts, counts) if round(c) > 0}


@pytest.mark.parametrize("name", GRAPHS)
def test_block_sizes_and_weights_match_path_count(name):
    g = builtin(name)
    t = build_tower(g, 6)
    for k, alg in enumerate(t.levels):
        counts = walk_counts(g, k)
        assert dict(zip(alg.labels, alg.sizes)) == counts
        for lab, w in zip(alg.labels, alg.weights):
            assert w == pytest.approx(g.modulus ** (-k) * g.dim[lab], rel=1e-12)


def test_a3_dims():
    assert tower_of("A3", 4).level_dims() == [1, 1, 2, 4, 8]


def test_a2_scalar():
    t = tower_of("A2", 5)
    assert t.level_dims() == [1] * 6
    for n, e in t.jones.items():
        assert e.dist(e.algebra.one()) < 1e-12


def test_a3_trace_of_e2():
    t = tower_of("A3", 4)
    assert t.jones[2].trace() == pytest.approx(0.5, abs=1e-12)


def test_depth_too_small():
    with pytest.raises(TowerError):
        build_tower(builtin("A3"), 0)


@pytest.mark.parametrize("name", GRAPHS)
def test_axioms_and_elementary_properties(name):
    g = builtin(name)
    t = build_tower(g, 2 * g.diameter() + 2)
    for report in (verify_markov_axioms(t), verify_elementary_properties(t)):
        assert report.passed, report.summary()
        assert report.max_residual() < 1e-9


def perturbed(tower, level, block, eps):
    """Copy of ``tower`` with one trace weight of ``level`` shifted by ``eps``."""
    levels = []
    for k, alg in enumerate(tower.levels):
        w = alg.weights.copy()
        if k == level:
            w[block] += eps
        levels.append(MultiMatrixAlgebra(alg.labels, alg.sizes, w))
    incls = [UnitalInclusion(levels[k], levels[k + 1], inc.layout) for k, inc in enumerate(tower.inclusions)]
    jones = {n: AlgebraElement(levels[n + 1], e.blocks) for n, e in tower.jones.items()}
    return MarkovTower(levels, incls, jones, tower.modulus)


def test_perturbed_weight_flags_m3():
    t = perturbed(tower_of("A3", 6), 3, 0, 1e-3)
    report = verify_markov_axioms(t)
    m3 = report.max_residual("M3")
    assert not report.passed
    assert 1e-4 < m3 < 1e-2


def test_a2_has_no_new_stuff_after_level_one():
    blocks = new_blocks(tower_of("A2", 5))
    assert all(not b for b in blocks[2:])


def test_d4_new_vertices_and_ep8():
    t = tower_of("D4", 6)
    blocks = new_blocks(t)
    assert len(blocks[2]) == 2
    assert all(not b for b in blocks[3:])
    ep = verify_elementary_properties(t)
    assert all(c.passed for c in ep.by_label("EP8"))


@pytest.mark.parametrize("name,depth", [("A2", 2), ("A3", 3), ("E6", 5)])
def test_finite_depth(name, depth):
    assert finite_depth(tower_of(name, 8)) == depth


@pytest.mark.parametrize("name", GRAPHS)
def test_principal_graph_round_trip(name):
    g = builtin(name)
    t = build_tower(g, 2 * g.diameter() + 2)
    data = principal_graph(t, details=True)
    assert data.certified
    assert is_pointed_isomorphic(data.graph, g, 1e-9) is not None
    for v, lab in is_pointed_isomorphic(data.graph, g).items():
        assert data.graph.dim[v] == pytest.approx(g.dim[lab], abs=1e-9)


def test_principal_graph_truncation_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        principal_graph(build_tower(builtin("E6"), 3))
    assert caught


@pytest.mark.parametrize("name", ["A3", "D4", "E6"])
def test_dim_independent_of_representative(name):
    t = tower_of(name, 8)
    d = t.modulus
    data = principal_graph(t, details=True)
    for v, first in data.first_level.items():
        for k in (first, first + 2):
            if k > t.depth:
                continue
            alg = t.levels[k]
            if v not in alg.labels:
                continue
            b = alg.index(v)
            for r in {0, alg.sizes[b] - 1}:
                p = alg.matrix_unit(b, r, r)
                assert d**k * p.trace() == pytest.approx(data.graph.dim[v], abs=1e-9)


def test_shift():
    t = tower_of("A3", 6)
    assert shift(t, 0) is t
    s = shift(t, 2)
    assert verify_markov_axioms(s).passed
    assert s.level_dims() == t.level_dims()[2:]
    assert [m.tolist() for m in s.bratteli()] == [m.tolist() for m in t.bratteli()[2:]]
    with pytest.raises(TowerError):
        shift(t, 5)


def test_compress_by_one_is_identity():
    t = tower_of("D4", 6)
    c = compress(t, t.levels[0].one())
    assert c.level_dims() == t.level_dims()
    for n in t.jones:
        assert c.jones[n].dist(t.jones[n]) < 1e-12
    assert verify_markov_axioms(c).passed


def test_compress_moves_basepoint():
    g = builtin("A3")
    s = shift(tower_of("A3", 8), 2)
    base = s.levels[0]
    p = base.block_unit(base.index("v2"))
    c = compress(s, p)
    assert c.levels[0].one().trace() == pytest.approx(1.0)
    assert c.levels[0].dim == 1
    assert verify_markov_axioms(c).passed
    pg = principal_graph(c)
    assert is_pointed_isomorphic(pg, g.with_basepoint("v2")) is not None
    rebuilt = build_tower(g.with_basepoint("v2"), c.depth)
    assert c.block_sizes() == rebuilt.block_sizes()


def test_compress_rejects_bad_input():
    t = tower_of("A3", 6)
    with pytest.raises(TowerError):
        compress(t, t.levels[0].zero())
    with pytest.raises(TowerError):
        compress(t, t.levels[0].one() * 2)


def test_multistep_k1_is_shift():
    t = tower_of("E6", 6)
    m = multistep(t, 1, 1)
    s = shift(t, 1)
    assert m.level_dims() == s.level_dims()
    for n in m.jones:
        assert m.jones[n].dist(s.jones[n]) < 1e-12


@pytest.mark.parametrize("name,j,k", [("A3", 0, 2), ("A3", 1, 2), ("A3", 0, 3), ("E6", 0, 2), ("E6", 1, 2), ("E6", 0, 3)])
def test_multistep_axioms(name, j, k):
    t = tower_of(name, j + 3 * k)
    m = multistep(t, j, k)
    assert m.modulus == pytest.approx(t.modulus**k)
    report = verify_markov_axioms(m)
    assert report.passed, report.summary()
    assert multistep_relation_check(t, j, k) < 1e-9


def test_multistep_bratteli_counts_upward_paths():
    t = tower_of("D4", 6)
    m = multistep(t, 0, 2)
    lam = t.bratteli()
    for n, got in enumerate(m.bratteli()):
        expected = lam[2 * n] @ lam[2 * n + 1]
        assert got.tolist() == expected.tolist()


def test_cabled_word_matches_diagram():
    for name in ("A3", "E6"):
        t = tower_of(name, 6)
        for j, k in [(0, 2), (1, 2), (0, 3)]:
            word = cabled_projection_in_tower(t, j, k)
            diag = represent(t, cabled_projection(j, k, t.modulus))
            assert word.dist(diag) < 1e-10


def test_multistep_relation_k1_is_zero():
    assert multistep_relation_check(tower_of("A4", 6), 1, 1) < 1e-14


def test_exports():
    t = tower_of("A3", 4)
    assert bratteli_to_dot(t).count("->") == sum(int((m > 0).sum()) for m in t.bratteli())
    summary = tower_summary(t)
    assert [lv["dim"] for lv in summary["levels"]] == [1, 1, 2, 4, 8]


@given(seeds, st.sampled_from(["A4", "D5", "E6"]))
def test_markov_property_on_random_elements(seed, name):
    rng = np.random.default_rng(seed)
    t = tower_of(name, 6)
    d2 = t.modulus**-2
    for n in range(1, t.depth):
        x = t.levels[n].random(rng)
        lhs = (t.include(x, n + 1) @ t.jones[n]).trace()
        assert abs(lhs - d2 * x.trace()) < 1e-10
        # pull-down witness: y e_n = x e_n with y = d^2 E(x e_n)
        z = t.levels[n + 1].random(rng)
        y = t.expect(z @ t.jones[n], n) * t.modulus**2
        assert (t.include(y, n + 1) @ t.jones[n]).dist(z @ t.jones[n]) < 1e-9
