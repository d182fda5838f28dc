import json
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from markovtower.graph import (
    GraphError,
    WeightedBipartiteGraph,
    builtin,
    frobenius_perron,
    graph_to_dot,
    is_pointed_isomorphic,
    load_graph,
    save_graph,
    verify_dimension_function,
    weighted,
)

FAMILIES = ["A2", "A3", "A4", "A5", "A7", "D4", "D5", "D6", "E6", "E7", "E8"]


def eig_oracle(graph):
    """Spectral radius and Perron vector from a dense symmetric eigensolver."""
    verts = list(graph.vertices)
    a = np.zeros((len(verts), len(verts)))
    for (e, o), m in graph.multiplicity.items():
        i, j = verts.index(e), verts.index(o)
        a[i, j] += m
        a[j, i] += m
    w, v = np.linalg.eigh(a)
    x = np.abs(v[:, -1])
    x /= x[verts.index(graph.basepoint)]
    return w[-1], dict(zip(verts, x))


def test_a2_single_edge():
    g = builtin("A2")
    assert g.modulus == pytest.approx(1.0, abs=1e-12)
    assert g.dim == pytest.approx({"v0": 1.0, "v1": 1.0})


def test_a3_weights():
    g = builtin("A3")
    d, dim = eig_oracle(g)
    assert g.modulus == pytest.approx(d, abs=1e-10)
    assert g.modulus == pytest.approx(math.sqrt(2), abs=1e-10)
    for v in g.vertices:
        assert g.dim[v] == pytest.approx(dim[v], abs=1e-10)
    assert g.dim["v1"] == pytest.approx(math.sqrt(2), abs=1e-10)


def test_e6_modulus():
    g = builtin("E6")
    assert g.modulus == pytest.approx(eig_oracle(g)[0], abs=1e-10)
    assert g.modulus == pytest.approx(2 * math.cos(math.pi / 12), abs=1e-10)
    assert g.modulus == pytest.approx(1.931851653, abs=1e-9)


@pytest.mark.parametrize("name,expected", [("A4", (1 + math.sqrt(5)) / 2), ("D4", math.sqrt(3))])
def test_builtin_moduli(name, expected):
    assert builtin(name).modulus == pytest.approx(expected, abs=1e-9)


def test_d4_is_star():
    g = builtin("D4")
    degrees = sorted(len(g.neighbours(v)) for v in g.vertices)
    assert degrees == [1, 1, 1, 3]


@pytest.mark.parametrize("n", range(2, 10))
def test_a_n_modulus(n):
    assert builtin(f"A{n}").modulus == pytest.approx(2 * math.cos(math.pi / (n + 1)), abs=1e-10)


@pytest.mark.parametrize("name", FAMILIES)
def test_fp_satisfies_dimension_function(name):
    g = builtin(name)
    report = verify_dimension_function(g, 1e-10)
    assert report.passed, report.summary()
    assert g.dim[g.basepoint] == 1.0
    d, dim = eig_oracle(g)
    assert g.modulus == pytest.approx(d, abs=1e-10)
    assert all(abs(g.dim[v] - dim[v]) < 1e-9 for v in g.vertices)


def test_perturbed_dimension_fails_at_neighbours():
    g = builtin("A3")
    dim = dict(g.dim)
    dim["v1"] = 1.5
    bad = WeightedBipartiteGraph(g.even, g.odd, g.multiplicity, g.basepoint, dim, g.modulus)
    report = verify_dimension_function(bad, 1e-9)
    assert not report.passed
    failing = {c.name for c in report.checks if not c.passed}
    assert any("v0" in n for n in failing) and any("v2" in n for n in failing)


def test_unknown_family():
    with pytest.raises(GraphError):
        builtin("B3")
    with pytest.raises(GraphError):
        builtin("E9")


def test_disconnected_rejected():
    with pytest.raises(GraphError, match="disconnected"):
        frobenius_perron(["a", "c"], ["b", "d"], {("a", "b"): 1, ("c", "d"): 1}, "a")


def test_empty_rejected():
    with pytest.raises(GraphError):
        frobenius_perron(["a"], [], {}, "a")


def test_round_trip():
    g = builtin("E6")
    data = save_graph(g)
    assert load_graph(data) == g
    assert json.loads(save_graph(load_graph(data))) == json.loads(data)


def test_load_without_dim_uses_fp():
    raw = json.dumps({"even": ["a", "c"], "odd": ["b"], "edges": [["a", "b", 1], ["c", "b", 1]], "basepoint": "a"})
    g = load_graph(raw)
    assert g.modulus == pytest.approx(math.sqrt(2), abs=1e-10)
    assert g.dim["b"] == pytest.approx(math.sqrt(2), abs=1e-10)


def test_even_even_edge_rejected():
    raw = json.dumps({"even": ["a", "c"], "odd": ["b"], "edges": [["a", "c", 1]], "basepoint": "a"})
    with pytest.raises(GraphError):
        load_graph(raw)


def test_odd_basepoint_rejected():
    raw = json.dumps({"even": ["a"], "odd": ["b"], "edges": [["a", "b", 1]], "basepoint": "b"})
    with pytest.raises(GraphError):
        load_graph(raw)


def test_bad_dim_rejected():
    raw = json.dumps({"even": ["a"], "odd": ["b"], "edges": [["a", "b", 1]], "basepoint": "a", "dim": {"a": 1, "b": 2}})
    with pytest.raises(GraphError):
        load_graph(raw)


def test_multiplicity_two():
    g = weighted(["a"], ["b"], {("a", "b"): 2}, "a")
    assert g.modulus == pytest.approx(2.0, abs=1e-10)
    assert verify_dimension_function(g).passed


def test_dot_mentions_every_vertex():
    g = builtin("D5")
    dot = graph_to_dot(g)
    assert dot.startswith("graph")
    for v in g.vertices:
        assert f'"{v}"' in dot or v in dot


def test_pointed_isomorphism_distinguishes_basepoints():
    g = builtin("A4")
    assert is_pointed_isomorphic(g, g) is not None
    moved = g.with_basepoint("v2")
    assert is_pointed_isomorphic(g, moved) is None


@given(st.permutations(range(6)), st.sampled_from(["E6", "D6", "A6"]))
def test_dim_is_relabeling_equivariant(perm, name):
    g = builtin(name)
    verts = list(g.vertices)
    rename = {v: f"w{perm[i]}" for i, v in enumerate(verts)}
    mult = {(rename[e], rename[o]): m for (e, o), m in g.multiplicity.items()}
    h = weighted([rename[v] for v in reversed(g.even)], [rename[v] for v in g.odd], mult, rename[g.basepoint])
    assert h.modulus == pytest.approx(g.modulus, abs=1e-12)
    for v in verts:
        assert h.dim[rename[v]] == pytest.approx(g.dim[v], abs=1e-10)


@given(st.integers(1, 4), st.integers(1, 4), st.lists(st.integers(0, 2), min_size=16, max_size=16))
def test_random_bipartite_fp(ne, no, counts):
    even = [f"e{i}" for i in range(ne)]
    odd = [f"o{j}" for j in range(no)]
    mult = {(even[i], odd[j]): counts[i * 4 + j] for i in range(ne) for j in range(no)}
    g = nx.Graph([k for k, m in mult.items() if m])
    g.add_nodes_from(even + odd)
    if not nx.is_connected(g):
        with pytest.raises(GraphError):
            weighted(even, odd, mult, "e0")
        return
    graph = weighted(even, odd, mult, "e0")
    assert verify_dimension_function(graph, 1e-9).passed
    assert graph.modulus == pytest.approx(eig_oracle(graph)[0], rel=1e-10)
