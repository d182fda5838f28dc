"""Pointed weighted bipartite graphs.

Vertices are split into an even and an odd class; edges run between the
classes and may carry a multiplicity.  A weighting is a modulus ``d`` together
with a positive vertex function ``dim`` satisfying

    d * dim(v) = sum over neighbours w of mult(v, w) * dim(w)

with ``dim(basepoint) = 1``.  For a finite connected graph the only such
weighting is the Perron-Frobenius one.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .report import Report

Vertex = Hashable

DEFAULT_TOLERANCE = 1e-9
FP_STOP = 1e-13


class GraphError(ValueError):
    """Raised for malformed graphs or graph JSON."""


@dataclass(frozen=True)
class Edge:
    """A single edge; parallel edges are distinguished by ``copy``."""

    index: int
    even: Vertex
    odd: Vertex
    copy: int

    def other(self, v: Vertex) -> Vertex:
        return self.odd if v == self.even else self.even


@dataclass(frozen=True, eq=False)
class WeightedBipartiteGraph:
    even: tuple
    odd: tuple
    multiplicity: Mapping[tuple, int]
    basepoint: Vertex
    dim: Mapping[Vertex, float]
    modulus: float
    _edges: tuple = field(init=False, repr=False)
    _incident: dict = field(init=False, repr=False)

    def __post_init__(self) -> None:
        _check_shape(self.even, self.odd, self.multiplicity, self.basepoint)
        for v in self.vertices:
            if v not in self.dim:
                raise GraphError(f"missing dim for vertex {v!r}")
            if not self.dim[v] > 0:
                raise GraphError(f"dim({v!r}) must be positive, got {self.dim[v]}")
        if not self.modulus > 0:
            raise GraphError("modulus must be positive")
        edges = []
        incident: dict = {v: [] for v in self.vertices}
        for (e, o), m in self.multiplicity.items():
            for c in range(m):
                edge = Edge(len(edges), e, o, c)
                edges.append(edge)
                incident[e].append(edge)
                incident[o].append(edge)
        object.__setattr__(self, "_edges", tuple(edges))
        object.__setattr__(self, "_incident", incident)

    @property
    def vertices(self) -> tuple:
        return tuple(self.even) + tuple(self.odd)

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    def incident(self, v: Vertex) -> list[Edge]:
        """Edges at ``v`` in global edge order."""
        return self._incident[v]

    def is_even(self, v: Vertex) -> bool:
        return v in self.even

    def mult(self, v: Vertex, w: Vertex) -> int:
        if (v, w) in self.multiplicity:
            return self.multiplicity[(v, w)]
        return self.multiplicity.get((w, v), 0)

    def neighbours(self, v: Vertex) -> list[Vertex]:
        seen = []
        for edge in self._incident[v]:
            w = edge.other(v)
            if w not in seen:
                seen.append(w)
        return seen

    def adjacency(self) -> np.ndarray:
        """Symmetric adjacency matrix in the order ``vertices``."""
        return _adjacency(self.even, self.odd, self.multiplicity)

    def bipartite_adjacency(self) -> np.ndarray:
        """The even-by-odd multiplicity matrix."""
        lam = np.zeros((len(self.even), len(self.odd)), dtype=int)
        ei = {v: i for i, v in enumerate(self.even)}
        oi = {v: i for i, v in enumerate(self.odd)}
        for (e, o), m in self.multiplicity.items():
            lam[ei[e], oi[o]] += m
        return lam

    def dim_vector(self) -> np.ndarray:
        return np.array([self.dim[v] for v in self.vertices], dtype=float)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        for v in self.vertices:
            g.add_node(v, dim=float(self.dim[v]), even=v in self.even, base=v == self.basepoint)
        for (e, o), m in self.multiplicity.items():
            g.add_edge(e, o, mult=m)
        return g

    def distances(self) -> dict:
        return nx.single_source_shortest_path_length(self.to_networkx(), self.basepoint)

    def diameter(self) -> int:
        return nx.diameter(self.to_networkx())

    def eccentricity(self, v: Vertex | None = None) -> int:
        v = self.basepoint if v is None else v
        return nx.eccentricity(self.to_networkx(), v)

    def with_basepoint(self, v: Vertex) -> "WeightedBipartiteGraph":
        """Same graph pointed at ``v``; classes swap if ``v`` is odd."""
        if v not in self.vertices:
            raise GraphError(f"unknown vertex {v!r}")
        if v in self.even:
            even, odd, mult = self.even, self.odd, dict(self.multiplicity)
        else:
            even, odd = self.odd, self.even
            mult = {(o, e): m for (e, o), m in self.multiplicity.items()}
        scale = self.dim[v]
        dim = {w: self.dim[w] / scale for w in self.vertices}
        return WeightedBipartiteGraph(even, odd, mult, v, dim, self.modulus)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedBipartiteGraph):
            return NotImplemented
        return (
            self.even == other.even
            and self.odd == other.odd
            and dict(self.multiplicity) == dict(other.multiplicity)
            and self.basepoint == other.basepoint
            and dict(self.dim) == dict(other.dim)
            and self.modulus == other.modulus
        )

    def __repr__(self) -> str:
        return (
            f"WeightedBipartiteGraph(even={list(self.even)}, odd={list(self.odd)}, "
            f"basepoint={self.basepoint!r}, d={self.modulus:.12g})"
        )


def _check_shape(even: Sequence, odd: Sequence, mult: Mapping, basepoint: Vertex) -> None:
    if len(set(even)) != len(even) or len(set(odd)) != len(odd):
        raise GraphError("vertex ids must be unique")
    if set(even) & set(odd):
        raise GraphError(f"vertex ids shared between classes: {sorted(map(str, set(even) & set(odd)))}")
    if not even or not odd:
        raise GraphError("graph has no edges")
    if basepoint not in even:
        raise GraphError(f"basepoint {basepoint!r} must be an even vertex")
    even_set, odd_set = set(even), set(odd)
    total = 0
    for key, m in mult.items():
        e, o = key
        if e not in even_set or o not in odd_set:
            raise GraphError(f"edge {e!r}-{o!r} does not join an even vertex to an odd vertex")
        if int(m) != m or m < 0:
            raise GraphError(f"edge multiplicity must be a non-negative integer, got {m!r}")
        total += m
    if total == 0:
        raise GraphError("graph has no edges")
    g = nx.Graph()
    g.add_nodes_from(list(even) + list(odd))
    g.add_edges_from(k for k, m in mult.items() if m > 0)
    comps = list(nx.connected_components(g))
    if len(comps) > 1:
        stray = next(c for c in comps if basepoint not in c)
        raise GraphError(f"graph is disconnected; component without basepoint: {sorted(map(str, stray))}")


def _adjacency(even: Sequence, odd: Sequence, mult: Mapping) -> np.ndarray:
    verts = list(even) + list(odd)
    idx = {v: i for i, v in enumerate(verts)}
    a = np.zeros((len(verts), len(verts)))
    for (e, o), m in mult.items():
        a[idx[e], idx[o]] += m
        a[idx[o], idx[e]] += m
    return a


def frobenius_perron(
    even: Sequence,
    odd: Sequence,
    multiplicity: Mapping[tuple, int],
    basepoint: Vertex,
    max_iter: int = 1_000_000,
) -> tuple[float, dict]:
    """Modulus and Perron weights of a connected bipartite multigraph.

    Power iteration on ``A + I`` (the shift removes the ``-d`` eigenvalue that
    every bipartite graph has) started from the all-ones vector.  Iteration
    stops once the eigen-residual ``|A x - q x|`` drops below ``1e-13 |x|``,
    where ``q`` is the Rayleigh quotient.
    """
    _check_shape(even, odd, multiplicity, basepoint)
    a = _adjacency(even, odd, multiplicity)
    x = np.ones(a.shape[0])
    x /= np.linalg.norm(x)
    q = 0.0
    for _ in range(max_iter):
        ax = a @ x
        q = float(x @ ax)
        if np.linalg.norm(ax - q * x) <= FP_STOP * max(q, 1.0):
            break
        x = ax + x
        x /= np.linalg.norm(x)
    else:
        raise GraphError("power iteration did not converge")
    verts = list(even) + list(odd)
    base = x[verts.index(basepoint)]
    dim = {v: float(x[i] / base) for i, v in enumerate(verts)}
    return q, dim


def weighted(
    even: Sequence,
    odd: Sequence,
    multiplicity: Mapping[tuple, int] | Iterable[tuple],
    basepoint: Vertex,
) -> WeightedBipartiteGraph:
    """Build a graph and attach its Frobenius-Perron weighting."""
    mult = _as_mult(multiplicity)
    d, dim = frobenius_perron(even, odd, mult, basepoint)
    return WeightedBipartiteGraph(tuple(even), tuple(odd), mult, basepoint, dim, d)


def _as_mult(multiplicity: Mapping | Iterable) -> dict:
    if isinstance(multiplicity, Mapping):
        return {tuple(k): int(m) for k, m in multiplicity.items()}
    mult: dict = {}
    for item in multiplicity:
        if len(item) == 2:
            e, o, m = item[0], item[1], 1
        else:
            e, o, m = item
        mult[(e, o)] = mult.get((e, o), 0) + int(m)
    return mult


def verify_dimension_function(
    graph: WeightedBipartiteGraph, tolerance: float = DEFAULT_TOLERANCE
) -> Report:
    """Per-vertex residuals of ``d dim(v) - sum mult(v,w) dim(w)``."""
    report = Report("dimension function")
    d = graph.modulus
    base = abs(graph.dim[graph.basepoint] - 1.0)
    report.add(f"dim({graph.basepoint})=1", "FP", base, tolerance)
    for v in graph.vertices:
        total = sum(graph.dim[e.other(v)] for e in graph.incident(v))
        report.add(f"vertex {v}", "FP", abs(d * graph.dim[v] - total), tolerance)
    return report


# ---------------------------------------------------------------- builtins

def _tree(arms: Sequence[int]) -> tuple[list, list, dict, str]:
    """Star-shaped tree; arm lengths exclude the centre.

    Vertices are numbered along the first (longest) arm from its tip toward
    the centre, then the centre, then the remaining arms outward.
    """
    names: list[str] = []
    edges: list[tuple[int, int]] = []
    first = arms[0]
    for i in range(first):
        names.append(f"v{i}")
        if i:
            edges.append((i - 1, i))
    centre = len(names)
    names.append(f"v{centre}")
    if first:
        edges.append((centre - 1, centre))
    for length in arms[1:]:
        prev = centre
        for _ in range(length):
            cur = len(names)
            names.append(f"v{cur}")
            edges.append((prev, cur))
            prev = cur
    g = nx.Graph(edges)
    g.add_nodes_from(range(len(names)))
    dist = nx.single_source_shortest_path_length(g, 0)
    even = [names[i] for i in range(len(names)) if dist[i] % 2 == 0]
    odd = [names[i] for i in range(len(names)) if dist[i] % 2 == 1]
    mult = {}
    for a, b in edges:
        e, o = (a, b) if dist[a] % 2 == 0 else (b, a)
        mult[(names[e], names[o])] = 1
    return even, odd, mult, names[0]


def builtin(family: str, n: int | None = None) -> WeightedBipartiteGraph:
    """Dynkin-diagram graphs ``A_n`` (n>=2), ``D_n`` (n>=4), ``E6``, ``E7``, ``E8``.

    Vertices are named ``v0, v1, ...``; ``v0`` is the tip of the longest arm
    and is the basepoint.  ``A_n`` is the path ``v0 - ... - v(n-1)``;
    ``D_n`` is the path ``v0 - ... - v(n-3)`` with two leaves ``v(n-2)``,
    ``v(n-1)`` attached at ``v(n-3)``; ``E_n`` has arms of lengths
    ``n-4, 2, 1`` around the centre.
    """
    letter, n = _parse_family(family, n)
    if letter == "A":
        if n < 2:
            raise GraphError("A_n needs n >= 2")
        even, odd, mult, base = _tree([n - 1])
    elif letter == "D":
        if n < 4:
            raise GraphError("D_n needs n >= 4")
        even, odd, mult, base = _tree([n - 3, 1, 1])
    elif letter == "E":
        if n not in (6, 7, 8):
            raise GraphError("E_n exists for n in 6, 7, 8")
        even, odd, mult, base = _tree([n - 4, 2, 1])
    else:
        raise GraphError(f"unknown graph family {family!r}")
    return weighted(even, odd, mult, base)


def _parse_family(family: str, n: int | None) -> tuple[str, int]:
    if n is not None:
        return family.strip().upper(), int(n)
    m = re.fullmatch(r"\s*([A-Za-z])[_\s]*(\d+)\s*", family)
    if not m:
        raise GraphError(f"unknown graph family {family!r}")
    return m.group(1).upper(), int(m.group(2))


# ----------------------------------------------------------- serialization

def graph_to_dict(graph: WeightedBipartiteGraph) -> dict[str, Any]:
    return {
        "even": list(graph.even),
        "odd": list(graph.odd),
        "edges": [[e, o, m] for (e, o), m in graph.multiplicity.items()],
        "basepoint": graph.basepoint,
        "dim": {str(v): float(graph.dim[v]) for v in graph.vertices},
        "modulus": float(graph.modulus),
    }


def save_graph(graph: WeightedBipartiteGraph) -> bytes:
    return json.dumps(graph_to_dict(graph), indent=2).encode("utf-8")


def graph_from_dict(data: Mapping[str, Any], tolerance: float = DEFAULT_TOLERANCE) -> WeightedBipartiteGraph:
    for key in ("even", "odd", "edges", "basepoint"):
        if key not in data:
            raise GraphError(f"graph JSON missing key {key!r}")
    unknown = set(data) - {"even", "odd", "edges", "basepoint", "dim", "modulus"}
    if unknown:
        raise GraphError(f"unknown graph JSON keys: {sorted(unknown)}")
    even = tuple(_scalar_id(v) for v in data["even"])
    odd = tuple(_scalar_id(v) for v in data["odd"])
    mult: dict = {}
    for item in data["edges"]:
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            raise GraphError(f"edge entries must be [even, odd, mult], got {item!r}")
        e, o, m = item
        if e in odd and o in even:
            raise GraphError(f"edge {e!r}-{o!r} listed odd-first; edges are [even, odd, mult]")
        if not isinstance(m, int) or isinstance(m, bool):
            raise GraphError(f"edge multiplicity must be an integer, got {m!r}")
        mult[(e, o)] = mult.get((e, o), 0) + m
    basepoint = _scalar_id(data["basepoint"])
    if "dim" not in data:
        d, dim = frobenius_perron(even, odd, mult, basepoint)
        if "modulus" in data and abs(float(data["modulus"]) - d) > tolerance * d:
            raise GraphError(f"modulus {data['modulus']} disagrees with spectral radius {d}")
        return WeightedBipartiteGraph(even, odd, mult, basepoint, dim, d)
    raw = data["dim"]
    if not isinstance(raw, Mapping):
        raise GraphError("dim must be an object keyed by vertex id")
    dim = {}
    for v in even + odd:
        if str(v) not in raw:
            raise GraphError(f"dim missing vertex {v!r}")
        dim[v] = float(raw[str(v)])
    if "modulus" in data:
        d = float(data["modulus"])
    else:
        d = dim_ratio_modulus(even, odd, mult, dim)
    graph = WeightedBipartiteGraph(even, odd, mult, basepoint, dim, d)
    report = verify_dimension_function(graph, tolerance)
    bad = report.first_failure()
    if bad is not None:
        raise GraphError(f"dim is not a dimension function: {bad.name} residual {bad.residual:.3e}")
    return graph


def dim_ratio_modulus(even: Sequence, odd: Sequence, mult: Mapping, dim: Mapping) -> float:
    """Modulus read off from the eigen-equation at the first even vertex."""
    v = even[0]
    total = sum(m * dim[o] for (e, o), m in mult.items() if e == v)
    return float(total / dim[v])


def _scalar_id(v: Any) -> Vertex:
    if isinstance(v, (str, int)) and not isinstance(v, bool):
        return v
    raise GraphError(f"vertex ids must be strings or integers, got {v!r}")


def load_graph(data: bytes | str, tolerance: float = DEFAULT_TOLERANCE) -> WeightedBipartiteGraph:
    try:
        parsed = json.loads(data)
    except json.JSONDecodeError as exc:
        raise GraphError(f"invalid JSON: {exc}") from exc
    if not isinstance(parsed, Mapping):
        raise GraphError("graph JSON must be an object")
    return graph_from_dict(parsed, tolerance)


def graph_to_dot(graph: WeightedBipartiteGraph, name: str = "G") -> str:
    lines = [f"graph {name} {{"]
    for v in graph.vertices:
        shape = "box" if v in graph.even else "ellipse"
        extra = ", peripheries=2" if v == graph.basepoint else ""
        lines.append(f'  "{v}" [label="{v}\\ndim={graph.dim[v]:.6g}", shape={shape}{extra}];')
    for (e, o), m in graph.multiplicity.items():
        label = f' [label="{m}"]' if m > 1 else ""
        lines.append(f'  "{e}" -- "{o}"{label};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def is_pointed_isomorphic(
    g: WeightedBipartiteGraph,
    h: WeightedBipartiteGraph,
    tolerance: float = DEFAULT_TOLERANCE,
) -> dict | None:
    """A basepoint- and multiplicity-preserving isomorphism with matching dims.

    Returns the vertex map ``g -> h`` or ``None``.
    """
    if abs(g.modulus - h.modulus) > tolerance * max(1.0, g.modulus):
        return None
    gg, hh = g.to_networkx(), h.to_networkx()

    def node_match(a: dict, b: dict) -> bool:
        return a["base"] == b["base"] and a["even"] == b["even"] and abs(a["dim"] - b["dim"]) <= tolerance * max(1.0, a["dim"])

    def edge_match(a: dict, b: dict) -> bool:
        return a["mult"] == b["mult"]

    matcher = nx.algorithms.isomorphism.GraphMatcher(gg, hh, node_match=node_match, edge_match=edge_match)
    for mapping in matcher.isomorphisms_iter():
        return dict(mapping)
    return None
