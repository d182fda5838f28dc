"""Box spaces of the bipartite graph planar algebra.

The box space of ``2n`` boundary points with shading ``+`` (``-``) is spanned
by loops of length ``2n`` based at even (odd) vertices.  A loop is stored as
a pair of paths ``(gamma, delta)`` with common start and end: it runs out
along ``gamma`` and back along ``delta``.  Multiplication concatenates
loops, so each box space is a multi-matrix algebra whose blocks are indexed
by (start, end) pairs and whose matrix units are the loops themselves.

Box spaces are realized as levels of a path-model tower rooted at every
vertex of one class, with start weights ``dim(s)^2 / Z``.  That tower
supplies the product, the trace, the Jones projections, the right inclusion
and the conditional expectation; left inclusion and left cap are built here.

Normalization: the right cap is ``d * E`` and the left cap uses the weight
``dim(s) / dim(u)`` when removing a first edge ``s -> u``.  Capping after
including on the same side therefore multiplies by ``d``, and a closed circle
evaluates to ``d``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Hashable, Iterable

import numpy as np

from .graph import WeightedBipartiteGraph
from .multimatrix import AlgebraElement, MultiMatrixAlgebra
from .tower import MarkovTower, path_tower

Loop = tuple  # (start, gamma, delta)


class GPAError(ValueError):
    pass


def _sign(shading: int | str) -> int:
    if shading in (1, "+", "plus"):
        return 1
    if shading in (-1, "-", "minus"):
        return -1
    raise GPAError(f"shading must be + or -, got {shading!r}")


def box_dimension(graph: WeightedBipartiteGraph, n: int, shading: int | str = 1) -> int:
    """Number of loops of length ``2n`` based at vertices of the given class."""
    sign = _sign(shading)
    starts = graph.even if sign == 1 else graph.odd
    total = 0
    for s in starts:
        counts = {s: 1}
        for _ in range(n):
            nxt: dict = {}
            for v, c in counts.items():
                for edge in graph.incident(v):
                    w = edge.other(v)
                    nxt[w] = nxt.get(w, 0) + c
            counts = nxt
        total += sum(c * c for c in counts.values())
    return total


class GraphPlanarAlgebra:
    """Box spaces ``G_{n,+}`` and ``G_{n,-}`` for ``n <= depth``."""

    def __init__(self, graph: WeightedBipartiteGraph, depth: int):
        if depth < 1:
            raise GPAError("depth must be at least 1")
        self.graph = graph
        self.depth = depth
        self.modulus = graph.modulus
        self.towers: dict[int, MarkovTower] = {}
        for sign, starts in ((1, graph.even), (-1, graph.odd)):
            z = sum(graph.dim[v] ** 2 for v in starts)
            self.towers[sign] = path_tower(
                graph,
                depth,
                starts=starts,
                start_weights=[graph.dim[v] ** 2 / z for v in starts],
                label=lambda s, t: (s, t),
                name=f"GPA{'+' if sign == 1 else '-'}",
            )
        self._spaces: dict = {}
        self._left: dict = {}

    def space(self, n: int, shading: int | str = 1) -> "LoopSpace":
        sign = _sign(shading)
        if not 0 <= n <= self.depth:
            raise GPAError(f"box space {n} is beyond depth {self.depth}")
        key = (n, sign)
        if key not in self._spaces:
            self._spaces[key] = LoopSpace(self, n, sign)
        return self._spaces[key]

    def _left_map(self, n: int, sign: int) -> list[tuple[int, int, float, np.ndarray]]:
        """Pairs (block of G_{n,sign}, block of G_{n+1,-sign}) joined by prepending one edge.

        Each entry carries the left-cap weight and the positions of the
        prepended paths inside the larger block.
        """
        key = (n, sign)
        if key in self._left:
            return self._left[key]
        small = self.space(n, sign)
        big = self.space(n + 1, -sign)
        dim = self.graph.dim
        out = []
        for b, ((u, t), paths) in enumerate(zip(small.algebra.labels, small.block_paths)):
            for edge in self.graph.incident(u):
                s = edge.other(u)
                tb = big.algebra.index((s, t))
                pos = np.array([big.position[(s, (edge.index,) + p)][1] for p in paths], dtype=int)
                out.append((b, tb, dim[s] / dim[u], pos))
        self._left[key] = out
        return out


class LoopSpace:
    """The box space ``G_{n, shading}`` with its loop basis."""

    def __init__(self, gpa: GraphPlanarAlgebra, n: int, sign: int):
        self.gpa = gpa
        self.graph = gpa.graph
        self.n = n
        self.shading = sign
        tower = gpa.towers[sign]
        self.algebra: MultiMatrixAlgebra = tower.levels[n]
        self.block_paths: list[tuple] = [tuple(ps) for ps in tower.paths[n]]
        # (start, path) -> (block, position)
        self.position: dict = {}
        for b, ((s, _t), ps) in enumerate(zip(self.algebra.labels, self.block_paths)):
            for pos, p in enumerate(ps):
                self.position[(s, p)] = (b, pos)
        order = {v: i for i, v in enumerate(self.graph.vertices)}
        loops = []
        for b, ((s, _t), ps) in enumerate(zip(self.algebra.labels, self.block_paths)):
            for r, g in enumerate(ps):
                for c, h in enumerate(ps):
                    loops.append(((order[s], g, h), (s, g, h), (b, r, c)))
        loops.sort(key=lambda item: item[0])
        self.basis: list[Loop] = [item[1] for item in loops]
        self._coords = [item[2] for item in loops]
        self._loop_index = {loop: i for i, loop in enumerate(self.basis)}

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def label(self) -> str:
        return f"G_{{{self.n},{'+' if self.shading == 1 else '-'}}}"

    def element(self, matrix: AlgebraElement) -> "GPAElement":
        if matrix.algebra is not self.algebra:
            raise GPAError("element does not belong to this box space")
        return GPAElement(self, matrix)

    def zero(self) -> "GPAElement":
        return GPAElement(self, self.algebra.zero())

    def one(self) -> "GPAElement":
        return GPAElement(self, self.algebra.one())

    def indicator(self, loop: Loop) -> "GPAElement":
        b, r, c = self._coords[self._loop_index[tuple(loop)]]
        return GPAElement(self, self.algebra.matrix_unit(b, r, c))

    def from_coefficients(self, coeffs: Iterable[complex]) -> "GPAElement":
        coeffs = np.asarray(list(coeffs))
        if coeffs.shape != (self.dim,):
            raise GPAError(f"expected {self.dim} coefficients")
        x = self.algebra.zero(dtype=np.result_type(coeffs, float))
        for (b, r, c), v in zip(self._coords, coeffs):
            x.blocks[b][r, c] = v
        return GPAElement(self, x)

    def random(self, rng: np.random.Generator, real: bool = False) -> "GPAElement":
        return GPAElement(self, self.algebra.random(rng, real=real))

    def loop_vertices(self, loop: Loop) -> list:
        """Vertices visited by ``loop`` from its base point and back."""
        s, g, h = loop
        edges = self.graph.edges
        out = [s]
        for e in g:
            out.append(edges[e].other(out[-1]))
        for e in reversed(h):
            out.append(edges[e].other(out[-1]))
        return out

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "shading": "+" if self.shading == 1 else "-",
            "dim": self.dim,
            "loops": [
                {"vertices": [str(v) for v in self.loop_vertices(l)], "out": list(l[1]), "back": list(l[2])}
                for l in self.basis
            ],
        }

    def __repr__(self) -> str:
        return f"LoopSpace({self.label}, dim={self.dim})"


@dataclass
class GPAElement:
    space: LoopSpace
    matrix: AlgebraElement

    @property
    def coefficients(self) -> np.ndarray:
        vals = [self.matrix.blocks[b][r, c] for b, r, c in self.space._coords]
        return np.array(vals)

    def _check(self, other: "GPAElement") -> None:
        if other.space is not self.space:
            raise GPAError(f"parent mismatch: {self.space.label} vs {other.space.label}")

    def __add__(self, other: "GPAElement") -> "GPAElement":
        self._check(other)
        return GPAElement(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "GPAElement") -> "GPAElement":
        self._check(other)
        return GPAElement(self.space, self.matrix - other.matrix)

    def __neg__(self) -> "GPAElement":
        return GPAElement(self.space, -self.matrix)

    def __mul__(self, c: complex) -> "GPAElement":
        return GPAElement(self.space, self.matrix * c)

    __rmul__ = __mul__

    def __matmul__(self, other: "GPAElement") -> "GPAElement":
        return gpa_multiply(self, other)

    def adjoint(self) -> "GPAElement":
        return gpa_adjoint(self)

    def max_abs(self) -> float:
        return self.matrix.max_abs()

    def dist(self, other: "GPAElement") -> float:
        self._check(other)
        return self.matrix.dist(other.matrix)

    def to_json(self) -> dict:
        out = {"space": self.space.label, "coefficients": []}
        for loop, v in zip(self.space.basis, self.coefficients):
            if v != 0:
                out["coefficients"].append(
                    {"loop": [str(x) for x in self.space.loop_vertices(loop)], "re": float(np.real(v)), "im": float(np.imag(v))}
                )
        return out


def gpa_multiply(x: GPAElement, y: GPAElement) -> GPAElement:
    x._check(y)
    return GPAElement(x.space, x.matrix @ y.matrix)


def gpa_adjoint(x: GPAElement) -> GPAElement:
    return GPAElement(x.space, x.matrix.adjoint())


def gpa_jones_projection(gpa: GraphPlanarAlgebra, n: int, shading: int | str = 1) -> GPAElement:
    """``e_n`` in ``G_{n+1}``: supported on loops whose paths backtrack at step ``n``."""
    sign = _sign(shading)
    tower = gpa.towers[sign]
    if n not in tower.jones:
        raise GPAError(f"e_{n} needs depth {n + 1}, have {gpa.depth}")
    return GPAElement(gpa.space(n + 1, sign), tower.jones[n])


def gpa_trace(x: GPAElement) -> complex:
    """Normalized trace: ``d^-n`` times the closure paired with ``dim(s)^2 / Z``."""
    return x.matrix.trace()


def gpa_include_right(x: GPAElement) -> GPAElement:
    sp = x.space
    tower = sp.gpa.towers[sp.shading]
    return GPAElement(sp.gpa.space(sp.n + 1, sp.shading), tower.include(x.matrix, sp.n + 1))


def gpa_expect(x: GPAElement) -> GPAElement:
    """Trace-preserving conditional expectation ``G_{n+1} -> G_n`` (same shading)."""
    sp = x.space
    if sp.n == 0:
        raise GPAError("cannot cap a zero-box element")
    tower = sp.gpa.towers[sp.shading]
    return GPAElement(sp.gpa.space(sp.n - 1, sp.shading), tower.expect(x.matrix, sp.n - 1))


def gpa_cap_right(x: GPAElement) -> GPAElement:
    """Join the last two boundary points: ``d * E``."""
    return gpa_expect(x) * x.space.gpa.modulus


def gpa_include_left(x: GPAElement) -> GPAElement:
    """Add a strand on the left; the shading flips."""
    sp = x.space
    gpa = sp.gpa
    big = gpa.space(sp.n + 1, -sp.shading)
    dtype = np.result_type(*x.matrix.blocks, float)
    out = big.algebra.zero(dtype=dtype)
    for b, tb, _w, pos in gpa._left_map(sp.n, sp.shading):
        out.blocks[tb][np.ix_(pos, pos)] += x.matrix.blocks[b]
    return GPAElement(big, out)


def gpa_cap_left(x: GPAElement) -> GPAElement:
    """Join the first two boundary points; the shading flips."""
    sp = x.space
    if sp.n == 0:
        raise GPAError("cannot cap a zero-box element")
    gpa = sp.gpa
    small = gpa.space(sp.n - 1, -sp.shading)
    dtype = np.result_type(*x.matrix.blocks, float)
    out = small.algebra.zero(dtype=dtype)
    for b, tb, w, pos in gpa._left_map(sp.n - 1, -sp.shading):
        out.blocks[b] += w * x.matrix.blocks[tb][np.ix_(pos, pos)]
    return GPAElement(small, out)


def gpa_closure(x: GPAElement, side: str = "right") -> dict[Hashable, complex]:
    """Cap all strands on one side; returns the resulting function on vertices."""
    cap = gpa_cap_right if side == "right" else gpa_cap_left
    while x.space.n:
        x = cap(x)
    return {lab[0]: complex(blk[0, 0]) for lab, blk in zip(x.space.algebra.labels, x.matrix.blocks)}


def gpa_as_markov_tower(graph: WeightedBipartiteGraph, depth: int, shading: int | str = 1) -> MarkovTower:
    """``(G_{n,+}, tr_n, e_{n+1})`` as a tower value.  Not connected unless one vertex has the shading."""
    if depth < 2:
        raise GPAError("depth must be at least 2")
    return GraphPlanarAlgebra(graph, depth).towers[_sign(shading)]


def dump_basis(gpa: GraphPlanarAlgebra, n: int, shading: int | str = 1) -> str:
    return json.dumps(gpa.space(n, shading).to_json(), indent=2)
