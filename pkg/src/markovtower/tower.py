"""Markov towers: construction in the path model, verification, principal graphs.

A tower is a chain ``M_0 c M_1 c ... c M_N`` of multi-matrix algebras with
compatible traces and projections ``e_n`` in ``M_{n+1}`` (``1 <= n < N``).

The path model builds ``M_k`` from paths of length ``k`` in a pointed weighted
bipartite graph: one block per endpoint, one basis vector per path.  Within a
block, paths are ordered by their last edge's source block and then by the
position of their prefix, so that ``M_k`` sits in ``M_{k+1}`` block-diagonally.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import DEFAULT_TOLERANCE, WeightedBipartiteGraph, verify_dimension_function
from .multimatrix import (
    RANK_TOLERANCE,
    AlgebraElement,
    MultiMatrixAlgebra,
    Slot,
    UnitalInclusion,
    numerical_rank,
)
from .report import Report

Path = tuple[int, ...]


class TowerError(ValueError):
    pass


class TruncationWarning(UserWarning):
    """The built depth is too small to certify a stabilization claim."""


@dataclass(frozen=True)
class PathBasis:
    """Ordered paths of a fixed length, grouped by block."""

    graph: WeightedBipartiteGraph
    length: int
    blocks: tuple[tuple[Hashable, tuple[Path, ...]], ...]

    @property
    def paths(self) -> list[Path]:
        return [p for _, ps in self.blocks for p in ps]

    def block_sizes(self) -> dict:
        return {lab: len(ps) for lab, ps in self.blocks}


class MarkovTower:
    """Levels, inclusions and Jones projections of a (possibly truncated) tower."""

    def __init__(
        self,
        levels: Sequence[MultiMatrixAlgebra],
        inclusions: Sequence[UnitalInclusion],
        jones: dict[int, AlgebraElement],
        modulus: float,
        graph: WeightedBipartiteGraph | None = None,
        paths: list | None = None,
        name: str = "tower",
    ) -> None:
        if len(inclusions) != len(levels) - 1:
            raise TowerError("need one inclusion per consecutive pair of levels")
        for k, incl in enumerate(inclusions):
            if incl.lower is not levels[k] or incl.upper is not levels[k + 1]:
                raise TowerError(f"inclusion {k} does not join levels {k} and {k + 1}")
        for n, e in jones.items():
            if not 1 <= n <= len(levels) - 2 or e.algebra is not levels[n + 1]:
                raise TowerError(f"e_{n} must lie in level {n + 1}")
        self.levels = list(levels)
        self.inclusions = list(inclusions)
        self.jones = dict(jones)
        self.modulus = float(modulus)
        self.graph = graph
        self.paths = paths
        self.name = name
        self._level_of = {id(a): k for k, a in enumerate(self.levels)}
        self._dense_cache: dict = {}
        self._sparse_cache: dict = {}

    # -- basic navigation -----------------------------------------------
    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def level_of(self, x: AlgebraElement) -> int:
        try:
            return self._level_of[id(x.algebra)]
        except KeyError:
            raise TowerError("element does not belong to this tower") from None

    def include(self, x: AlgebraElement, m: int) -> AlgebraElement:
        k = self.level_of(x)
        if m < k:
            raise TowerError(f"cannot include level {k} into lower level {m}")
        for i in range(k, m):
            x = self.inclusions[i].embed(x)
        return x

    def expect(self, y: AlgebraElement, m: int) -> AlgebraElement:
        k = self.level_of(y)
        if m > k:
            raise TowerError(f"cannot take expectation from level {k} onto higher level {m}")
        for i in range(k - 1, m - 1, -1):
            y = self.inclusions[i].expect(y)
        return y

    def inclusion(self, k: int, m: int) -> UnitalInclusion:
        incl = self.inclusions[k]
        for i in range(k + 1, m):
            incl = incl.compose(self.inclusions[i])
        return incl

    def e(self, n: int, level: int | None = None) -> AlgebraElement:
        """``e_n`` included into ``level`` (default: its home level ``n+1``)."""
        if n not in self.jones:
            raise TowerError(f"e_{n} is not available at depth {self.depth}")
        level = n + 1 if level is None else level
        key = (n, level)
        if key not in self._dense_cache:
            self._dense_cache[key] = self.include(self.jones[n], level)
        return self._dense_cache[key]

    def sparse_e(self, n: int, level: int) -> list[sp.csr_matrix]:
        """Blocks of ``e_n`` inside ``level`` as sparse matrices."""
        key = (n, level)
        if key in self._sparse_cache:
            return self._sparse_cache[key]
        if level == n + 1:
            blocks = [sp.csr_matrix(b) for b in self.jones[n].blocks]
        else:
            lower = self.sparse_e(n, level - 1)
            blocks = []
            for slots in self.inclusions[level - 1].layout:
                if len(slots) == 1:
                    blocks.append(lower[slots[0].lower])
                else:
                    blocks.append(sp.block_diag([lower[s.lower] for s in slots], format="csr"))
        self._sparse_cache[key] = blocks
        return blocks

    def block_sizes(self) -> list[list[int]]:
        return [list(a.sizes) for a in self.levels]

    def level_dims(self) -> list[int]:
        return [a.dim for a in self.levels]

    def bratteli(self) -> list[np.ndarray]:
        return [incl.inclusion_matrix for incl in self.inclusions]

    def path_basis(self, k: int) -> PathBasis:
        if self.paths is None or self.graph is None:
            raise TowerError("tower carries no path bookkeeping")
        return PathBasis(
            self.graph, k, tuple((lab, tuple(ps)) for lab, ps in zip(self.levels[k].labels, self.paths[k]))
        )

    def is_connected(self) -> bool:
        return self.levels[0].dim == 1

    def __repr__(self) -> str:
        return f"MarkovTower({self.name}, depth={self.depth}, d={self.modulus:.10g})"


# ------------------------------------------------------------ construction

def path_tower(
    graph: WeightedBipartiteGraph,
    depth: int,
    starts: Sequence[Hashable] | None = None,
    start_weights: Sequence[float] | None = None,
    label: Callable[[Hashable, Hashable], Hashable] | None = None,
    name: str | None = None,
) -> MarkovTower:
    """Direct sum over ``starts`` of the path-model towers rooted at each start.

    The block of paths from ``s`` to ``t`` of length ``k`` has trace weight
    ``start_weight(s) * d^-k * dim(t) / dim(s)``.
    """
    if depth < 1:
        raise TowerError("depth must be at least 1")
    starts = [graph.basepoint] if starts is None else list(starts)
    if start_weights is None:
        start_weights = [1.0 / len(starts)] * len(starts)
    if label is None:
        label = (lambda s, t: t) if len(starts) == 1 else (lambda s, t: (s, t))
    d = graph.modulus
    dim = graph.dim
    order = {v: i for i, v in enumerate(graph.vertices)}

    # blocks at each level: list of (start index, end vertex, [paths])
    current = [(si, s, [()]) for si, s in enumerate(starts)]
    all_blocks = [current]
    layouts = []
    for _ in range(depth):
        ends: dict = {}
        for b, (si, u, ps) in enumerate(current):
            for edge in graph.incident(u):
                t = edge.other(u)
                ends.setdefault((si, t), []).append((b, edge.index))
        keys = sorted(ends, key=lambda key: (key[0], order[key[1]]))
        nxt, layout = [], []
        for si, t in keys:
            slots, paths, off = [], [], 0
            for b, eidx in sorted(ends[(si, t)]):
                slots.append(Slot(b, off, eidx))
                paths.extend(p + (eidx,) for p in current[b][2])
                off += len(current[b][2])
            nxt.append((si, t, paths))
            layout.append(slots)
        all_blocks.append(nxt)
        layouts.append(layout)
        current = nxt

    levels = []
    for k, blocks in enumerate(all_blocks):
        labels = [label(starts[si], t) for si, t, _ in blocks]
        sizes = [len(ps) for _, _, ps in blocks]
        weights = [
            start_weights[si] * d ** (-k) * dim[t] / dim[starts[si]] for si, t, _ in blocks
        ]
        levels.append(MultiMatrixAlgebra(labels, sizes, weights))
    inclusions = [UnitalInclusion(levels[k], levels[k + 1], layouts[k]) for k in range(depth)]

    jones = {}
    for n in range(1, depth):
        jones[n] = _path_jones(graph, all_blocks, levels[n + 1], n, starts)
    paths = [[ps for _, _, ps in blocks] for blocks in all_blocks]
    return MarkovTower(levels, inclusions, jones, d, graph, paths, name or "path tower")


def _path_jones(
    graph: WeightedBipartiteGraph,
    all_blocks: list,
    algebra: MultiMatrixAlgebra,
    n: int,
    starts: Sequence[Hashable],
) -> AlgebraElement:
    """``e_n`` on paths of length ``n+1`` that backtrack over their last two steps."""
    d = graph.modulus
    edges = graph.edges
    e = algebra.zero()
    for b, (si, x, paths) in enumerate(all_blocks[n + 1]):
        groups: dict[Path, list[tuple[int, float]]] = {}
        for pos, p in enumerate(paths):
            if p[-1] != p[-2]:
                continue
            prefix = p[:-2]
            # vertex reached after the first n steps
            mid = edges[p[-1]].other(x)
            groups.setdefault(prefix, []).append((pos, np.sqrt(graph.dim[mid])))
        scale = 1.0 / (d * graph.dim[x])
        blk = e.blocks[b]
        for members in groups.values():
            idx = np.array([m[0] for m in members])
            vec = np.array([m[1] for m in members])
            blk[np.ix_(idx, idx)] = scale * np.outer(vec, vec)
    return e


def build_tower(graph: WeightedBipartiteGraph, depth: int, tolerance: float = DEFAULT_TOLERANCE) -> MarkovTower:
    """The connected path-model tower of ``graph`` up to level ``depth``."""
    if depth < 2:
        raise TowerError("depth must be at least 2")
    bad = verify_dimension_function(graph, tolerance).first_failure()
    if bad is not None:
        raise TowerError(f"graph weighting is not a dimension function ({bad.name})")
    return path_tower(graph, depth, name=f"path tower at {graph.basepoint}")


# ------------------------------------------------------------ verification

def _algebra_generators(tower: MarkovTower, m: int) -> list[AlgebraElement]:
    """A set generating ``M_m`` as an algebra, expressed inside ``M_m``."""
    gens: list[AlgebraElement] = []
    base = tower.levels[0]
    for b, s in enumerate(base.sizes):
        gens.append(base.block_unit(b))
        for r in range(1, s):
            gens.append(base.matrix_unit(b, 0, r))
            gens.append(base.matrix_unit(b, r, 0))
    gens = [tower.include(g, m) for g in gens]
    for k in range(m):
        for u in tower.inclusions[k].copy_pair_units():
            gens.append(tower.include(u, m))
    return gens


def _commutation_residual(tower: MarkovTower, n: int) -> float:
    """``max |[e_n, x]|`` over algebra generators ``x`` of ``M_{n-1}``."""
    key = ("commutation", n)
    if key in tower._dense_cache:
        return tower._dense_cache[key]
    e = tower.e(n)
    worst = 0.0
    for g in _algebra_generators(tower, n - 1):
        gi = tower.include(g, n + 1)
        worst = max(worst, (e @ gi - gi @ e).max_abs())
    tower._dense_cache[key] = worst
    return worst


def verify_markov_axioms(
    tower: MarkovTower,
    tolerance: float = DEFAULT_TOLERANCE,
    samples: int = 2,
    seed: int = 0,
) -> Report:
    """Check the Jones relations, the implementing, index and pull-down axioms."""
    report = Report(f"Markov axioms: {tower.name}")
    rng = np.random.default_rng(seed)
    d2 = tower.modulus ** -2
    ns = sorted(tower.jones)
    for k, incl in enumerate(tower.inclusions):
        report.add(f"trace compatibility M{k}<M{k + 1}", "M", incl.trace_compatibility(), tolerance)
    for k, a in enumerate(tower.levels):
        report.add(f"tr_{k}(1)=1", "M", abs(a.trace_of_unit() - 1.0), tolerance)

    # (M1) Temperley-Lieb-Jones relations
    for n in ns:
        e = tower.jones[n]
        report.add(f"e_{n}^2=e_{n}", "M1", e.dist(e @ e), tolerance)
        report.add(f"e_{n}*=e_{n}", "M1", e.dist(e.adjoint()), tolerance)
    for i in ns:
        for j in ns:
            if j <= i:
                continue
            top = j + 1
            ei, ej = tower.e(i, top), tower.e(j, top)
            if j - i >= 2:
                report.add(f"[e_{i},e_{j}]=0", "M1", (ei @ ej - ej @ ei).max_abs(), tolerance)
            else:
                report.add(f"e_{i}e_{j}e_{i}=d^-2 e_{i}", "M1", (ei @ ej @ ei).dist(ei * d2), tolerance)
                report.add(f"e_{j}e_{i}e_{j}=d^-2 e_{j}", "M1", (ej @ ei @ ej).dist(ej * d2), tolerance)

    # (M2) e_n x e_n = E_n(x) e_n for x in M_n
    for n in ns:
        e = tower.jones[n]
        comm = _commutation_residual(tower, n)
        worst = 0.0
        checks = list(tower.inclusions[n - 1].copy_pair_units())
        checks += [tower.levels[n].random(rng) for _ in range(samples)]
        for x in checks:
            lhs = e @ tower.include(x, n + 1) @ e
            rhs = tower.include(tower.inclusions[n - 1].expect(x), n + 1) @ e
            worst = max(worst, lhs.dist(rhs))
        report.add(f"e_{n}xe_{n}=E_{n}(x)e_{n}", "M2", max(worst, comm), tolerance,
                   commutation=comm, generators=len(checks))

    # (M3) E_{n+1}(e_n) = d^-2
    for n in ns:
        h = tower.inclusions[n].expect(tower.jones[n])
        report.add(f"E_{n + 1}(e_{n})=d^-2", "M3", h.dist(tower.levels[n].one() * d2), tolerance)

    # (M4) M_{n+1} e_n = M_n e_n
    for n in ns:
        e = tower.jones[n]
        upper = tower.levels[n + 1]
        dim_big = sum(s * numerical_rank(b) for s, b in zip(upper.sizes, e.blocks))
        dim_small = _dim_span_included_times(tower, n, n, RANK_TOLERANCE)
        witness = 0.0
        ys = list(tower.inclusions[n].copy_pair_units()) + [upper.random(rng) for _ in range(samples)]
        for y in ys:
            ye = y @ e
            x = tower.inclusions[n].expect(ye) * tower.modulus**2
            witness = max(witness, ye.dist(tower.inclusions[n].embed(x) @ e))
        report.add(f"M_{n + 1}e_{n}=M_{n}e_{n}", "M4", max(abs(dim_big - dim_small), witness), tolerance,
                   dim_upper_span=dim_big, dim_lower_span=dim_small)
    return report


def _dim_span_included_times(tower: MarkovTower, n: int, m: int, tol: float) -> int:
    """``dim span{x e_n : x in M_m}`` for ``m <= n`` via its Gram matrix.

    ``tr((x e)^* (y e)) = tr_m(x^* y h)`` with ``h = E(e_n)`` in ``M_m``; the
    Gram form has rank ``sum_i s_i rank(h_i)``.
    """
    h = tower.expect(tower.jones[n], m)
    return sum(s * numerical_rank(b, tol) for s, b in zip(tower.levels[m].sizes, h.blocks))


def _sandwich_dim(incl: UnitalInclusion, e: AlgebraElement, tol: float) -> tuple[int, list[int]]:
    """``dim span{a e b : a, b in lower}`` inside ``upper`` and its support blocks."""
    lo = incl.lower
    total = 0
    support = []
    for j, slots in enumerate(incl.layout):
        ej = e.blocks[j]
        block_dim = 0
        by_lower: dict[int, list[Slot]] = {}
        for s in slots:
            by_lower.setdefault(s.lower, []).append(s)
        for i, ks in by_lower.items():
            si = lo.sizes[i]
            for i2, ls in by_lower.items():
                si2 = lo.sizes[i2]
                cols = []
                for k in ks:
                    for l in ls:
                        cols.append(ej[k.offset : k.offset + si, l.offset : l.offset + si2].ravel())
                rank = numerical_rank(np.array(cols).T, tol)
                block_dim += si * si2 * rank
        total += block_dim
        if block_dim:
            support.append(j)
    return total, support


def new_blocks(tower: MarkovTower, tolerance: float = DEFAULT_TOLERANCE) -> list[list[int]]:
    """Indices of the 'new' blocks ``Y_k`` at every level.

    Levels 0 and 1 are new by convention; above that, a block is new when
    ``e_{k-1}`` vanishes on it.
    """
    out = []
    for k, alg in enumerate(tower.levels):
        if k <= 1:
            out.append(list(range(alg.nblocks)))
        else:
            e = tower.jones[k - 1]
            out.append([b for b, blk in enumerate(e.blocks) if np.max(np.abs(blk), initial=0.0) <= tolerance])
    return out


def old_block_map(tower: MarkovTower, n: int, tolerance: float = DEFAULT_TOLERANCE) -> tuple[dict[int, int], float]:
    """For each block ``u`` of ``M_{n-1}``, the block of ``M_{n+1}`` carrying ``q e_n``.

    ``q`` is the first diagonal unit of block ``u``.  Also returns the worst
    deviation of ``q e_n`` from being a rank-one projection.
    """
    low = tower.levels[n - 1]
    e = tower.jones[n]
    mapping = {}
    worst = 0.0
    for u in range(low.nblocks):
        q = tower.include(low.matrix_unit(u, 0, 0), n + 1)
        z = q @ e
        worst = max(worst, z.dist(z @ z), z.dist(z.adjoint()))
        hit = [j for j, blk in enumerate(z.blocks) if np.max(np.abs(blk), initial=0.0) > tolerance]
        ranks = sum(numerical_rank(z.blocks[j]) for j in hit)
        worst = max(worst, float(abs(ranks - 1)), float(abs(len(hit) - 1)))
        if hit:
            mapping[u] = hit[0]
    return mapping, worst


def verify_elementary_properties(
    tower: MarkovTower,
    tolerance: float = DEFAULT_TOLERANCE,
    samples: int = 2,
    seed: int = 0,
) -> Report:
    report = Report(f"elementary properties: {tower.name}")
    rng = np.random.default_rng(seed)
    d = tower.modulus
    ns = sorted(tower.jones)
    new = new_blocks(tower, tolerance)
    for n in ns:
        e = tower.jones[n]
        lo, up = tower.levels[n], tower.levels[n + 1]
        incl = tower.inclusions[n]

        # EP1: x -> x e_n injective on M_n
        rank = _dim_span_included_times(tower, n, n, RANK_TOLERANCE)
        report.add(f"EP1 n={n}", "EP1", float(abs(rank - lo.dim)), tolerance, rank=rank, dim=lo.dim)

        # EP2: the pull-down witness d^2 E(y e_n)
        worst = 0.0
        for y in [up.random(rng) for _ in range(samples)] + incl.copy_pair_units():
            ye = y @ e
            x = incl.expect(ye) * d**2
            worst = max(worst, ye.dist(incl.embed(x) @ e))
        report.add(f"EP2 n={n}", "EP2", max(worst, float(abs(rank - lo.dim))), tolerance)

        # EP3: tr_{n+1}(x e_n) = d^-2 tr_n(x) on all matrix units of M_n
        worst = 0.0
        for i in range(lo.nblocks):
            t = np.zeros((lo.sizes[i], lo.sizes[i]), dtype=complex)
            for j, slots in enumerate(incl.layout):
                for s in slots:
                    if s.lower == i:
                        m = lo.sizes[i]
                        t += up.weights[j] * e.blocks[j][s.offset : s.offset + m, s.offset : s.offset + m].T
            worst = max(worst, float(np.max(np.abs(t - d**-2 * lo.weights[i] * np.eye(lo.sizes[i])))))
        for _ in range(samples):
            x = lo.random(rng)
            worst = max(worst, abs((incl.embed(x) @ e).trace() - d**-2 * x.trace()))
        report.add(f"EP3 n={n}", "EP3", worst, tolerance)

        low = tower.levels[n - 1]
        lam = tower.inclusions[n - 1].inclusion_matrix
        reflected = lam @ np.array(lo.sizes)

        # EP4: e_n M_{n+1} e_n = M_{n-1} e_n
        corner = sum(numerical_rank(b) ** 2 for b in e.blocks)
        lower_span = _dim_span_included_times(tower, n, n - 1, RANK_TOLERANCE)
        comm = _commutation_residual(tower, n)
        resid = max(float(abs(corner - lower_span)), float(abs(corner - low.dim)), comm)
        report.add(f"EP4 n={n}", "EP4", resid, tolerance, corner=corner, lower=lower_span)

        # EP5: X_{n+1} = M_n e_n M_n is the ideal generated by e_n
        sandwich, support = _sandwich_dim(incl, e, RANK_TOLERANCE)
        ideal = sum(up.sizes[j] ** 2 for j in range(up.nblocks) if j not in new[n + 1])
        predicted = int(np.sum(reflected**2))
        resid = float(max(abs(sandwich - ideal), abs(sandwich - predicted)))
        report.add(f"EP5 n={n}", "EP5", resid, tolerance, sandwich=sandwich, ideal=ideal, predicted=predicted)

        # EP6: X_{n+1} is the basic construction for M_{n-1} c M_n
        mapping, worst = old_block_map(tower, n, tolerance)
        image = sorted(mapping.values())
        old = [j for j in range(up.nblocks) if j not in new[n + 1]]
        mismatch = float(image != old) + float(len(set(image)) != len(image))
        sizes = max((abs(up.sizes[mapping[u]] - reflected[u]) for u in mapping), default=0)
        report.add(f"EP6 n={n}", "EP6", max(worst, mismatch, float(sizes)), tolerance)

        # EP7: Tr = d^2 tr on X_{n+1}
        worst = max(
            (abs(d**2 * up.weights[mapping[u]] - low.weights[u]) for u in mapping), default=0.0
        )
        for _ in range(samples):
            a, b = lo.random(rng), lo.random(rng)
            lhs = (incl.embed(a) @ e @ incl.embed(b)).trace() * d**2
            worst = max(worst, abs(lhs - (a @ b).trace()))
        report.add(f"EP7 n={n}", "EP7", worst, tolerance)

    # EP8: Y_{n+1} X_n = 0
    for n in range(1, tower.depth):
        if n + 1 > tower.depth:
            break
        up, lo = tower.levels[n + 1], tower.levels[n]
        zy = up.zero()
        for j in new[n + 1]:
            zy.blocks[j] = np.eye(up.sizes[j])
        zx = lo.zero()
        for i in range(lo.nblocks):
            if i not in new[n]:
                zx.blocks[i] = np.eye(lo.sizes[i])
        report.add(f"EP8 n={n}", "EP8", (zy @ tower.inclusions[n].embed(zx)).max_abs(), tolerance)

    # EP9: once Y_n vanishes it stays zero
    first = next((k for k, blocks in enumerate(new) if not blocks), None)
    violations = 0 if first is None else sum(1 for blocks in new[first:] if blocks)
    report.add("EP9", "EP9", float(violations), tolerance, first_empty=first)
    return report


# ---------------------------------------------------------- principal graph

def finite_depth(tower: MarkovTower, tolerance: float = DEFAULT_TOLERANCE) -> int | None:
    """Least ``n`` with ``Y_n = 0`` within the built depth."""
    for k, blocks in enumerate(new_blocks(tower, tolerance)):
        if not blocks:
            return k
    return None


@dataclass
class PrincipalGraphData:
    graph: WeightedBipartiteGraph
    vertex_of_block: list[list[Hashable]]
    first_level: dict
    certified: bool
    dim_spread: float = 0.0


def principal_graph(tower: MarkovTower, tolerance: float = DEFAULT_TOLERANCE, details: bool = False):
    """Graph of new vertices with quantum dimensions ``d^k tr_k(p)``.

    Old blocks at level ``n+1`` are identified with blocks of ``M_{n-1}``
    through ``q -> q e_n``.  Warns when the built depth shows no level without
    new blocks.
    """
    from .graph import WeightedBipartiteGraph as WBG

    if not tower.is_connected():
        raise TowerError("principal graphs are defined for connected towers (M_0 = C)")
    d = tower.modulus
    new = new_blocks(tower, tolerance)
    vertex_of: list[list[Hashable]] = []
    first: dict = {}
    dims: dict = {}
    spread = 0.0
    used: set = set()
    edges: dict = {}
    for k, alg in enumerate(tower.levels):
        row: list[Hashable] = [None] * alg.nblocks
        if k >= 2:
            mapping, _ = old_block_map(tower, k - 1, tolerance)
            for u, j in mapping.items():
                row[j] = vertex_of[k - 2][u]
        for b in new[k]:
            lab = alg.labels[b]
            vid = lab if lab not in used else f"{lab}@{k}"
            used.add(vid)
            row[b] = vid
            first[vid] = k
            dims[vid] = d**k * alg.weights[b]
            if k >= 1:
                lam = tower.inclusions[k - 1].inclusion_matrix
                for i in range(lam.shape[0]):
                    if lam[i, b]:
                        w = vertex_of[k - 1][i]
                        edges[(w, vid)] = int(lam[i, b])
        if any(v is None for v in row):
            raise TowerError(f"could not identify every block at level {k}")
        for b, vid in enumerate(row):
            spread = max(spread, abs(d**k * alg.weights[b] - dims[vid]))
        vertex_of.append(row)
    certified = any(not blocks for blocks in new)
    if not certified:
        warnings.warn(
            f"{tower.name}: new vertices still appear at level {tower.depth}; principal graph may be truncated",
            TruncationWarning,
            stacklevel=2,
        )
    even = [v for v in first if first[v] % 2 == 0]
    odd = [v for v in first if first[v] % 2 == 1]
    mult = {}
    for (w, v), m in edges.items():
        key = (w, v) if first[w] % 2 == 0 else (v, w)
        mult[key] = mult.get(key, 0) + m
    base = vertex_of[0][0]
    g = WBG(tuple(even), tuple(odd), mult, base, dims, d)
    if details:
        return PrincipalGraphData(g, vertex_of, first, certified, spread)
    return g


# ----------------------------------------------------- derived towers

def shift(tower: MarkovTower, k: int) -> MarkovTower:
    """The tower ``M_k c M_{k+1} c ...`` with projections ``e_{k+1}, e_{k+2}, ...``."""
    if k == 0:
        return tower
    if k < 0 or k >= tower.depth - 2:
        raise TowerError(f"shift by {k} needs depth > {k + 2}, have {tower.depth}")
    jones = {n - k: e for n, e in tower.jones.items() if n > k}
    paths = tower.paths[k:] if tower.paths is not None else None
    return MarkovTower(
        tower.levels[k:], tower.inclusions[k:], jones, tower.modulus, None, paths, f"{tower.name} shifted by {k}"
    )


class CompressedTower(MarkovTower):
    """``p M_n p`` with the isometries used to compress elements."""

    def __init__(self, *args: Any, isometries: list, source: MarkovTower, projection: AlgebraElement, **kw: Any):
        super().__init__(*args, **kw)
        self.isometries = isometries
        self.source = source
        self.projection = projection

    def compress(self, x: AlgebraElement) -> AlgebraElement:
        k = self.source.level_of(x)
        ws = self.isometries[k]
        alg = self.levels[k]
        blocks = [ws[j].conj().T @ x.blocks[j] @ ws[j] for j in self._kept[k]]
        return AlgebraElement(alg, blocks)

    def expand(self, y: AlgebraElement) -> AlgebraElement:
        """The element ``W y W^*`` of the source level (inverse of :meth:`compress` on ``p M p``)."""
        k = self.level_of(y)
        src = self.source.levels[k]
        out = src.zero(dtype=np.result_type(*y.blocks, *self.isometries[k]))
        for pos, j in enumerate(self._kept[k]):
            w = self.isometries[k][j]
            out.blocks[j] = w @ y.blocks[pos] @ w.conj().T
        return out


def compress(tower: MarkovTower, p: AlgebraElement, tolerance: float = DEFAULT_TOLERANCE) -> CompressedTower:
    """Compress every level by a projection ``p`` in ``M_0``."""
    from .multimatrix import is_projection

    if tower.level_of(p) != 0:
        raise TowerError("p must lie in the base algebra of the tower")
    if not is_projection(p, tolerance):
        raise TowerError("p is not a projection")
    if p.max_abs() <= tolerance:
        raise TowerError("p is zero")
    tr_p = float(np.real(p.trace()))

    base = tower.levels[0]
    ws = []
    for blk in p.blocks:
        vals, vecs = np.linalg.eigh((blk + blk.conj().T) / 2)
        ws.append(vecs[:, vals > 0.5])
    all_ws = [ws]
    levels, layouts, kept_all = [], [], []

    def make_level(k: int, ws_k: list) -> tuple[MultiMatrixAlgebra, list[int]]:
        alg = tower.levels[k]
        kept = [j for j, w in enumerate(ws_k) if w.shape[1] > 0]
        return (
            MultiMatrixAlgebra(
                [alg.labels[j] for j in kept],
                [ws_k[j].shape[1] for j in kept],
                [alg.weights[j] / tr_p for j in kept],
            ),
            kept,
        )

    alg0, kept0 = make_level(0, ws)
    levels.append(alg0)
    kept_all.append(kept0)
    for k, incl in enumerate(tower.inclusions):
        prev = all_ws[-1]
        new_pos = {j: pos for pos, j in enumerate(kept_all[-1])}
        cur, layout_k = [], []
        for j, slots in enumerate(incl.layout):
            cols, new_slots, off = [], [], 0
            sj = incl.upper.sizes[j]
            for s in slots:
                w = prev[s.lower]
                r = w.shape[1]
                if r == 0:
                    continue
                block = np.zeros((sj, r), dtype=w.dtype)
                block[s.offset : s.offset + w.shape[0], :] = w
                cols.append(block)
                new_slots.append(Slot(new_pos[s.lower], off, s.tag))
                off += r
            cur.append(np.hstack(cols) if cols else np.zeros((sj, 0)))
            layout_k.append(new_slots)
        all_ws.append(cur)
        alg, kept = make_level(k + 1, cur)
        levels.append(alg)
        kept_all.append(kept)
        layouts.append([layout_k[j] for j in kept])
    inclusions = [UnitalInclusion(levels[k], levels[k + 1], layouts[k]) for k in range(len(layouts))]
    jones = {}
    for n, e in tower.jones.items():
        k = n + 1
        blocks = [all_ws[k][j].conj().T @ e.blocks[j] @ all_ws[k][j] for j in kept_all[k]]
        jones[n] = AlgebraElement(levels[k], blocks)
    out = CompressedTower(
        levels,
        inclusions,
        jones,
        tower.modulus,
        isometries=all_ws,
        source=tower,
        projection=p,
        name=f"{tower.name} compressed",
    )
    out._kept = kept_all
    return out


def jones_word(tower: MarkovTower, word: Sequence[int], level: int) -> AlgebraElement:
    """Product ``e_{w_1} e_{w_2} ...`` inside ``level``."""
    out = tower.levels[level].one()
    for i in word:
        out = out @ tower.e(i, level)
    return out


def cabled_word(j: int, k: int) -> list[int]:
    """Indices of the word ``(e_{j+k}...e_{j+1})(e_{j+k+1}...e_{j+2})...(e_{j+2k-1}...e_{j+k})``."""
    word = []
    for m in range(k):
        word.extend(range(j + k + m, j + m, -1))
    return word


def cabled_projection_in_tower(tower: MarkovTower, j: int, k: int) -> AlgebraElement:
    """``f^{j+k}_j`` evaluated as a matrix word in ``M_{j+2k}``."""
    level = j + 2 * k
    if level > tower.depth:
        raise TowerError(f"f^{j + k}_{j} needs depth {level}, have {tower.depth}")
    return jones_word(tower, cabled_word(j, k), level) * tower.modulus ** (k * (k - 1))


def multistep(tower: MarkovTower, j: int, k: int) -> MarkovTower:
    """The tower ``M_j c M_{j+k} c M_{j+2k} c ...`` with cabled projections."""
    if k < 1 or j < 0:
        raise TowerError("need j >= 0 and k >= 1")
    top = (tower.depth - j) // k
    if top < 2:
        raise TowerError(f"multistep ({j},{k}) needs depth >= {j + 2 * k}, have {tower.depth}")
    idx = [j + n * k for n in range(top + 1)]
    levels = [tower.levels[i] for i in idx]
    inclusions = [tower.inclusion(idx[n], idx[n + 1]) for n in range(top)]
    # compose() returns inclusions whose endpoints are the tower's own algebras
    jones = {}
    for n in range(1, top):
        jones[n] = cabled_projection_in_tower(tower, j + (n - 1) * k, k)
    return MarkovTower(levels, inclusions, jones, tower.modulus**k, None, None, f"{tower.name} multistep ({j},{k})")


def relation_constant(k: int, modulus: float) -> float:
    """Scalar in front of the word in the cabled factorization.

    The ``k`` Jones projections already carry ``d^-k``, which is the full
    coefficient of ``f^{j+k}_j`` on its diagram, so no further power of ``d``
    appears.  Stacking diagrams confirms this for every ``(j, k)``.
    """
    return 1.0


def multistep_relation_check(tower: MarkovTower, j: int, k: int) -> float:
    """Max residual between ``f^{j+k}_j`` and the word-times-diagram factorization."""
    from .tljdiag import relation_diagram, represent

    level = j + 2 * k
    if level > tower.depth:
        raise TowerError(f"relation needs depth {level}, have {tower.depth}")
    lhs = cabled_projection_in_tower(tower, j, k)
    word = jones_word(tower, list(range(j + k, j + 2 * k)), level)
    rhs = word @ represent(tower, relation_diagram(j, k, tower.modulus)) * relation_constant(k, tower.modulus)
    return lhs.dist(rhs)


# ---------------------------------------------------------------- exports

def bratteli_to_dot(tower: MarkovTower, name: str = "bratteli") -> str:
    lines = [f"digraph {name} {{", "  rankdir=BT;"]
    for k, alg in enumerate(tower.levels):
        ids = " ".join(f'"L{k}:{lab}"' for lab in alg.labels)
        lines.append(f"  {{ rank=same; {ids} }}")
        for lab, s in zip(alg.labels, alg.sizes):
            lines.append(f'  "L{k}:{lab}" [label="{lab}\\n{s}"];')
    for k, incl in enumerate(tower.inclusions):
        lam = incl.inclusion_matrix
        for i in range(lam.shape[0]):
            for j in range(lam.shape[1]):
                if lam[i, j]:
                    a, b = tower.levels[k].labels[i], tower.levels[k + 1].labels[j]
                    extra = f' [label="{lam[i, j]}"]' if lam[i, j] > 1 else ""
                    lines.append(f'  "L{k}:{a}" -> "L{k + 1}:{b}"{extra};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def tower_summary(tower: MarkovTower) -> dict:
    return {
        "name": tower.name,
        "modulus": tower.modulus,
        "depth": tower.depth,
        "levels": [
            {
                "level": k,
                "dim": alg.dim,
                "blocks": [
                    {"label": str(lab), "size": s, "trace_weight": float(w)}
                    for lab, s, w in zip(alg.labels, alg.sizes, alg.weights)
                ],
            }
            for k, alg in enumerate(tower.levels)
        ],
        "inclusion_matrices": [m.tolist() for m in tower.bratteli()],
    }
