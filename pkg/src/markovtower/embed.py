"""Relative-commutant planar algebras of a tower and the embedding of TLJ into a GPA.

For a tower ``M_*`` and a level ``k`` write ``A_n = M_{k+n}``.  The box spaces
are ``P_{n,+} = A_0' cap A_n`` and ``P_{n,-} = A_1' cap A_{n+1}``, with

* right inclusion: the tower inclusion ``A_n -> A_{n+1}``;
* right capping: ``d E`` onto ``A_{n-1}``;
* left inclusion ``P_{n,-} -> P_{n+1,+}``: the literal inclusion of commutants;
* left capping ``P_{n,+} -> P_{n-1,-}``: ``d^-1 sum_b b x b^*`` over a
  Pimsner-Popa basis ``{b}`` of ``A_1`` over ``A_0``.

In the path model an element of ``M_k' cap M_m`` acts as the identity on the
first ``k`` steps of a path, so it is a family of matrices ``X_{s,t}`` indexed
by paths from ``s`` (level ``k``) to ``t`` (level ``m``).  These *loop
coordinates* are what the graph planar algebra stores, and they give both the
isomorphism onto the GPA and the shift by two strands.

Every map between planar algebras here is checked with :func:`verify_planar_map`
against the generating tangles listed above plus Jones projections.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Sequence

import numpy as np

from .graph import DEFAULT_TOLERANCE, WeightedBipartiteGraph
from .gpa import (
    GPAElement,
    GraphPlanarAlgebra,
    gpa_cap_left,
    gpa_cap_right,
    gpa_include_left,
    gpa_include_right,
    gpa_jones_projection,
)
from .multimatrix import AlgebraElement, UnitalInclusion, is_projection, support_blocks
from .report import Report
from .tljdiag import TLElement, basis_diagrams, jones_projection_diagram, represent
from .tower import MarkovTower, _sandwich_dim, build_tower

PLANAR_TOLERANCE = 1e-9
INVARIANCE_TOLERANCE = 1e-8


class EmbedError(ValueError):
    pass


def _sign(shading: int | str) -> int:
    if shading in (1, "+"):
        return 1
    if shading in (-1, "-"):
        return -1
    raise EmbedError(f"shading must be '+' or '-', got {shading!r}")


# ------------------------------------------------------ Pimsner-Popa bases

def _inverse_sqrt(h: AlgebraElement, tolerance: float) -> AlgebraElement:
    """Pseudo-inverse square root of a positive element, block by block."""
    blocks = []
    for blk in h.blocks:
        if blk.size == 0:
            blocks.append(blk.copy())
            continue
        w, v = np.linalg.eigh((blk + blk.conj().T) / 2)
        keep = w > tolerance
        inv = np.zeros_like(w)
        inv[keep] = w[keep] ** -0.5
        blocks.append((v * inv) @ v.conj().T)
    return AlgebraElement(h.algebra, blocks)


def slot_seeds(incl: UnitalInclusion) -> Iterable[AlgebraElement]:
    """Partial isometries between copies of lower blocks, then all matrix units.

    The isometry from copy ``a`` to copy ``a'`` inside one upper block spans a
    whole lower block as a right module, so Gram-Schmidt finishes after few
    of them; the matrix units only fill what is left.
    """
    upper, lower = incl.upper, incl.lower
    for t, slots in enumerate(incl.layout):
        for a2 in slots:
            for a in slots:
                m = min(lower.sizes[a2.lower], lower.sizes[a.lower])
                x = upper.zero()
                idx = np.arange(m)
                x.blocks[t][a2.offset + idx, a.offset + idx] = 1.0
                yield x
    for u in upper.matrix_units():
        yield upper.matrix_unit(*u)


def pimsner_popa_basis(
    incl: UnitalInclusion,
    seeds: Iterable[AlgebraElement] | None = None,
    tolerance: float = 1e-10,
    unit: AlgebraElement | None = None,
) -> list[AlgebraElement]:
    """Gram-Schmidt over the lower algebra with the pairing ``<x, y> = E(x^* y)``.

    Seeds default to :func:`slot_seeds`.  For a corner ``p A_0 p c p A_1 p`` pass ``unit = p`` (in ``A_0``)
    and seeds inside the corner.  Each kept ``b`` satisfies ``E(b^* b) = q`` for a projection ``q``
    and ``E(b_i^* b_j) = 0`` for ``i != j``.
    """
    upper, lower = incl.upper, incl.lower
    if seeds is None:
        seeds = slot_seeds(incl)
    basis: list[AlgebraElement] = []
    # the span of b_1..b_m is isomorphic to sum_i q_i A_0 as a right module;
    # once its dimension reaches dim A_1 no seed can add anything
    if unit is None:
        lower_rank = list(lower.sizes)
        target = upper.dim
    else:
        lower_rank = [int(round(np.real(np.trace(b)))) for b in unit.blocks]
        target = sum(int(round(np.real(np.trace(b)))) ** 2 for b in incl.embed(unit).blocks)
    spanned = 0
    for c in seeds:
        if spanned >= target:
            break
        v = c
        # two passes keep the orthogonality at machine precision
        for _ in range(2):
            for b in basis:
                v = v - b @ incl.embed(incl.expect(b.adjoint() @ v))
        h = incl.expect(v.adjoint() @ v)
        if h.max_abs() <= tolerance:
            continue
        b = v @ incl.embed(_inverse_sqrt(h, tolerance))
        if b.max_abs() > tolerance:
            basis.append(b)
            q = incl.expect(b.adjoint() @ b)
            spanned += sum(
                int(round(np.real(np.trace(blk)))) * r for blk, r in zip(q.blocks, lower_rank)
            )
    return basis


@dataclass
class StronglyMarkovInclusion:
    """``A_0 = M_k`` inside ``A_1 = M_{k+1}``, optionally compressed by ``p`` in ``A_0``."""

    tower: MarkovTower
    level: int
    basis: list[AlgebraElement]
    watatani_index: float
    index_residual: float
    projection: AlgebraElement | None = None

    @property
    def inclusion(self) -> UnitalInclusion:
        return self.tower.inclusions[self.level]

    def unit(self, level: int) -> AlgebraElement:
        """The unit of the (possibly compressed) algebra at ``level``."""
        if self.projection is None:
            return self.tower.levels[level].one()
        return self.tower.include(self.projection, level)

    def reconstruct(self, x: AlgebraElement) -> AlgebraElement:
        """``sum_b b E(b^* x)``."""
        incl = self.inclusion
        out = x.algebra.zero(dtype=np.result_type(*x.blocks, float))
        for b in self.basis:
            out = out + b @ incl.embed(incl.expect(b.adjoint() @ x))
        return out

    def reconstruction_residual(self, x: AlgebraElement) -> float:
        return self.reconstruct(x).dist(x)

    def basic_construction_residual(self) -> float:
        """``sum_b b e b^*`` against the unit of ``A_2`` (needs ``e_{k+1}``)."""
        k = self.level
        if k + 1 not in self.tower.jones:
            raise EmbedError(f"e_{k + 1} is not available at depth {self.tower.depth}")
        e = self.tower.e(k + 1)
        acc = e.algebra.zero()
        for b in self.basis:
            bb = self.tower.include(b, k + 2)
            acc = acc + bb @ e @ bb.adjoint()
        return acc.dist(self.unit(k + 2))

    def to_dict(self) -> dict[str, Any]:
        return {
            "level": self.level,
            "basis_size": len(self.basis),
            "watatani_index": self.watatani_index,
            "index_residual": self.index_residual,
            "compressed": self.projection is not None,
        }


def strongly_markov_inclusion(
    tower: MarkovTower,
    level: int,
    projection: AlgebraElement | None = None,
    seeds: Iterable[AlgebraElement] | None = None,
    tolerance: float = PLANAR_TOLERANCE,
) -> StronglyMarkovInclusion:
    """Pimsner-Popa basis and Watatani index of ``M_level`` in ``M_{level+1}``.

    With ``projection`` the inclusion is ``p A_0 p`` in ``p A_1 p``.  Raises when
    ``sum_b b b^*`` is not a scalar multiple of the unit.
    """
    if not 0 <= level < tower.depth:
        raise EmbedError(f"level {level} needs depth {level + 1}, have {tower.depth}")
    incl = tower.inclusions[level]
    if projection is not None:
        if tower.level_of(projection) != level:
            raise EmbedError(f"the projection must lie in M_{level}")
        if not is_projection(projection, tolerance):
            raise EmbedError("compression needs a projection")
        pu = incl.embed(projection)
        seeds = (pu @ s @ pu for s in (slot_seeds(incl) if seeds is None else seeds))
    basis = pimsner_popa_basis(incl, seeds, unit=projection)
    acc = incl.upper.zero()
    for b in basis:
        acc = acc + b @ b.adjoint()
    unit = incl.upper.one() if projection is None else incl.embed(projection)
    index = float(np.real(acc.trace() / unit.trace()))
    residual = acc.dist(unit * index)
    if residual > tolerance * max(1.0, index):
        worst = max(range(acc.algebra.nblocks), key=lambda j: np.max(np.abs((acc - unit * index).blocks[j]), initial=0))
        eig = np.linalg.eigvalsh(acc.blocks[worst]) if acc.blocks[worst].size else []
        raise EmbedError(
            f"M_{level} in M_{level + 1} is not Markov: sum b b^* is not scalar "
            f"(block {acc.algebra.labels[worst]} has eigenvalues {np.round(eig, 6).tolist()})"
        )
    return StronglyMarkovInclusion(tower, level, basis, index, residual, projection)


# ------------------------------------------------------ standard levels

def standard_level_report(tower: MarkovTower, r: int, tolerance: float = PLANAR_TOLERANCE) -> Report:
    """Recognition conditions for ``M_2r c M_2r+1 c (M_2r+2, e_2r+1)``."""
    k = 2 * r
    if k + 2 > tower.depth:
        raise EmbedError(f"standard level r={r} needs depth {k + 2}, have {tower.depth}")
    report = Report(f"standard inclusion at r={r}")
    e = tower.e(k + 1)
    a1 = tower.levels[k + 1]
    r1 = 0.0
    for u in a1.matrix_units():
        x = tower.include(a1.matrix_unit(*u), k + 2)
        lhs = e @ x @ e
        rhs = tower.include(tower.expect(a1.matrix_unit(*u), k), k + 2) @ e
        r1 = max(r1, lhs.dist(rhs))
    report.add(f"R1 r={r}", "R1", r1, tolerance)
    try:
        smi = strongly_markov_inclusion(tower, k, tolerance=tolerance)
        r2 = tower.expect(e, k + 1).dist(a1.one() * (1.0 / smi.watatani_index))
        index = smi.watatani_index
    except EmbedError as exc:
        r2, index = float("inf"), None
        report.add(f"R2 r={r}", "R2", r2, tolerance, reason=str(exc))
    else:
        report.add(f"R2 r={r}", "R2", r2, tolerance, index=index)
    span, _ = _sandwich_dim(tower.inclusions[k + 1], e, tolerance)
    missing = tower.levels[k + 2].dim - span
    report.add(f"R3 r={r}", "R3", float(missing), 0.5, span=span, dim=tower.levels[k + 2].dim)
    return report


def find_standard_level(tower: MarkovTower, tolerance: float = PLANAR_TOLERANCE) -> int:
    """Least ``r`` for which ``M_2r c M_2r+1 c M_2r+2`` is a standard inclusion."""
    r = 0
    while 2 * r + 2 <= tower.depth:
        if standard_level_report(tower, r, tolerance).passed:
            return r
        r += 1
    raise EmbedError(f"no standard level found up to depth {tower.depth}; build a deeper tower")


# ------------------------------------------------------ box elements

@dataclass
class Box:
    """An element of the box space ``(n, sign)`` of some planar algebra model."""

    n: int
    sign: int
    value: Any


class RelativeCommutantPA:
    """The planar algebra ``P_{n,+} = A_0' cap A_n``, ``P_{n,-} = A_1' cap A_{n+1}``.

    With ``projection = p`` in ``A_0`` every box space is compressed by ``p``
    and the Jones projections become ``p e_i``.
    """

    def __init__(
        self,
        tower: MarkovTower,
        level: int,
        projection: AlgebraElement | None = None,
        seeds: Iterable[AlgebraElement] | None = None,
        tolerance: float = PLANAR_TOLERANCE,
    ):
        if tower.paths is None or tower.graph is None:
            raise EmbedError("relative commutants need a path-model tower")
        if projection is not None:
            blocks = support_blocks([projection], tolerance)
            alg = tower.levels[level]
            if len(blocks) != alg.nblocks:
                gap = next(j for j in range(alg.nblocks) if j not in blocks)
                raise EmbedError(
                    f"p does not have full ideal span in M_{level}: zero central support on block {alg.labels[gap]}"
                )
        self.tower = tower
        self.level = level
        self.modulus = tower.modulus
        self.projection = projection
        self.smi = strongly_markov_inclusion(tower, level, projection, seeds, tolerance)
        self._plans: dict = {}

    # -- bookkeeping ------------------------------------------------------
    def base(self, sign: int) -> int:
        return self.level if sign == 1 else self.level + 1

    def ambient(self, n: int, sign: int) -> int:
        return self.base(sign) + n

    @property
    def max_n(self) -> int:
        return self.tower.depth - self.level - 1

    def _check(self, n: int, sign: int) -> None:
        if n < 0 or self.ambient(n, sign) > self.tower.depth:
            raise EmbedError(f"box space ({n},{'+' if sign == 1 else '-'}) needs depth {self.ambient(n, sign)}")

    def unit_at(self, level: int) -> AlgebraElement:
        return self.smi.unit(level)

    def plan(self, n: int, sign: int) -> list[list[tuple[Hashable, Hashable, np.ndarray, list, int]]]:
        """Per upper block: ``(s, t, offsets, suffixes, size of s)`` grouped by lower block."""
        key = (n, _sign(sign))
        if key in self._plans:
            return self._plans[key]
        sign = _sign(sign)
        self._check(n, sign)
        k, m = self.base(sign), self.ambient(n, sign)
        lower, upper = self.tower.levels[k], self.tower.levels[m]
        paths = self.tower.paths[m]
        out = []
        for t in range(upper.nblocks):
            if n == 0:
                groups = {t: [0]}
            else:
                groups: dict[int, list[int]] = {}
                for slot in self.tower.inclusion(k, m).layout[t]:
                    groups.setdefault(slot.lower, []).append(slot.offset)
            entry = []
            for s, offs in sorted(groups.items()):
                suffixes = [paths[t][o][k:] for o in offs]
                entry.append((lower.labels[s], upper.labels[t], np.array(offs), suffixes, lower.sizes[s]))
            out.append(entry)
        self._plans[key] = out
        return out

    # -- loop coordinates ---------------------------------------------------
    def loop_blocks(self, x: Box) -> dict[tuple[Hashable, Hashable], tuple[list, np.ndarray]]:
        """``{(s, t): (paths s -> t, X_{s,t})}`` for a box element.

        Copy ``(a, b)`` of the ``s`` block inside ``x`` equals ``X[a, b]`` times the
        unit of that block (``p_s`` after compression), so ``X[a, b]`` is its
        trace divided by the trace of the unit.
        """
        unit = self.unit_at(self.base(x.sign))
        out = {}
        for t, entry in enumerate(self.plan(x.n, x.sign)):
            blk = x.value.blocks[t]
            for s_lab, t_lab, offs, suffixes, size in entry:
                u = unit.blocks[unit.algebra.index(s_lab)]
                idx = offs[:, None] + np.arange(size)[None, :]
                sub = blk[idx[:, None, :, None], idx[None, :, None, :]]
                out[(s_lab, t_lab)] = (suffixes, np.einsum("abii->ab", sub) / np.real(np.trace(u)))
        return out

    def from_loop_blocks(self, n: int, sign: int, blocks: dict) -> Box:
        """Inverse of :meth:`loop_blocks`; missing pairs count as zero."""
        sign = _sign(sign)
        level = self.ambient(n, sign)
        alg = self.tower.levels[level]
        dtype = np.result_type(float, *[np.asarray(v[1]).dtype for v in blocks.values()])
        out = alg.zero(dtype=dtype)
        for t, entry in enumerate(self.plan(n, sign)):
            for s_lab, t_lab, offs, suffixes, size in entry:
                if (s_lab, t_lab) not in blocks:
                    continue
                paths, mat = blocks[(s_lab, t_lab)]
                if list(paths) != list(suffixes):
                    order = {p: i for i, p in enumerate(paths)}
                    perm = np.array([order[p] for p in suffixes])
                    mat = np.asarray(mat)[np.ix_(perm, perm)]
                for i in range(size):
                    out.blocks[t][np.ix_(offs + i, offs + i)] = mat
        if self.projection is not None:
            out = out @ self.unit_at(level)
        return Box(n, sign, out)

    # -- generators ---------------------------------------------------------
    def box(self, n: int, sign: int, value: AlgebraElement) -> Box:
        sign = _sign(sign)
        self._check(n, sign)
        if self.tower.level_of(value) != self.ambient(n, sign):
            raise EmbedError(f"box ({n},{sign}) lives in M_{self.ambient(n, sign)}")
        return Box(n, sign, value)

    def one(self, n: int, sign: int) -> Box:
        sign = _sign(sign)
        self._check(n, sign)
        return Box(n, sign, self.unit_at(self.ambient(n, sign)))

    def jones(self, i: int, n: int) -> Box:
        """``e_i`` in ``P_{n,+}`` for ``1 <= i <= n-1``."""
        if not 1 <= i <= n - 1:
            raise EmbedError(f"e_{i} is not a Jones projection of P_{n},+")
        self._check(n, 1)
        m = self.ambient(n, 1)
        e = self.tower.e(self.level + i, m)
        return Box(n, 1, e @ self.unit_at(m))

    def include_right(self, x: Box) -> Box:
        self._check(x.n + 1, x.sign)
        return Box(x.n + 1, x.sign, self.tower.include(x.value, self.ambient(x.n + 1, x.sign)))

    def cap_right(self, x: Box) -> Box:
        if x.n == 0:
            raise EmbedError("cannot cap a zero-box element")
        return Box(x.n - 1, x.sign, self.tower.expect(x.value, self.ambient(x.n - 1, x.sign)) * self.modulus)

    def include_left(self, x: Box) -> Box:
        if x.sign != -1:
            raise EmbedError("left inclusion maps P_{n,-} to P_{n+1,+}")
        return Box(x.n + 1, 1, x.value)

    def cap_left(self, x: Box, basis: Sequence[AlgebraElement] | None = None) -> Box:
        """``d^-1 sum_b b x b^*``: ``P_{n,+} -> P_{n-1,-}``."""
        if x.sign != 1 or x.n == 0:
            raise EmbedError("left capping maps P_{n,+} to P_{n-1,-} with n >= 1")
        basis = self.smi.basis if basis is None else basis
        level = self.ambient(x.n, 1)
        acc = x.value.algebra.zero(dtype=np.result_type(*x.value.blocks, float))
        for b in basis:
            bb = self.tower.include(b, level)
            acc = acc + bb @ x.value @ bb.adjoint()
        return Box(x.n - 1, -1, acc * (1.0 / self.modulus))

    def multiply(self, x: Box, y: Box) -> Box:
        return Box(x.n, x.sign, x.value @ y.value)

    def adjoint(self, x: Box) -> Box:
        return Box(x.n, x.sign, x.value.adjoint())

    def dist(self, x: Box, y: Box) -> float:
        if (x.n, x.sign) != (y.n, y.sign):
            return float("inf")
        return x.value.dist(y.value)

    def random(self, n: int, sign: int, rng: np.random.Generator) -> Box:
        blocks = {}
        for entry in self.plan(n, sign):
            for s_lab, t_lab, offs, suffixes, _ in entry:
                blocks[(s_lab, t_lab)] = (suffixes, rng.standard_normal((len(offs), len(offs))))
        return self.from_loop_blocks(n, sign, blocks)

    def basis(self, n: int, sign: int) -> list[Box]:
        out = []
        for entry in self.plan(n, sign):
            for s_lab, t_lab, offs, suffixes, _ in entry:
                for a in range(len(offs)):
                    for b in range(len(offs)):
                        mat = np.zeros((len(offs), len(offs)))
                        mat[a, b] = 1.0
                        out.append(self.from_loop_blocks(n, sign, {(s_lab, t_lab): (suffixes, mat)}))
        return out

    def dim(self, n: int, sign: int) -> int:
        return sum(len(offs) ** 2 for entry in self.plan(n, sign) for _, _, offs, _, _ in entry)

    def membership_residual(self, x: Box) -> float:
        """Distance from ``x`` to the relative commutant (via its loop coordinates)."""
        return self.from_loop_blocks(x.n, x.sign, self.loop_blocks(x)).value.dist(x.value)

    def watatani_index(self) -> float:
        return self.smi.watatani_index


def canonical_pa(
    tower: MarkovTower,
    level: int,
    projection: AlgebraElement | None = None,
    seeds: Iterable[AlgebraElement] | None = None,
) -> RelativeCommutantPA:
    """The relative-commutant planar algebra of ``M_level c M_level+1``."""
    return RelativeCommutantPA(tower, level, projection, seeds)


def left_cap_basis_residual(pa: RelativeCommutantPA, n: int, rng: np.random.Generator, samples: int = 3) -> float:
    """Left capping with a second, randomly seeded Pimsner-Popa basis against the default."""
    incl = pa.tower.inclusions[pa.level]
    seeds = [incl.upper.random(rng, real=True) for _ in range(incl.upper.dim)]
    if pa.projection is not None:
        pu = incl.embed(pa.projection)
        seeds = [pu @ s @ pu for s in seeds]
    other = pimsner_popa_basis(incl, seeds, unit=pa.projection)
    worst = 0.0
    for _ in range(samples):
        x = pa.random(n, 1, rng)
        worst = max(worst, pa.dist(pa.cap_left(x), pa.cap_left(x, other)))
    return worst


# ------------------------------------------------------ other models

class TLBoxes:
    """Temperley-Lieb-Jones box spaces ``TL_{n,+/-}`` at modulus ``d``."""

    def __init__(self, modulus: float):
        self.modulus = float(modulus)

    def _id(self, n: int, sign: int) -> TLElement:
        return TLElement.identity(n, self.modulus, sign)

    def one(self, n: int, sign: int) -> Box:
        return Box(n, _sign(sign), self._id(n, _sign(sign)))

    def jones(self, i: int, n: int) -> Box:
        return Box(n, 1, jones_projection_diagram(i, n, self.modulus))

    def include_right(self, x: Box) -> Box:
        return Box(x.n + 1, x.sign, x.value.tensor(self._id(1, x.sign)))

    def cap_right(self, x: Box) -> Box:
        n = x.n
        if n == 0:
            raise EmbedError("cannot cap a zero-box element")
        cup = TLElement.parse("|" * (n - 1) + "()/" + "|" * (n - 1), self.modulus, shading=x.sign)
        out = cup.adjoint() @ x.value.tensor(self._id(1, x.sign)) @ cup
        return Box(n - 1, x.sign, out)

    def include_left(self, x: Box) -> Box:
        if x.sign != -1:
            raise EmbedError("left inclusion maps TL_{n,-} to TL_{n+1,+}")
        return Box(x.n + 1, 1, self._id(1, 1).tensor(x.value))

    def cap_left(self, x: Box) -> Box:
        n = x.n
        if x.sign != 1 or n == 0:
            raise EmbedError("left capping maps TL_{n,+} to TL_{n-1,-} with n >= 1")
        cup = TLElement.parse("()" + "|" * (n - 1) + "/" + "|" * (n - 1), self.modulus, shading=-1)
        wide = self._id(1, -1).tensor(x.value)
        return Box(n - 1, -1, cup.adjoint() @ wide @ cup)

    def multiply(self, x: Box, y: Box) -> Box:
        return Box(x.n, x.sign, x.value @ y.value)

    def adjoint(self, x: Box) -> Box:
        return Box(x.n, x.sign, x.value.adjoint())

    def dist(self, x: Box, y: Box) -> float:
        if (x.n, x.sign) != (y.n, y.sign):
            return float("inf")
        return x.value.dist(y.value)

    def basis(self, n: int, sign: int) -> list[Box]:
        sign = _sign(sign)
        return [Box(n, sign, TLElement.from_diagram(dgm, self.modulus)) for dgm in basis_diagrams(n, n, sign)]

    def random(self, n: int, sign: int, rng: np.random.Generator) -> Box:
        sign = _sign(sign)
        out = TLElement.zero(n, n, self.modulus, sign)
        for b in self.basis(n, sign):
            out = out + b.value * float(rng.standard_normal())
        return Box(n, sign, out)


class GPABoxes:
    """Box spaces of a graph planar algebra as :class:`Box` values."""

    def __init__(self, gpa: GraphPlanarAlgebra):
        self.gpa = gpa
        self.modulus = gpa.modulus

    def one(self, n: int, sign: int) -> Box:
        return Box(n, _sign(sign), self.gpa.space(n, _sign(sign)).one())

    def jones(self, i: int, n: int) -> Box:
        e = gpa_jones_projection(self.gpa, i, 1)
        while e.space.n < n:
            e = gpa_include_right(e)
        return Box(n, 1, e)

    def include_right(self, x: Box) -> Box:
        return Box(x.n + 1, x.sign, gpa_include_right(x.value))

    def cap_right(self, x: Box) -> Box:
        return Box(x.n - 1, x.sign, gpa_cap_right(x.value))

    def include_left(self, x: Box) -> Box:
        if x.sign != -1:
            raise EmbedError("left inclusion maps G_{n,-} to G_{n+1,+}")
        return Box(x.n + 1, 1, gpa_include_left(x.value))

    def cap_left(self, x: Box) -> Box:
        if x.sign != 1 or x.n == 0:
            raise EmbedError("left capping maps G_{n,+} to G_{n-1,-} with n >= 1")
        return Box(x.n - 1, -1, gpa_cap_left(x.value))

    def multiply(self, x: Box, y: Box) -> Box:
        return Box(x.n, x.sign, x.value @ y.value)

    def adjoint(self, x: Box) -> Box:
        return Box(x.n, x.sign, x.value.adjoint())

    def dist(self, x: Box, y: Box) -> float:
        if (x.n, x.sign) != (y.n, y.sign):
            return float("inf")
        return x.value.dist(y.value)

    def basis(self, n: int, sign: int) -> list[Box]:
        sp = self.gpa.space(n, _sign(sign))
        return [Box(n, _sign(sign), sp.indicator(loop)) for loop in sp.basis]

    def random(self, n: int, sign: int, rng: np.random.Generator) -> Box:
        return Box(n, _sign(sign), self.gpa.space(n, _sign(sign)).random(rng, real=True))


# ------------------------------------------------------ maps

class GPAIsomorphism:
    """Loop coordinates of a relative-commutant PA read as a GPA element."""

    def __init__(self, pa: RelativeCommutantPA, gpa: GraphPlanarAlgebra | None = None):
        self.pa = pa
        depth = pa.max_n
        self.gpa = gpa if gpa is not None else GraphPlanarAlgebra(pa.tower.graph, depth)
        self.source = pa
        self.target = GPABoxes(self.gpa)

    def __call__(self, x: Box) -> Box:
        space = self.gpa.space(x.n, x.sign)
        out = space.algebra.zero(dtype=np.result_type(*x.value.blocks, float))
        for (s, t), (paths, mat) in self.pa.loop_blocks(x).items():
            b = space.algebra.index((s, t))
            pos = np.array([space.position[(s, p)][1] for p in paths], dtype=int)
            out.blocks[b][np.ix_(pos, pos)] = mat
        return Box(x.n, x.sign, space.element(out))

    def inverse(self, y: Box) -> Box:
        space = y.value.space
        blocks = {}
        for b, ((s, t), paths) in enumerate(zip(space.algebra.labels, space.block_paths)):
            blocks[(s, t)] = (list(paths), y.value.matrix.blocks[b])
        return self.pa.from_loop_blocks(y.n, y.sign, blocks)


def gpa_isomorphism(pa: RelativeCommutantPA, gpa: GraphPlanarAlgebra | None = None) -> GPAIsomorphism:
    return GPAIsomorphism(pa, gpa)


class ShiftIsomorphism:
    """Two strands added on the left: ``P(level) -> P(level + 2)``.

    In the path model the added strands only lengthen the common prefix, so the
    loop coordinates are carried over unchanged.
    """

    def __init__(self, source: RelativeCommutantPA, target: RelativeCommutantPA):
        if target.tower is not source.tower or target.level != source.level + 2:
            raise EmbedError("the shift target must be the same tower two levels up")
        self.source = source
        self.target = target

    def __call__(self, x: Box) -> Box:
        return self.target.from_loop_blocks(x.n, x.sign, self.source.loop_blocks(x))


def shift_iso(pa: RelativeCommutantPA, target: RelativeCommutantPA | None = None) -> ShiftIsomorphism:
    if target is None:
        target = RelativeCommutantPA(pa.tower, pa.level + 2)
    return ShiftIsomorphism(pa, target)


class CompressionIsomorphism:
    """``x -> x p`` from ``P`` onto the planar algebra of ``p A_0 p c p A_1 p``."""

    def __init__(self, source: RelativeCommutantPA, target: RelativeCommutantPA):
        self.source = source
        self.target = target

    def __call__(self, x: Box) -> Box:
        level = self.source.ambient(x.n, x.sign)
        return Box(x.n, x.sign, x.value @ self.target.unit_at(level))


def compression_iso(pa: RelativeCommutantPA, p: AlgebraElement) -> CompressionIsomorphism:
    """Compression by ``p`` in ``A_0``; ``p`` must have full ideal span."""
    target = RelativeCommutantPA(pa.tower, pa.level, projection=p)
    return CompressionIsomorphism(pa, target)


class ModuleEmbedding:
    """``Phi``: TLJ boxes into a GPA by prepending ``2r`` (or ``2r+1``) strands."""

    def __init__(self, tower: MarkovTower, r: int, gpa: GraphPlanarAlgebra | None = None, modulus: float | None = None):
        d = tower.modulus if modulus is None else float(modulus)
        if abs(d - tower.modulus) > 1e-9 * max(1.0, d):
            raise EmbedError(f"modulus mismatch: TLJ has d={d}, the module graph has d={tower.modulus}")
        self.tower = tower
        self.r = r
        self.pa = RelativeCommutantPA(tower, 2 * r)
        self.iso = GPAIsomorphism(self.pa, gpa)
        self.gpa = self.iso.gpa
        self.source = TLBoxes(d)
        self.target = self.iso.target

    @property
    def max_n(self) -> int:
        return min(self.pa.max_n, self.gpa.depth)

    def prepend(self, x: Box) -> Box:
        """``1_{2r} (x) x`` (or ``1_{2r+1} (x) x``) inside the relative-commutant PA."""
        strands = 2 * self.r + (0 if x.sign == 1 else 1)
        wide = TLElement.identity(strands, self.tower.modulus).tensor(x.value)
        return self.pa.box(x.n, x.sign, represent(self.tower, wide))

    def __call__(self, x: Box) -> Box:
        return self.iso(self.prepend(x))

    def rank(self, n: int, sign: int = 1) -> int:
        """Rank of ``Phi`` on the diagram basis of ``TL_{n,sign}``."""
        rows = [self(b).value.coefficients for b in self.source.basis(n, sign)]
        if not rows:
            return 0
        s = np.linalg.svd(np.array(rows), compute_uv=False)
        return int(np.sum(s > 1e-9 * max(1.0, s[0])))


def embed_module(
    graph: WeightedBipartiteGraph,
    n: int,
    r: int | None = None,
    modulus: float | None = None,
) -> ModuleEmbedding:
    """``Phi: TL_{m,+/-} -> G_{m,+/-}(graph)`` for ``m <= n``."""
    if r is None:
        probe = build_tower(graph, max(4, 2 * graph.diameter() + 4))
        r = find_standard_level(probe)
    depth = 2 * r + n + 2
    tower = build_tower(graph, depth)
    if r > 0 and not standard_level_report(tower, r).passed:
        raise EmbedError(f"M_{2 * r} c M_{2 * r + 1} is not standard")
    return ModuleEmbedding(tower, r, GraphPlanarAlgebra(graph, n + 1), modulus)


# ------------------------------------------------------ verification

PlanarMap = Callable[[Box], Box]


def verify_planar_map(
    phi: PlanarMap,
    source: Any,
    target: Any,
    max_n: int,
    samples: int = 3,
    seed: int = 0,
    tolerance: float = PLANAR_TOLERANCE,
    use_basis: bool = True,
    name: str = "planar map",
) -> Report:
    """Unital *-homomorphism plus the generating tangles, box space by box space.

    ``source`` and ``target`` expose ``one``, ``jones``, ``include_right``,
    ``cap_right``, ``include_left``, ``cap_left``, ``multiply``, ``adjoint``,
    ``dist``, ``basis`` and ``random`` on :class:`Box` values.
    """
    rng = np.random.default_rng(seed)
    report = Report(name)
    worst: dict[str, float] = {}
    where: dict[str, str] = {}

    def note(label: str, value: float, ctx: str) -> None:
        if value > worst.get(label, -1.0):
            worst[label] = value
            where[label] = ctx

    for n in range(max_n + 1):
        for sign in (1, -1):
            tag = f"({n},{'+' if sign == 1 else '-'})"
            elems = [source.random(n, sign, rng) for _ in range(samples)]
            if use_basis:
                elems += source.basis(n, sign)
            images = [phi(x) for x in elems]
            note("unital", target.dist(phi(source.one(n, sign)), target.one(n, sign)), tag)
            for i in range(min(samples, len(elems))):
                x, y = elems[i], elems[(i + 1) % len(elems)]
                fx, fy = images[i], images[(i + 1) % len(elems)]
                note("mult", target.dist(phi(source.multiply(x, y)), target.multiply(fx, fy)), tag)
                note("dagger", target.dist(phi(source.adjoint(x)), target.adjoint(fx)), tag)
            if sign == 1:
                for i in range(1, n):
                    note("jones", target.dist(phi(source.jones(i, n)), target.jones(i, n)), f"e_{i} in {tag}")
            for x, fx in zip(elems, images):
                if n + 1 <= max_n:
                    note("right-incl", target.dist(phi(source.include_right(x)), target.include_right(fx)), tag)
                    if sign == -1:
                        note("left-incl", target.dist(phi(source.include_left(x)), target.include_left(fx)), tag)
                if n >= 1:
                    note("right-cap", target.dist(phi(source.cap_right(x)), target.cap_right(fx)), tag)
                    if sign == 1:
                        note("left-cap", target.dist(phi(source.cap_left(x)), target.cap_left(fx)), tag)
    for label in ("unital", "mult", "dagger", "jones", "right-incl", "left-incl", "right-cap", "left-cap"):
        if label in worst:
            report.add(f"{name}: {label}", label, worst[label], tolerance, worst_at=where[label])
    return report


def verify_embedding(emb: ModuleEmbedding, max_n: int | None = None, samples: int = 3, seed: int = 0,
                     tolerance: float = PLANAR_TOLERANCE) -> Report:
    """Planar-map checks for ``Phi`` plus injectivity against the tower's TL image."""
    from .tljdiag import image_dimension

    max_n = emb.max_n - 1 if max_n is None else max_n
    report = verify_planar_map(
        emb, emb.source, emb.target, max_n, samples, seed, tolerance, name=f"Phi into GPA at r={emb.r}"
    )
    for n in range(1, max_n + 1):
        rank = emb.rank(n)
        expected = image_dimension(emb.tower, n)
        report.add(f"Phi rank on TL_{n}", "inj", float(abs(rank - expected)), 0.5, rank=rank, expected=expected)
    return report


# ------------------------------------------------------ invariance

@dataclass
class PhaseWitness:
    """A loop permutation with phases: loop ``i`` of the source goes to ``perm[i]``."""

    perm: list[int]
    phases: np.ndarray
    residual: float
    identity: bool


def find_phase_permutation(a: np.ndarray, b: np.ndarray, tolerance: float = INVARIANCE_TOLERANCE) -> PhaseWitness | None:
    """Rows of ``b`` as a permutation-with-phases of rows of ``a``.

    Row ``l`` lists the coefficient of loop ``l`` in each sample image.  The
    identity is tried first; otherwise rows are matched by their phase-normalised
    values.  Returns ``None`` when no witness is found.
    """
    if a.shape != b.shape:
        return None
    nrows = a.shape[0]
    if nrows == 0 or np.max(np.abs(a - b), initial=0.0) <= tolerance:
        return PhaseWitness(list(range(nrows)), np.ones(nrows), float(np.max(np.abs(a - b), initial=0.0)), True)

    def key(row: np.ndarray) -> tuple:
        nz = np.flatnonzero(np.abs(row) > tolerance)
        if nz.size == 0:
            return ("zero",)
        phase = row[nz[0]] / abs(row[nz[0]])
        return tuple(np.round(row / phase / tolerance ** 0.5).astype(complex).tolist())

    buckets: dict[tuple, list[int]] = {}
    for j in range(nrows):
        buckets.setdefault(key(b[j]), []).append(j)
    perm, phases = [], np.ones(nrows, dtype=complex)
    for i in range(nrows):
        cands = buckets.get(key(a[i]))
        if not cands:
            return None
        j = cands.pop(0)
        perm.append(j)
        nz = np.flatnonzero(np.abs(a[i]) > tolerance)
        if nz.size:
            phases[i] = b[j, nz[0]] / a[i, nz[0]]
    residual = max(float(np.max(np.abs(b[perm[i]] - phases[i] * a[i]), initial=0.0)) for i in range(nrows))
    if residual > tolerance or np.max(np.abs(np.abs(phases) - 1.0)) > tolerance:
        return None
    return PhaseWitness(perm, phases, residual, perm == list(range(nrows)))


def _image_matrix(phi: PlanarMap, tl: TLBoxes, n: int, sign: int) -> np.ndarray:
    return np.array([phi(b).value.coefficients for b in tl.basis(n, sign)]).T


def invariance_check(
    graph: WeightedBipartiteGraph,
    r1: int,
    r2: int,
    n: int = 2,
    basepoint: Hashable | None = None,
    tolerance: float = INVARIANCE_TOLERANCE,
) -> Report:
    """Embeddings at ``r1`` and ``r2`` agree after the shift, and a basepoint change is an equivalence.

    The shift comparison happens inside the relative-commutant PA at
    ``2 * max(r1, r2)``.  For the basepoint change, ``basepoint`` (default: the
    first other even vertex) is reached at level ``2j``; a minimal projection
    there is pushed up until it has full ideal span, the embedding is
    compressed by it and compared with the embedding of the re-pointed tower.
    """
    report = Report(f"invariance of the embedding into GPA({len(graph.vertices)} vertices)")
    lo, hi = sorted((r1, r2))
    depth = 2 * hi + n + 2
    tower = build_tower(graph, depth)
    for r in (lo, hi):
        if r > 0 and not standard_level_report(tower, r).passed:
            raise EmbedError(f"M_{2 * r} c M_{2 * r + 1} is not standard")
    e_lo = ModuleEmbedding(tower, lo)
    e_hi = ModuleEmbedding(tower, hi) if hi != lo else e_lo
    tl = e_lo.source
    shifts = []
    pa = e_lo.pa
    while pa.level < e_hi.pa.level:
        nxt = e_hi.pa if pa.level + 2 == e_hi.pa.level else RelativeCommutantPA(tower, pa.level + 2)
        shifts.append(ShiftIsomorphism(pa, nxt))
        pa = nxt
    worst = 0.0
    for m in range(n + 1):
        for sign in (1, -1):
            for b in tl.basis(m, sign):
                x = e_lo.prepend(b)
                for sh in shifts:
                    x = sh(x)
                worst = max(worst, e_hi.pa.dist(x, e_hi.prepend(b)))
    report.add(f"shift r={lo} -> r={hi}", "shift", worst, tolerance, shifts=len(shifts))

    # basepoint change through a compression
    others = [v for v in graph.even if v != graph.basepoint]
    if basepoint is None and not others:
        return report
    v = others[0] if basepoint is None else basepoint
    if v not in graph.even:
        raise EmbedError("the new basepoint must be an even vertex")
    report.extend(_basepoint_check(graph, v, n, tolerance))
    return report


def _basepoint_check(graph: WeightedBipartiteGraph, v: Hashable, n: int, tolerance: float) -> Report:
    report = Report("basepoint change")
    dist = graph.distances()[v]
    j = dist // 2
    moved = graph.with_basepoint(v)
    probe = build_tower(moved, max(4, 2 * moved.diameter() + 4))
    r_moved = find_standard_level(probe)
    probe_m = build_tower(graph, max(4, 2 * graph.diameter() + 4))
    r_m = find_standard_level(probe_m)
    # smallest k with p (x) 1 of full ideal span at level 2(j+k) and both levels standard
    k = max(r_moved, r_m - j, 0)
    while True:
        level = 2 * (j + k)
        tower = build_tower(graph, level + n + 2)
        alg = tower.levels[2 * j]
        b = alg.index(v)
        p = alg.zero()
        p.blocks[b][0, 0] = 1.0
        p_up = tower.include(p, level)
        if len(support_blocks([p_up])) == tower.levels[level].nblocks:
            break
        k += 1
    emb_m = ModuleEmbedding(tower, j + k)
    comp = compression_iso(emb_m.pa, p_up)
    iso_q = GPAIsomorphism(comp.target, emb_m.gpa)
    tower_n = build_tower(moved, 2 * k + n + 2)
    emb_n = ModuleEmbedding(tower_n, k)
    report.add("compressed index", "index", abs(comp.target.watatani_index() - emb_m.pa.watatani_index()), tolerance)
    worst, found = 0.0, True
    for m in range(n + 1):
        for sign in (1, -1):
            a = _image_matrix(lambda x: iso_q(comp(emb_m.prepend(x))), emb_m.source, m, sign)
            bmat = _image_matrix(emb_n, emb_n.source, m, sign)
            if emb_n.gpa.space(m, sign).basis != emb_m.gpa.space(m, sign).basis:
                found = False
                break
            w = find_phase_permutation(a, bmat, tolerance)
            if w is None:
                found = False
                break
            worst = max(worst, w.residual)
    report.add(
        f"basepoint {graph.basepoint} -> {v}",
        "equiv",
        worst if found else float("inf"),
        tolerance,
        compression_level=2 * (j + k),
        status="witness found" if found else "inconclusive: no permutation-with-phase witness",
    )
    return report
