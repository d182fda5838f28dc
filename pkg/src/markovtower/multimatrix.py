"""Finite-dimensional tracial algebras as direct sums of full matrix blocks.

An algebra is a list of blocks ``M_{s_1} + ... + M_{s_r}``, each carrying the
trace of a minimal projection (its *trace weight*).  The trace of an element
is ``sum_b weight[b] * Tr(x_b)``.

Unital inclusions are stored as a *layout*: every block of the upper algebra
is cut along its diagonal into consecutive slots, each slot holding one copy
of a lower block.  The embedding is then block-diagonal and the conditional
expectation is a weighted sum of diagonal slices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator, Sequence

import numpy as np
import scipy.linalg

DEFAULT_TOLERANCE = 1e-9
RANK_TOLERANCE = 1e-8


class AlgebraError(ValueError):
    pass


class MultiMatrixAlgebra:
    """``M_{s_1} + ... + M_{s_r}`` with a positive trace weight per block."""

    def __init__(
        self,
        labels: Sequence[Hashable],
        sizes: Sequence[int],
        weights: Sequence[float] | None = None,
    ) -> None:
        if len(labels) != len(sizes):
            raise AlgebraError("labels and sizes differ in length")
        if len(set(labels)) != len(labels):
            raise AlgebraError("block labels must be unique")
        if any(int(s) <= 0 for s in sizes):
            raise AlgebraError("block sizes must be positive")
        self.labels = tuple(labels)
        self.sizes = tuple(int(s) for s in sizes)
        if weights is None:
            weights = np.full(len(sizes), 1.0 / max(1, sum(self.sizes)))
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.shape != (len(sizes),) or np.any(self.weights <= 0):
            raise AlgebraError("trace weights must be positive, one per block")
        self._index = {lab: i for i, lab in enumerate(self.labels)}

    # -- structure -----------------------------------------------------
    @property
    def nblocks(self) -> int:
        return len(self.sizes)

    @property
    def dim(self) -> int:
        return sum(s * s for s in self.sizes)

    def index(self, label: Hashable) -> int:
        return self._index[label]

    def trace_of_unit(self) -> float:
        return float(np.dot(self.weights, self.sizes))

    def is_normalized(self, tolerance: float = DEFAULT_TOLERANCE) -> bool:
        return abs(self.trace_of_unit() - 1.0) <= tolerance

    def with_weights(self, weights: Sequence[float]) -> "MultiMatrixAlgebra":
        return MultiMatrixAlgebra(self.labels, self.sizes, weights)

    def __repr__(self) -> str:
        parts = ", ".join(f"{lab}:{s}" for lab, s in zip(self.labels, self.sizes))
        return f"MultiMatrixAlgebra({parts})"

    def same_shape(self, other: "MultiMatrixAlgebra") -> bool:
        return self.labels == other.labels and self.sizes == other.sizes

    # -- elements ------------------------------------------------------
    def element(self, blocks: Sequence[np.ndarray]) -> "AlgebraElement":
        return AlgebraElement(self, [np.asarray(b) for b in blocks])

    def zero(self, dtype: type = float) -> "AlgebraElement":
        return AlgebraElement(self, [np.zeros((s, s), dtype=dtype) for s in self.sizes])

    def one(self) -> "AlgebraElement":
        return AlgebraElement(self, [np.eye(s) for s in self.sizes])

    def scalar(self, c: complex) -> "AlgebraElement":
        return self.one() * c

    def block_unit(self, b: int) -> "AlgebraElement":
        """Central projection onto block ``b``."""
        x = self.zero()
        x.blocks[b] = np.eye(self.sizes[b])
        return x

    def matrix_unit(self, b: int, r: int, c: int) -> "AlgebraElement":
        x = self.zero()
        x.blocks[b][r, c] = 1.0
        return x

    def matrix_units(self) -> Iterator[tuple[int, int, int]]:
        for b, s in enumerate(self.sizes):
            for r in range(s):
                for c in range(s):
                    yield b, r, c

    def random(self, rng: np.random.Generator, real: bool = False) -> "AlgebraElement":
        blocks = []
        for s in self.sizes:
            m = rng.standard_normal((s, s))
            if not real:
                m = m + 1j * rng.standard_normal((s, s))
            blocks.append(m)
        return AlgebraElement(self, blocks)

    def to_vector(self, x: "AlgebraElement") -> np.ndarray:
        return np.concatenate([b.ravel() for b in x.blocks]) if x.blocks else np.zeros(0)

    def from_vector(self, v: np.ndarray) -> "AlgebraElement":
        blocks, pos = [], 0
        for s in self.sizes:
            blocks.append(np.asarray(v[pos : pos + s * s]).reshape(s, s))
            pos += s * s
        return AlgebraElement(self, blocks)

    def metric(self) -> np.ndarray:
        """Diagonal of the trace inner product in ``to_vector`` coordinates."""
        return np.concatenate([np.full(s * s, w) for s, w in zip(self.sizes, self.weights)])


class AlgebraElement:
    """An element of a :class:`MultiMatrixAlgebra`, stored block by block."""

    __slots__ = ("algebra", "blocks")

    def __init__(self, algebra: MultiMatrixAlgebra, blocks: list[np.ndarray]) -> None:
        if len(blocks) != algebra.nblocks:
            raise AlgebraError("wrong number of blocks")
        for b, s in zip(blocks, algebra.sizes):
            if b.shape != (s, s):
                raise AlgebraError(f"block shape {b.shape} does not match size {s}")
        self.algebra = algebra
        self.blocks = blocks

    def _check(self, other: "AlgebraElement") -> None:
        if other.algebra is not self.algebra and not self.algebra.same_shape(other.algebra):
            raise AlgebraError("elements belong to different algebras")

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check(other)
        return AlgebraElement(self.algebra, [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check(other)
        return AlgebraElement(self.algebra, [a - b for a, b in zip(self.blocks, other.blocks)])

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, [-a for a in self.blocks])

    def __mul__(self, c: complex) -> "AlgebraElement":
        if isinstance(c, AlgebraElement):
            raise TypeError("use @ for the algebra product")
        return AlgebraElement(self.algebra, [a * c for a in self.blocks])

    __rmul__ = __mul__

    def __truediv__(self, c: complex) -> "AlgebraElement":
        return AlgebraElement(self.algebra, [a / c for a in self.blocks])

    def __matmul__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check(other)
        return AlgebraElement(self.algebra, [a @ b for a, b in zip(self.blocks, other.blocks)])

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, [a.conj().T for a in self.blocks])

    @property
    def H(self) -> "AlgebraElement":
        return self.adjoint()

    def trace(self) -> complex:
        total = 0.0
        for w, a in zip(self.algebra.weights, self.blocks):
            total = total + w * np.trace(a)
        return total

    def inner(self, other: "AlgebraElement") -> complex:
        """``tr(other* self)``."""
        self._check(other)
        total = 0.0
        for w, a, b in zip(self.algebra.weights, self.blocks, other.blocks):
            total = total + w * np.vdot(b, a)
        return total

    def norm(self) -> float:
        """Trace 2-norm."""
        return float(np.sqrt(max(0.0, np.real(self.inner(self)))))

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(a))) for a in self.blocks if a.size), default=0.0)

    def dist(self, other: "AlgebraElement") -> float:
        """Largest entry of ``self - other``; the residual used in reports."""
        return (self - other).max_abs()

    def is_zero(self, tolerance: float = DEFAULT_TOLERANCE) -> bool:
        return self.max_abs() <= tolerance

    def copy(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, [a.copy() for a in self.blocks])

    def real_if_close(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, [np.real_if_close(a) for a in self.blocks])

    def to_json(self) -> dict:
        return {
            "blocks": {
                str(lab): {"real": np.real(a).tolist(), "imag": np.imag(a).tolist()}
                for lab, a in zip(self.algebra.labels, self.blocks)
            }
        }

    def __repr__(self) -> str:
        return f"AlgebraElement({self.algebra!r}, max|x|={self.max_abs():.3g})"


def commutator(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    return x @ y - y @ x


def is_projection(p: AlgebraElement, tolerance: float = DEFAULT_TOLERANCE) -> bool:
    return p.dist(p.adjoint()) <= tolerance and p.dist(p @ p) <= tolerance


def central_support(p: AlgebraElement, tolerance: float = DEFAULT_TOLERANCE) -> AlgebraElement:
    """Smallest central projection dominating the projection ``p``."""
    if not is_projection(p, tolerance):
        raise AlgebraError("central_support expects a projection")
    z = p.algebra.zero()
    for b, blk in enumerate(p.blocks):
        if np.max(np.abs(blk), initial=0.0) > tolerance:
            z.blocks[b] = np.eye(p.algebra.sizes[b])
    return z


def support_blocks(elements: Iterable[AlgebraElement], tolerance: float = DEFAULT_TOLERANCE) -> list[int]:
    hit: set[int] = set()
    for x in elements:
        for b, blk in enumerate(x.blocks):
            if np.max(np.abs(blk), initial=0.0) > tolerance:
                hit.add(b)
    return sorted(hit)


def two_sided_ideal_span(
    elements: Sequence[AlgebraElement], tolerance: float = DEFAULT_TOLERANCE
) -> list[AlgebraElement]:
    """Basis of ``span{a s b}``: all matrix units of blocks where some ``s`` is nonzero.

    In a full matrix algebra any nonzero element generates everything, so the
    ideal is the sum of the blocks it touches.
    """
    if not elements:
        return []
    alg = elements[0].algebra
    return [
        alg.matrix_unit(b, r, c)
        for b in support_blocks(elements, tolerance)
        for r in range(alg.sizes[b])
        for c in range(alg.sizes[b])
    ]


def numerical_rank(m: np.ndarray, tolerance: float = RANK_TOLERANCE) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tolerance * max(1.0, s[0])))


def relative_commutant(
    algebra: MultiMatrixAlgebra,
    generators: Sequence[AlgebraElement],
    tolerance: float = RANK_TOLERANCE,
) -> list[AlgebraElement]:
    """Trace-orthonormal basis of ``{x : [x, g] = 0 for all g}``.

    Dense nullspace computation; intended for small algebras.  For towers the
    structured version :func:`commutant_of_inclusion` is used instead.
    """
    scale = np.sqrt(algebra.metric())
    dim = algebra.dim
    if not generators:
        basis = np.eye(dim)
    else:
        rows = []
        for g in generators:
            cols = []
            for k in range(dim):
                v = np.zeros(dim)
                v[k] = 1.0 / scale[k]
                x = algebra.from_vector(v)
                cols.append(algebra.to_vector(x @ g - g @ x))
            rows.append(np.array(cols).T)
        system = np.vstack(rows)
        _, s, vh = np.linalg.svd(system)
        cut = tolerance * max(1.0, s[0] if s.size else 1.0)
        rank = int(np.sum(s > cut))
        basis = vh[rank:].conj().T
    out = []
    for k in range(basis.shape[1]):
        out.append(algebra.from_vector(basis[:, k] / scale))
    return out


# ------------------------------------------------------------ inclusions

@dataclass(frozen=True)
class Slot:
    """One copy of lower block ``lower`` sitting at ``offset`` in an upper block."""

    lower: int
    offset: int
    tag: Hashable = None


class UnitalInclusion:
    """A unital inclusion ``lower -> upper`` given by a block-diagonal layout.

    ``layout[j]`` lists the slots of upper block ``j``; they tile its diagonal.
    """

    def __init__(
        self,
        lower: MultiMatrixAlgebra,
        upper: MultiMatrixAlgebra,
        layout: Sequence[Sequence[Slot]],
    ) -> None:
        if len(layout) != upper.nblocks:
            raise AlgebraError("layout needs one slot list per upper block")
        for j, slots in enumerate(layout):
            pos = 0
            for slot in slots:
                if slot.offset != pos:
                    raise AlgebraError(f"slots of upper block {j} do not tile its diagonal")
                pos += lower.sizes[slot.lower]
            if pos != upper.sizes[j]:
                raise AlgebraError(
                    f"upper block {upper.labels[j]} has size {upper.sizes[j]} but slots fill {pos}"
                )
        self.lower = lower
        self.upper = upper
        self.layout = tuple(tuple(s) for s in layout)

    @property
    def inclusion_matrix(self) -> np.ndarray:
        lam = np.zeros((self.lower.nblocks, self.upper.nblocks), dtype=int)
        for j, slots in enumerate(self.layout):
            for slot in slots:
                lam[slot.lower, j] += 1
        return lam

    def embed(self, x: AlgebraElement) -> AlgebraElement:
        if x.algebra is not self.lower and not self.lower.same_shape(x.algebra):
            raise AlgebraError("element is not in the lower algebra")
        blocks = []
        for slots in self.layout:
            if len(slots) == 1:
                blocks.append(x.blocks[slots[0].lower].copy())
            else:
                blocks.append(scipy.linalg.block_diag(*[x.blocks[s.lower] for s in slots]))
        return AlgebraElement(self.upper, blocks)

    __call__ = embed

    def expect(self, y: AlgebraElement) -> AlgebraElement:
        """Trace-preserving conditional expectation onto the lower algebra."""
        if y.algebra is not self.upper and not self.upper.same_shape(y.algebra):
            raise AlgebraError("element is not in the upper algebra")
        lo = self.lower
        acc = [np.zeros((s, s), dtype=np.result_type(*y.blocks) if y.blocks else float) for s in lo.sizes]
        for j, slots in enumerate(self.layout):
            wj = self.upper.weights[j]
            yj = y.blocks[j]
            for s in slots:
                n = lo.sizes[s.lower]
                acc[s.lower] = acc[s.lower] + wj * yj[s.offset : s.offset + n, s.offset : s.offset + n]
        return AlgebraElement(lo, [a / w for a, w in zip(acc, lo.weights)])

    def trace_compatibility(self) -> float:
        """Max of ``|w_lower - Lambda w_upper|``."""
        lam = self.inclusion_matrix
        return float(np.max(np.abs(self.lower.weights - lam @ self.upper.weights)))

    def compose(self, other: "UnitalInclusion") -> "UnitalInclusion":
        """``other o self``: first ``self`` then ``other``."""
        if other.lower is not self.upper and not other.lower.same_shape(self.upper):
            raise AlgebraError("inclusions do not chain")
        layout = []
        for slots in other.layout:
            new = []
            for outer in slots:
                for inner in self.layout[outer.lower]:
                    new.append(Slot(inner.lower, outer.offset + inner.offset, (outer.tag, inner.tag)))
            layout.append(new)
        return UnitalInclusion(self.lower, other.upper, layout)

    def copy_pair_units(self) -> list[AlgebraElement]:
        """Rank-one units linking the first rows of every pair of slots in a block.

        Together with the image of the lower algebra these generate the upper
        algebra as a bimodule.
        """
        out = []
        for j, slots in enumerate(self.layout):
            for a in slots:
                for b in slots:
                    out.append(self.upper.matrix_unit(j, a.offset, b.offset))
        return out


def identity_inclusion(algebra: MultiMatrixAlgebra) -> UnitalInclusion:
    return UnitalInclusion(algebra, algebra, [[Slot(j, 0, None)] for j in range(algebra.nblocks)])


def commutant_of_inclusion(incl: UnitalInclusion) -> list[AlgebraElement]:
    """Matrix-unit basis ``V_k V_l^*`` of ``lower' cap upper``.

    ``k, l`` run over pairs of slots of the same lower block inside one upper
    block; ``V_k`` is the isometry placing the lower block into slot ``k``.
    """
    up, lo = incl.upper, incl.lower
    out = []
    for j, slots in enumerate(incl.layout):
        for a in slots:
            for b in slots:
                if a.lower != b.lower:
                    continue
                x = up.zero()
                n = lo.sizes[a.lower]
                x.blocks[j][a.offset : a.offset + n, b.offset : b.offset + n] = np.eye(n)
                out.append(x)
    return out
