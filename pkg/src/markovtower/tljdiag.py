"""Temperley-Lieb-Jones diagrams and their linear combinations.

A diagram with ``n`` bottom and ``m`` top points is a planar perfect matching
of its ``n + m`` boundary points.  Points are numbered ``0..n-1`` along the
bottom edge and ``n..n+m-1`` along the top edge, both left to right.  The
product ``x @ y`` stacks ``x`` on top of ``y``; every closed loop produced is
removed and contributes a factor ``d``.

Text notation
-------------
One string per edge, read left to right: ``|`` is a through strand (through
strands are joined in order), ``(`` and ``)`` are the two ends of a cap or
cup on that edge.  A diagram is written ``"top/bottom"``; a single string
stands for a diagram whose top and bottom agree, so ``"||()"`` is ``E_3``
in ``TL_4``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import comb
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

ENUMERATION_BOUND = 8


class DiagramError(ValueError):
    pass


@dataclass(frozen=True)
class TLDiagram:
    bottom: int
    top: int
    pairing: tuple[int, ...]
    shading: int = 1

    def __post_init__(self) -> None:
        n = self.bottom + self.top
        if (self.bottom - self.top) % 2:
            raise DiagramError("bottom and top point counts must have equal parity")
        if len(self.pairing) != n:
            raise DiagramError("pairing has the wrong length")
        for i, j in enumerate(self.pairing):
            if not 0 <= j < n or j == i or self.pairing[j] != i:
                raise DiagramError("pairing must be a fixed-point-free involution")
        if not _planar(self.circular_order(), self.pairing):
            raise DiagramError("pairing is not planar")
        if self.shading not in (1, -1):
            raise DiagramError("shading must be +1 or -1")

    def circular_order(self) -> list[int]:
        """Boundary points counter-clockwise from the bottom-left corner."""
        return list(range(self.bottom)) + list(range(self.bottom + self.top - 1, self.bottom - 1, -1))

    @property
    def top_shading(self) -> int:
        return self.shading

    @property
    def bottom_shading(self) -> int:
        return self.shading

    def adjoint(self) -> "TLDiagram":
        """Vertical flip."""
        n, m = self.bottom, self.top
        swap = {i: m + i for i in range(n)}
        swap.update({n + i: i for i in range(m)})
        new = [0] * (n + m)
        for i, j in enumerate(self.pairing):
            new[swap[i]] = swap[j]
        return TLDiagram(m, n, tuple(new), self.shading)

    def through_strands(self) -> int:
        return sum(1 for i in range(self.bottom) if self.pairing[i] >= self.bottom)

    def to_text(self) -> str:
        n = self.bottom

        def side(points: list[int], own: set[int]) -> str:
            out = []
            for p in points:
                q = self.pairing[p]
                if q not in own:
                    out.append("|")
                else:
                    out.append("(" if q > p else ")")
            return "".join(out)

        bottom_pts = list(range(n))
        top_pts = list(range(n, n + self.top))
        top_txt = side(top_pts, set(top_pts))
        bot_txt = side(bottom_pts, set(bottom_pts))
        return top_txt if top_txt == bot_txt else f"{top_txt}/{bot_txt}"

    def __str__(self) -> str:
        return self.to_text()


def _planar(order: Sequence[int], pairing: Sequence[int]) -> bool:
    stack: list[int] = []
    pos = {p: i for i, p in enumerate(order)}
    for p in order:
        q = pairing[p]
        if pos[q] > pos[p]:
            stack.append(p)
        else:
            if not stack or stack[-1] != q:
                return False
            stack.pop()
    return not stack


def _side_pairs(text: str) -> tuple[list[tuple[int, int]], list[int]]:
    stack, pairs, through = [], [], []
    for i, ch in enumerate(text):
        if ch == "(":
            stack.append(i)
        elif ch == ")":
            if not stack:
                raise DiagramError(f"unbalanced ')' in {text!r}")
            pairs.append((stack.pop(), i))
        elif ch == "|":
            if stack:
                raise DiagramError(f"through strand inside a cap in {text!r}")
            through.append(i)
        else:
            raise DiagramError(f"unexpected character {ch!r} in {text!r}")
    if stack:
        raise DiagramError(f"unbalanced '(' in {text!r}")
    return pairs, through


def diagram(text: str, shading: int = 1) -> TLDiagram:
    """Parse ``"top/bottom"`` (or a single symmetric string)."""
    top, _, bottom = text.partition("/")
    if not _:
        bottom = top
    n, m = len(bottom), len(top)
    pairing = [0] * (n + m)
    bp, bt = _side_pairs(bottom)
    tp, tt = _side_pairs(top)
    if len(bt) != len(tt):
        raise DiagramError(f"through strands disagree in {text!r}")
    for a, b in bp:
        pairing[a], pairing[b] = b, a
    for a, b in tp:
        pairing[n + a], pairing[n + b] = n + b, n + a
    for a, b in zip(bt, tt):
        pairing[a], pairing[n + b] = n + b, a
    return TLDiagram(n, m, tuple(pairing), shading)


def identity_diagram(n: int, shading: int = 1) -> TLDiagram:
    return diagram("|" * n if n else "/", shading) if n else TLDiagram(0, 0, (), shading)


def compose_diagrams(x: TLDiagram, y: TLDiagram) -> tuple[TLDiagram, int]:
    """Stack ``x`` on top of ``y``; returns the reduced diagram and loop count."""
    if y.top != x.bottom:
        raise DiagramError(f"cannot stack: top of lower has {y.top} points, bottom of upper has {x.bottom}")
    if y.shading != x.shading:
        raise DiagramError("shadings do not match")
    ny, k, mx = y.bottom, y.top, x.top
    # external ids: y bottom -> 0..ny-1, x top -> ny..ny+mx-1
    n_out = ny + mx
    result = [0] * n_out
    seen_mid = [False] * k

    def walk_from_y(p: int) -> int:
        # p is a point of y; follow until reaching an external point
        while True:
            q = y.pairing[p]
            if q < ny:
                return q
            mid = q - ny
            seen_mid[mid] = True
            r = x.pairing[mid]
            if r >= x.bottom:
                return ny + (r - x.bottom)
            seen_mid[r] = True
            p = ny + r

    def walk_from_x(p: int) -> int:
        while True:
            q = x.pairing[p]
            if q >= x.bottom:
                return ny + (q - x.bottom)
            seen_mid[q] = True
            r = y.pairing[ny + q]
            if r < ny:
                return r
            mid = r - ny
            seen_mid[mid] = True
            p = mid

    for i in range(ny):
        result[i] = walk_from_y(i)
    for i in range(mx):
        result[ny + i] = walk_from_x(x.bottom + i)
    loops = 0
    for mid in range(k):
        if seen_mid[mid]:
            continue
        loops += 1
        cur = mid
        while True:
            seen_mid[cur] = True
            r = x.pairing[cur]
            seen_mid[r] = True
            s = y.pairing[ny + r] - ny
            if seen_mid[s]:
                break
            cur = s
    return TLDiagram(ny, mx, tuple(result), y.shading), loops


def tensor_diagrams(x: TLDiagram, y: TLDiagram) -> TLDiagram:
    """``x`` placed to the left of ``y``."""
    nx_, mx, ny, my = x.bottom, x.top, y.bottom, y.top
    n, m = nx_ + ny, mx + my

    def xmap(p: int) -> int:
        return p if p < nx_ else n + (p - nx_)

    def ymap(p: int) -> int:
        return nx_ + p if p < ny else n + mx + (p - ny)

    pairing = [0] * (n + m)
    for p, q in enumerate(x.pairing):
        pairing[xmap(p)] = xmap(q)
    for p, q in enumerate(y.pairing):
        pairing[ymap(p)] = ymap(q)
    return TLDiagram(n, m, tuple(pairing), x.shading)


# ------------------------------------------------------------ elements

class TLElement:
    """A finite linear combination of diagrams of one signature."""

    def __init__(self, bottom: int, top: int, terms: dict[TLDiagram, complex], modulus: float, shading: int = 1):
        self.bottom = bottom
        self.top = top
        self.modulus = float(modulus)
        self.shading = shading
        self.terms = {}
        for dgm, c in terms.items():
            if dgm.bottom != bottom or dgm.top != top:
                raise DiagramError("all diagrams must share the element's signature")
            if c != 0:
                self.terms[dgm] = c

    @classmethod
    def from_diagram(cls, dgm: TLDiagram, modulus: float, coeff: complex = 1.0) -> "TLElement":
        return cls(dgm.bottom, dgm.top, {dgm: coeff}, modulus, dgm.shading)

    @classmethod
    def parse(cls, text: str, modulus: float, coeff: complex = 1.0, shading: int = 1) -> "TLElement":
        return cls.from_diagram(diagram(text, shading), modulus, coeff)

    @classmethod
    def identity(cls, n: int, modulus: float, shading: int = 1) -> "TLElement":
        return cls.from_diagram(identity_diagram(n, shading), modulus)

    @classmethod
    def zero(cls, bottom: int, top: int, modulus: float, shading: int = 1) -> "TLElement":
        return cls(bottom, top, {}, modulus, shading)

    def _check(self, other: "TLElement") -> None:
        if (self.bottom, self.top, self.shading) != (other.bottom, other.top, other.shading):
            raise DiagramError("signature mismatch")
        if abs(self.modulus - other.modulus) > 1e-12 * max(1.0, self.modulus):
            raise DiagramError("modulus mismatch")

    def __add__(self, other: "TLElement") -> "TLElement":
        self._check(other)
        terms = dict(self.terms)
        for dgm, c in other.terms.items():
            terms[dgm] = terms.get(dgm, 0) + c
        return TLElement(self.bottom, self.top, terms, self.modulus, self.shading)

    def __neg__(self) -> "TLElement":
        return self * -1

    def __sub__(self, other: "TLElement") -> "TLElement":
        return self + (-other)

    def __mul__(self, c: complex) -> "TLElement":
        return TLElement(self.bottom, self.top, {k: v * c for k, v in self.terms.items()}, self.modulus, self.shading)

    __rmul__ = __mul__

    def __matmul__(self, other: "TLElement") -> "TLElement":
        return diagram_multiply(self, other)

    def adjoint(self) -> "TLElement":
        return TLElement(
            self.top,
            self.bottom,
            {dgm.adjoint(): np.conj(c) for dgm, c in self.terms.items()},
            self.modulus,
            self.shading,
        )

    def tensor(self, other: "TLElement") -> "TLElement":
        terms: dict[TLDiagram, complex] = {}
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                dgm = tensor_diagrams(a, b)
                terms[dgm] = terms.get(dgm, 0) + ca * cb
        return TLElement(self.bottom + other.bottom, self.top + other.top, terms, self.modulus, self.shading)

    def max_abs(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def dist(self, other: "TLElement") -> float:
        return (self - other).max_abs()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TLElement):
            return NotImplemented
        try:
            self._check(other)
        except DiagramError:
            return False
        keys = set(self.terms) | set(other.terms)
        return all(self.terms.get(k, 0) == other.terms.get(k, 0) for k in keys)

    def __repr__(self) -> str:
        if not self.terms:
            return f"TLElement(0 in {self.bottom}->{self.top})"
        parts = [f"{c:.6g}*[{dgm}]" for dgm, c in self.terms.items()]
        return "TLElement(" + " + ".join(parts) + ")"


def diagram_multiply(x: TLElement, y: TLElement) -> TLElement:
    """``x`` stacked on top of ``y`` with loop value ``d``."""
    if y.top != x.bottom:
        raise DiagramError(f"signature mismatch: {y.top} top points below, {x.bottom} bottom points above")
    if abs(x.modulus - y.modulus) > 1e-12 * max(1.0, x.modulus):
        raise DiagramError("modulus mismatch")
    if x.shading != y.shading:
        raise DiagramError("shading mismatch")
    d = x.modulus
    terms: dict[TLDiagram, complex] = {}
    for a, ca in x.terms.items():
        for b, cb in y.terms.items():
            dgm, loops = compose_diagrams(a, b)
            terms[dgm] = terms.get(dgm, 0) + ca * cb * d**loops
    return TLElement(y.bottom, x.top, terms, d, x.shading)


def cap_diagram_E(i: int, n: int, shading: int = 1) -> TLDiagram:
    """``E_i`` in ``TL_n``: strands ``i`` and ``i+1`` (1-indexed) capped and cupped."""
    if not 1 <= i <= n - 1:
        raise DiagramError(f"E_{i} needs 1 <= i <= n-1 with n={n}")
    text = "|" * (i - 1) + "()" + "|" * (n - i - 1)
    return diagram(text, shading)


def jones_projection_diagram(i: int, n: int, modulus: float, shading: int = 1) -> TLElement:
    """``e_i = d^-1 E_i`` in ``TL_n``."""
    return TLElement.from_diagram(cap_diagram_E(i, n, shading), modulus, 1.0 / modulus)


def nested(k: int) -> str:
    return "(" * k + ")" * k


def cabled_diagram(j: int, k: int, shading: int = 1) -> TLDiagram:
    """``F^{j+k}_j``: ``j`` through strands then ``k`` nested cups and caps."""
    return diagram("|" * j + nested(k), shading)


def cabled_projection(j: int, k: int, modulus: float, shading: int = 1) -> TLElement:
    """``f^{j+k}_j`` in ``TL_{j+2k}`` computed from its word in the ``e_i``."""
    if j < 0 or k < 1:
        raise DiagramError("need j >= 0 and k >= 1")
    n = j + 2 * k
    out = TLElement.identity(n, modulus, shading)
    for m in range(k):
        for i in range(j + k + m, j + m, -1):
            out = out @ jones_projection_diagram(i, n, modulus, shading)
    return out * modulus ** (k * (k - 1))


def relation_diagram(j: int, k: int, modulus: float, shading: int = 1) -> TLElement:
    """The diagram ``D`` with ``f^{j+k}_j = (e_{j+k} ... e_{j+2k-1}) D``.

    ``D`` has ``j`` through strands on the left and one on the right; between
    them the bottom carries a strand that rises to the right of ``k-1`` nested
    caps and is followed by ``k-1`` nested cups.
    """
    if k < 1:
        raise DiagramError("need k >= 1")
    top = "|" * j + nested(k - 1) + "|" + "|"
    bottom = "|" * j + "|" + nested(k - 1) + "|"
    return TLElement.parse(f"{top}/{bottom}", modulus, shading=shading)


# --------------------------------------------------------- enumeration

def noncrossing_matchings(m: int) -> Iterator[list[tuple[int, int]]]:
    """All non-crossing perfect matchings of points ``0..m-1`` on a line."""
    if m == 0:
        yield []
        return
    if m % 2:
        return
    for k in range(1, m, 2):
        for inner in noncrossing_matchings(k - 1):
            for outer in noncrossing_matchings(m - k - 1):
                yield [(0, k)] + [(a + 1, b + 1) for a, b in inner] + [(a + k + 1, b + k + 1) for a, b in outer]


def basis_diagrams(bottom: int, top: int | None = None, shading: int = 1) -> list[TLDiagram]:
    """All diagrams with the given point counts, in a fixed order."""
    top = bottom if top is None else top
    total = bottom + top
    if max(bottom, top) > 2 * ENUMERATION_BOUND:
        raise DiagramError("enumeration bound exceeded")
    order = list(range(bottom)) + list(range(bottom + top - 1, bottom - 1, -1))
    out = []
    for matching in noncrossing_matchings(total):
        pairing = [0] * total
        for a, b in matching:
            pa, pb = order[a], order[b]
            pairing[pa], pairing[pb] = pb, pa
        out.append(TLDiagram(bottom, top, tuple(pairing), shading))
    return out


def generic_dimension(n: int) -> int:
    """Number of planar pairings of ``2n`` points."""
    if n < 0 or n > ENUMERATION_BOUND:
        raise DiagramError(f"generic_dimension is enumerated for 0 <= n <= {ENUMERATION_BOUND}")
    return len(basis_diagrams(n, n))


def catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)


def _pattern_pairs(pattern: str) -> list[int | None]:
    pairs, _ = _side_pairs(pattern)
    out: list[int | None] = [None] * len(pattern)
    for x, y in pairs:
        out[x], out[y] = y, x
    return out


def _pairs_to_pattern(partner: list[int | None]) -> str:
    chars = []
    for p, q in enumerate(partner):
        chars.append("|" if q is None else ("(" if q > p else ")"))
    return "".join(chars)


_HALF_WORDS: dict[tuple[int, int], dict[str, tuple[int, ...]]] = {}


def half_words(n: int, through: int) -> dict[str, tuple[int, ...]]:
    """Words for diagrams whose bottom is ``|^t ()()...()`` and top is any pattern.

    ``(i_1, ..., i_r)`` means ``E_{i_1} ... E_{i_r}``; no loops are created.
    Found by breadth-first search over top patterns: multiplying by ``E_i``
    on top only rearranges the top edge.
    """
    key = (n, through)
    if key in _HALF_WORDS:
        return _HALF_WORDS[key]
    if (n - through) % 2 or not 0 <= through <= n:
        raise DiagramError("through-strand count must match parity")
    m = (n - through) // 2
    start = "|" * through + "()" * m
    words = {start: tuple(through + 1 + 2 * s for s in range(m))}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        partner = _pattern_pairs(cur)
        for p in range(n - 1):
            a, b = partner[p], partner[p + 1]
            if a is None and b is None or a == p + 1:
                continue
            new = list(partner)
            if a is None:
                new[b] = None
            elif b is None:
                new[a] = None
            else:
                new[a], new[b] = b, a
            new[p], new[p + 1] = p + 1, p
            pat = _pairs_to_pattern(new)
            if pat not in words:
                words[pat] = (p + 1,) + words[cur]
                queue.append(pat)
    _HALF_WORDS[key] = words
    return words


def diagram_word(dgm: TLDiagram) -> tuple[tuple[int, ...], int]:
    """``(word, loops)`` with ``E_{w_1} ... E_{w_r} = d^loops * dgm``.

    The diagram is the product of its top half and the adjoint of its bottom
    half; the two halves meet in ``loops`` closed circles.
    """
    if dgm.bottom != dgm.top:
        raise DiagramError("words exist only for square diagrams")
    n = dgm.bottom
    t = dgm.through_strands()
    text = dgm.to_text()
    top, _, bottom = text.partition("/")
    bottom = bottom or top
    words = half_words(n, t)
    return words[top] + tuple(reversed(words[bottom])), (n - t) // 2


# --------------------------------------------------------- representation

def represent(tower, x: TLElement, level: int | None = None):
    """Image of ``x`` in ``M_n`` (``n`` = number of strands) under ``e_i -> e_i``.

    Each diagram is written as ``d^-l E_{i_1} ... E_{i_r}`` and sent to
    ``d^{r-l} e_{i_1} ... e_{i_r}``.  With ``level`` given, the image is further
    included into that level.
    """
    from .multimatrix import AlgebraElement

    blocks = represent_sparse(tower, x, level)
    target = x.bottom if level is None else level
    return AlgebraElement(tower.levels[target], [m.toarray() for m in blocks])


def represent_sparse(tower, x: TLElement, level: int | None = None) -> list[sp.csr_matrix]:
    """Blocks of :func:`represent` as sparse matrices."""
    if x.bottom != x.top:
        raise DiagramError("only square diagrams are represented in a tower")
    n = x.bottom
    if abs(tower.modulus - x.modulus) > 1e-9 * max(1.0, x.modulus):
        raise DiagramError(f"modulus mismatch: tower {tower.modulus}, diagram {x.modulus}")
    target = n if level is None else level
    if max(n, target) > tower.depth:
        raise DiagramError(f"need depth {max(n, target)}, tower has {tower.depth}")
    if target < n:
        raise DiagramError(f"a diagram on {n} strands does not lie in level {target}")
    alg = tower.levels[target]
    acc = [sp.csr_matrix((s, s)) for s in alg.sizes]
    for dgm, c in x.terms.items():
        mats = _represent_diagram(tower, dgm, target)
        acc = [a + c * m for a, m in zip(acc, mats)]
    return acc


def _represent_diagram(tower, dgm: TLDiagram, level: int) -> list[sp.csr_matrix]:
    cache = tower._sparse_cache.setdefault("diagrams", {})
    key = (dgm, level)
    if key in cache:
        return cache[key]
    word, loops = diagram_word(dgm)
    alg = tower.levels[level]
    d = tower.modulus
    out = []
    for b, s in enumerate(alg.sizes):
        m = sp.identity(s, format="csr")
        for i in word:
            m = m @ tower.sparse_e(i, level)[b]
        out.append(sp.csr_matrix(m * d ** (len(word) - loops)))
    cache[key] = out
    return out


def image_dimension(tower, n: int) -> int:
    """Numerical rank of the images of all ``TL_n`` diagrams in ``M_n``."""
    from .multimatrix import numerical_rank

    if n == 0:
        return 1
    vecs = []
    for dgm in basis_diagrams(n, n):
        mats = _represent_diagram(tower, dgm, n)
        vecs.append(np.concatenate([m.toarray().ravel() for m in mats]))
    return numerical_rank(np.array(vecs))
