"""The projection category of a Markov tower.

Objects are integers ``n``.  A morphism ``[a] -> [b]`` (``a = b mod 2``) is
an element of ``M_{(a+b)/2}``.  Composition uses conditional expectations,
powers of ``d`` and Temperley-Lieb diagrams represented in the tower.

Diagram products follow :mod:`markovtower.tljdiag`: in ``a b`` the factor
``a`` is drawn above ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .multimatrix import AlgebraElement, numerical_rank
from .report import Report
from .tljdiag import TLElement, basis_diagrams, nested, represent, represent_sparse
from .tower import MarkovTower, TowerError

DEFAULT_TOLERANCE = 1e-9


class CategoryError(ValueError):
    pass


@dataclass
class ProjMorphism:
    source: int
    target: int
    carrier: AlgebraElement

    @property
    def level(self) -> int:
        return (self.source + self.target) // 2

    @property
    def direction(self) -> str:
        if self.target > self.source:
            return "up"
        if self.target < self.source:
            return "down"
        return "endo"

    def dagger(self) -> "ProjMorphism":
        return ProjMorphism(self.target, self.source, self.carrier.adjoint())

    def __add__(self, other: "ProjMorphism") -> "ProjMorphism":
        self._same(other)
        return ProjMorphism(self.source, self.target, self.carrier + other.carrier)

    def __sub__(self, other: "ProjMorphism") -> "ProjMorphism":
        self._same(other)
        return ProjMorphism(self.source, self.target, self.carrier - other.carrier)

    def __mul__(self, c: complex) -> "ProjMorphism":
        return ProjMorphism(self.source, self.target, self.carrier * c)

    __rmul__ = __mul__

    def _same(self, other: "ProjMorphism") -> None:
        if (self.source, self.target) != (other.source, other.target):
            raise CategoryError("morphisms have different signatures")

    def dist(self, other: "ProjMorphism") -> float:
        self._same(other)
        return self.carrier.dist(other.carrier)


def morphism(tower: MarkovTower, source: int, target: int, carrier: AlgebraElement) -> ProjMorphism:
    if source < 0 or target < 0:
        raise CategoryError("objects are non-negative integers")
    if (source - target) % 2:
        raise CategoryError(f"parity mismatch between [{source}] and [{target}]")
    level = (source + target) // 2
    if tower.level_of(carrier) != level:
        raise CategoryError(f"a morphism [{source}] -> [{target}] lives in M_{level}")
    return ProjMorphism(source, target, carrier)


def identity(tower: MarkovTower, n: int) -> ProjMorphism:
    return ProjMorphism(n, n, tower.levels[n].one())


def random_morphism(tower: MarkovTower, source: int, target: int, rng: np.random.Generator, real: bool = True) -> ProjMorphism:
    level = (source + target) // 2
    if level > tower.depth:
        raise TowerError(f"[{source}] -> [{target}] needs depth {level}")
    return morphism(tower, source, target, tower.levels[level].random(rng, real=real))


# ------------------------------------------------------------ diagrams

def tl_element(tower: MarkovTower, top: str, bottom: str) -> AlgebraElement:
    """Image in the tower of the diagram with the given top and bottom strings."""
    cache = tower._dense_cache.setdefault("projcat-diagrams", {})
    key = (top, bottom)
    if key not in cache:
        x = TLElement.parse(f"{top}/{bottom}" if top != bottom else top, tower.modulus)
        cache[key] = represent(tower, x)
    return cache[key]


def cup_through(tower: MarkovTower, n: int, i: int, j: int) -> AlgebraElement:
    """``n`` strands, ``i`` caps then ``j`` strands on top; ``j`` strands then ``i`` cups below."""
    return tl_element(tower, "|" * n + nested(i) + "|" * j, "|" * n + "|" * j + nested(i))


def through_cup(tower: MarkovTower, n: int, i: int, j: int) -> AlgebraElement:
    """``n`` strands, ``j`` strands then ``i`` caps on top; ``i`` cups then ``j`` strands below."""
    return tl_element(tower, "|" * n + "|" * j + nested(i), "|" * n + nested(i) + "|" * j)


def _identity_if_trivial(tower: MarkovTower, top: str, bottom: str) -> AlgebraElement | None:
    if top == bottom and set(top) <= {"|"}:
        return None
    return tl_element(tower, top, bottom)


def _sparse_diagram(tower: MarkovTower, top: str, bottom: str) -> list | None:
    """Sparse blocks of a diagram image, or ``None`` for the identity."""
    if top == bottom and set(top) <= {"|"}:
        return None
    cache = tower._sparse_cache.setdefault("projcat-diagrams", {})
    key = (top, bottom)
    if key not in cache:
        x = TLElement.parse(f"{top}/{bottom}" if top != bottom else top, tower.modulus)
        cache[key] = represent_sparse(tower, x)
    return cache[key]


def _mul(*factors: AlgebraElement | list | None) -> AlgebraElement:
    """Product of dense elements and sparse diagram blocks, all in one level."""
    factors = [f for f in factors if f is not None]
    alg = next(f.algebra for f in factors if isinstance(f, AlgebraElement))
    blocks = []
    for b in range(alg.nblocks):
        acc = None
        for f in factors:
            m = f.blocks[b] if isinstance(f, AlgebraElement) else f[b]
            acc = m if acc is None else acc @ m
        blocks.append(acc.toarray() if hasattr(acc, "toarray") else np.asarray(acc))
    return AlgebraElement(alg, blocks)


# ------------------------------------------------------------ composition

def _times_included(tower: MarkovTower, y: AlgebraElement, x: AlgebraElement, left: bool) -> AlgebraElement:
    """``y @ include(x)`` (or ``include(x) @ y`` when ``left``) without forming ``include(x)``."""
    top, m = tower.level_of(y), tower.level_of(x)
    if m == top:
        return x @ y if left else y @ x
    layout = tower.inclusion(m, top).layout
    blocks = []
    for t, yb in enumerate(y.blocks):
        out = np.zeros(yb.shape, dtype=np.result_type(yb, x.blocks[0]))
        for slot in layout[t]:
            xb = x.blocks[slot.lower]
            sl = slice(slot.offset, slot.offset + xb.shape[0])
            if left:
                out[sl, :] = xb @ yb[sl, :]
            else:
                out[:, sl] = yb[:, sl] @ xb
        blocks.append(out)
    return AlgebraElement(y.algebra, blocks)


def _up_up(tower: MarkovTower, x: AlgebraElement, y: AlgebraElement, n: int, i: int, j: int) -> AlgebraElement:
    top = n + 2 * i + j
    d = tower.modulus
    diag = _sparse_diagram(tower, "|" * n + nested(i) + "|" * j, "|" * n + "|" * j + nested(i))
    z = _mul(_times_included(tower, tower.include(y, top), x, left=False), diag)
    return tower.expect(z, n + i + j) * d**i


def _up_then_down(tower: MarkovTower, x: AlgebraElement, y: AlgebraElement, n: int, i: int, j: int) -> AlgebraElement:
    top = n + 2 * i + j
    d = tower.modulus
    diag = _sparse_diagram(tower, "|" * n + "|" * j + nested(i), "|" * n + nested(i) + "|" * j)
    z = _mul(_times_included(tower, tower.include(y, top), x, left=False), diag)
    return tower.expect(z, n + i) * d**i


def _down_then_up(tower: MarkovTower, x: AlgebraElement, y: AlgebraElement, n: int, i: int, j: int) -> AlgebraElement:
    top = n + 2 * i + j
    d = tower.modulus
    diag = _sparse_diagram(tower, "|" * n + "|" * j + nested(i), "|" * n + nested(i) + "|" * j)
    return _times_included(tower, _mul(tower.include(y, top), diag), x, left=False) * d ** (-i)


def compose(tower: MarkovTower, g: ProjMorphism, f: ProjMorphism) -> ProjMorphism:
    """``g o f`` for ``f: [a] -> [b]`` and ``g: [b] -> [c]``."""
    if f.target != g.source:
        raise CategoryError(f"cannot compose [{f.source}]->[{f.target}] with [{g.source}]->[{g.target}]")
    a, b, c = f.source, f.target, g.target
    if a <= b <= c:
        carrier = _up_up(tower, f.carrier, g.carrier, a, (b - a) // 2, (c - b) // 2)
        return ProjMorphism(a, c, carrier)
    if a >= b >= c:
        return compose(tower, f.dagger(), g.dagger()).dagger()
    if a < b > c:
        if c >= a:
            carrier = _up_then_down(tower, f.carrier, g.carrier, a, (c - a) // 2, (b - c) // 2)
            return ProjMorphism(a, c, carrier)
        return compose(tower, f.dagger(), g.dagger()).dagger()
    # a > b < c
    if c >= a:
        carrier = _down_then_up(tower, f.carrier, g.carrier, b, (a - b) // 2, (c - a) // 2)
        return ProjMorphism(a, c, carrier)
    return compose(tower, f.dagger(), g.dagger()).dagger()


def left_kink_residual(tower: MarkovTower, x: AlgebraElement, n: int, i: int, j: int) -> float:
    """Both sides of the left-kink identity for ``x`` in ``M_{n+2i+j}``."""
    top = n + 2 * i + j
    if tower.level_of(x) != top:
        raise CategoryError(f"x must lie in M_{top}")
    big = n + 2 * i + 2 * j
    d = tower.modulus
    inner = tower.expect(x @ cup_through(tower, n, i, j), n + i + j) * d**i
    kink = tl_element(tower, "|" * n + nested(i + j), "|" * n + nested(i) + nested(j))
    rhs_diag = tl_element(tower, "|" * n + nested(i) + nested(j), "|" * n + nested(i) + nested(j))
    lhs = tower.include(inner, big) @ kink
    rhs = tower.include(x, big) @ rhs_diag
    return lhs.dist(rhs)


# ------------------------------------------------------------ linking map

class LinkingMap:
    """The map from the 4x4 linking algebra into ``p Mat_4(M_N) p``.

    Objects are ``[n], [n+2i], [n+2i+2j], [n+2i+2j+2k]`` and ``N`` is the
    last of them.  Images are stored in compressed coordinates: entry
    ``(a, b)`` of ``pi(x)`` is ``R_a^* pi(x)_{ab} R_b`` blockwise, where the
    columns of ``R_a`` are an orthonormal basis of the range of ``p_a``.
    """

    def __init__(self, tower: MarkovTower, n: int, i: int, j: int, k: int, tolerance: float = DEFAULT_TOLERANCE):
        if min(n, i, j, k) < 0:
            raise CategoryError("parameters must be non-negative")
        self.tower = tower
        self.params = (n, i, j, k)
        self.steps = (i, j, k)
        self.objects = (n, n + 2 * i, n + 2 * i + 2 * j, n + 2 * i + 2 * j + 2 * k)
        self.N = self.objects[3]
        if self.N > tower.depth:
            raise TowerError(f"linking map needs depth {self.N}, have {tower.depth}")
        d = tower.modulus
        alg = tower.levels[self.N]
        self.projections = []
        self.ranges = []
        for a in range(4):
            la = self.objects[a]
            p = tl_element(tower, "|" * la + self._pattern(a), "|" * la + self._pattern(a)) * d ** (-(self.N - la) / 2)
            self.projections.append(p)
            rs = []
            for blk in p.blocks:
                w, v = np.linalg.eigh((blk + blk.conj().T) / 2)
                rs.append(v[:, w > 0.5])
            self.ranges.append(rs)
        self.algebra = alg
        self._factors = {}
        for a in range(4):
            for b in range(4):
                self._factors[(a, b)] = self._entry_factors(a, b)

    def _pattern(self, a: int) -> str:
        return "".join(nested(s) for s in self.steps[a:])

    def level(self, a: int, b: int) -> int:
        return (self.objects[a] + self.objects[b]) // 2

    def entry_diagrams(self, a: int, b: int) -> tuple[AlgebraElement | None, AlgebraElement | None, float]:
        """``(U, V, c)`` with ``pi(x)_{ab} = c U x V`` (``None`` stands for 1)."""
        la, lb = self.objects[a], self.objects[b]
        tower = self.tower
        scale = tower.modulus ** (-(self.N - min(la, lb)) / 2)
        if la <= lb:
            h = (lb - la) // 2
            top = "|" * la + self._pattern(a)
            bottom = "|" * la + nested(h) + self._pattern(b)
            return _identity_if_trivial(tower, top, bottom), None, scale
        h = (la - lb) // 2
        top = "|" * lb + nested(h) + self._pattern(a)
        bottom = "|" * lb + self._pattern(b)
        return None, _identity_if_trivial(tower, top, bottom), scale

    def _entry_factors(self, a: int, b: int):
        u, v, c = self.entry_diagrams(a, b)
        left, right = [], []
        for t in range(self.algebra.nblocks):
            ra, rb = self.ranges[a][t], self.ranges[b][t]
            left.append(c * (ra.conj().T if u is None else ra.conj().T @ u.blocks[t]))
            right.append(rb if v is None else v.blocks[t] @ rb)
        m = self.level(a, b)
        layout = self.tower.inclusion(m, self.N).layout if m < self.N else None
        return left, right, layout

    def entry(self, a: int, b: int, x: AlgebraElement) -> list[np.ndarray]:
        """Compressed image of ``x`` placed in entry ``(a, b)``."""
        if self.tower.level_of(x) != self.level(a, b):
            raise CategoryError(f"entry ({a},{b}) takes elements of M_{self.level(a, b)}")
        left, right, layout = self._factors[(a, b)]
        out = []
        for t in range(self.algebra.nblocks):
            if layout is None:
                if left[t].shape[0] <= right[t].shape[1]:
                    out.append((left[t] @ x.blocks[t]) @ right[t])
                else:
                    out.append(left[t] @ (x.blocks[t] @ right[t]))
                continue
            acc = np.zeros((left[t].shape[0], right[t].shape[1]), dtype=np.result_type(left[t], x.blocks[0]))
            for slot in layout[t]:
                blk = x.blocks[slot.lower]
                s = blk.shape[0]
                if s == 0:
                    continue
                lt, rt = left[t][:, slot.offset : slot.offset + s], right[t][slot.offset : slot.offset + s, :]
                acc += (lt @ blk) @ rt if lt.shape[0] <= rt.shape[1] else lt @ (blk @ rt)
            out.append(acc)
        return out

    def entry_full(self, a: int, b: int, x: AlgebraElement) -> AlgebraElement:
        """Uncompressed image ``c U x V`` in ``M_N``."""
        u, v, c = self.entry_diagrams(a, b)
        return _mul(u, self.tower.include(x, self.N), v) * c

    def apply(self, x: dict) -> dict:
        """Compressed images of all entries of a linking element ``{(a, b): x_ab}``."""
        return {(a, b): self.entry(a, b, xab) for (a, b), xab in x.items()}

    def random_element(self, rng: np.random.Generator, real: bool = True) -> dict:
        return {
            (a, b): self.tower.levels[self.level(a, b)].random(rng, real=real) for a in range(4) for b in range(4)
        }

    def unit(self) -> dict:
        alg = self.tower.levels
        return {
            (a, b): (alg[self.objects[a]].one() if a == b else alg[self.level(a, b)].zero())
            for a in range(4)
            for b in range(4)
        }

    def morphism(self, a: int, b: int, x: AlgebraElement) -> ProjMorphism:
        """Entry ``(a, b)`` as a morphism ``[L_b] -> [L_a]``."""
        return ProjMorphism(self.objects[b], self.objects[a], x)

    def product(self, x: dict, y: dict) -> dict:
        """Linking product ``(xy)_{ac} = sum_b x_{ab} o y_{bc}``."""
        out = {}
        for a in range(4):
            for c in range(4):
                acc = None
                for b in range(4):
                    g = self.morphism(a, b, x[(a, b)])
                    f = self.morphism(b, c, y[(b, c)])
                    h = compose(self.tower, g, f).carrier
                    acc = h if acc is None else acc + h
                out[(a, c)] = acc
        return out

    def dagger(self, x: dict) -> dict:
        return {(b, a): xab.adjoint() for (a, b), xab in x.items()}

    def compressed_product(self, px: dict, py: dict) -> dict:
        out = {}
        for a in range(4):
            for c in range(4):
                blocks = None
                for b in range(4):
                    prod = [u @ v for u, v in zip(px[(a, b)], py[(b, c)])]
                    blocks = prod if blocks is None else [s + t for s, t in zip(blocks, prod)]
                out[(a, c)] = blocks
        return out

    @staticmethod
    def distance(px: dict, py: dict) -> float:
        worst = 0.0
        for key in px:
            for u, v in zip(px[key], py[key]):
                if u.size:
                    worst = max(worst, float(np.max(np.abs(u - v))))
        return worst

    def homomorphism_residual(self, x: dict, y: dict) -> float:
        return self.distance(self.apply(self.product(x, y)), self.compressed_product(self.apply(x), self.apply(y)))

    def dagger_residual(self, x: dict) -> float:
        px = self.apply(x)
        pd = self.apply(self.dagger(x))
        adj = {(b, a): [m.conj().T for m in blocks] for (a, b), blocks in px.items()}
        return self.distance(pd, adj)

    def unit_residual(self) -> float:
        """``pi(1)`` against the projections ``p_a``, both uncompressed."""
        worst = 0.0
        for a in range(4):
            for b in range(4):
                la = self.objects[a]
                x = self.tower.levels[self.level(a, b)]
                x = x.one() if a == b else x.zero()
                img = self.entry_full(a, b, x)
                ref = self.projections[a] if a == b else self.algebra.zero()
                worst = max(worst, img.dist(ref))
            p = self.projections[a]
            worst = max(worst, (p @ p).dist(p), p.dist(p.adjoint()))
        return worst

    def injectivity(self, rng: np.random.Generator, exact_limit: int = 400) -> dict:
        """Injectivity of every entry map.

        Each entry ``T`` satisfies ``T^* T = kappa * id`` for a positive
        ``kappa`` (adjoint for the trace inner products), which is checked on
        a random element.  For small source algebras the numerical rank of the
        compressed images of all matrix units is computed as well.
        """
        worst_relative = 0.0
        min_kappa = np.inf
        exact = {}
        d_alg = self.algebra
        for a in range(4):
            for b in range(4):
                m = self.level(a, b)
                src = self.tower.levels[m]
                x = src.random(rng, real=True)
                u, v, c = self.entry_diagrams(a, b)
                tx = self.entry_full(a, b, x)
                back = _mul(None if u is None else u.adjoint(), tx, None if v is None else v.adjoint()) * c
                ttx = self.tower.expect(back, m)
                kappa = float(np.real(x.inner(ttx) / x.inner(x)))
                min_kappa = min(min_kappa, kappa)
                worst_relative = max(worst_relative, (ttx - x * kappa).max_abs() / max(x.max_abs(), 1e-300) / max(kappa, 1e-300))
                if src.dim <= exact_limit:
                    rows = []
                    for blk, r, col in src.matrix_units():
                        img = self.entry(a, b, src.matrix_unit(blk, r, col))
                        rows.append(np.concatenate([z.ravel() for z in img]))
                    exact[(a, b)] = (numerical_rank(np.array(rows)) if rows else 0, src.dim)
        return {"relative_residual": worst_relative, "min_kappa": min_kappa, "exact_ranks": exact}


def linking_map(tower: MarkovTower, n: int, i: int, j: int, k: int) -> LinkingMap:
    return LinkingMap(tower, n, i, j, k)


def verify_linking_map(
    tower: MarkovTower,
    params: Iterable[tuple[int, int, int, int]],
    pairs: int = 100,
    seed: int = 0,
    tolerance: float = 1e-8,
) -> Report:
    report = Report(f"linking map on {tower.name}")
    rng = np.random.default_rng(seed)
    for n, i, j, k in params:
        lm = LinkingMap(tower, n, i, j, k)
        tag = f"({n},{i},{j},{k})"
        hom = 0.0
        dag = 0.0
        for _ in range(pairs):
            x = lm.random_element(rng)
            y = lm.random_element(rng)
            scale = max(1.0, _linking_scale(lm, x) * _linking_scale(lm, y))
            hom = max(hom, lm.homomorphism_residual(x, y) / scale)
            dag = max(dag, lm.dagger_residual(x) / max(1.0, _linking_scale(lm, x)))
        report.add(f"homomorphism {tag}", "pi-hom", hom, tolerance, pairs=pairs)
        report.add(f"dagger {tag}", "pi-dag", dag, tolerance, pairs=pairs)
        report.add(f"unital {tag}", "pi-unit", lm.unit_residual(), tolerance)
        inj = lm.injectivity(rng)
        bad_rank = sum(1 for r, dim in inj["exact_ranks"].values() if r != dim)
        report.add(
            f"injective {tag}",
            "pi-inj",
            max(inj["relative_residual"], float(bad_rank), 0.0 if inj["min_kappa"] > tolerance else 1.0),
            tolerance,
            min_kappa=inj["min_kappa"],
            exact_checked=len(inj["exact_ranks"]),
        )
    return report


def _linking_scale(lm: LinkingMap, x: dict) -> float:
    return max(v.max_abs() for v in x.values())


# ------------------------------------------------------------ module action

@dataclass
class TLMorphism:
    """A morphism ``[a] -> [b]`` of Temperley-Lieb-Jones, carried by ``TL_{(a+b)/2}``."""

    source: int
    target: int
    element: TLElement

    def __post_init__(self) -> None:
        if (self.source - self.target) % 2:
            raise CategoryError("parity mismatch")
        m = (self.source + self.target) // 2
        if self.element.bottom != m or self.element.top != m:
            raise CategoryError(f"a TLJ morphism [{self.source}] -> [{self.target}] is carried by TL_{m}")


def act_identity_on_tl(tower: MarkovTower, n: int, g: TLMorphism) -> ProjMorphism:
    """``1_{[n]} < g``: pad ``g`` with ``n`` strands on the left and represent it."""
    padded = TLElement.identity(n, g.element.modulus).tensor(g.element) if n else g.element
    m = n + (g.source + g.target) // 2
    return ProjMorphism(n + g.source, n + g.target, represent(tower, padded) if m else tower.levels[0].one() * _scalar(padded))


def _scalar(x: TLElement) -> complex:
    return sum(x.terms.values())


def act_on_identity(tower: MarkovTower, f: ProjMorphism, j: int) -> ProjMorphism:
    """``f < 1_{[j]}``."""
    if j < 0:
        raise CategoryError("j must be non-negative")
    if f.direction == "down":
        return act_on_identity(tower, f.dagger(), j).dagger()
    n = f.source
    k = (f.target - f.source) // 2
    level = n + k + j
    if j >= k:
        top, bottom = "|" * n + nested(k) + "|" * (j - k), "|" * n + "|" * (j - k) + nested(k)
    else:
        top, bottom = "|" * n + "|" * (k - j) + nested(j), "|" * n + nested(j) + "|" * (k - j)
    carrier = _mul(tower.include(f.carrier, level), _sparse_diagram(tower, top, bottom))
    return ProjMorphism(n + j, f.target + j, carrier)


def module_action(tower: MarkovTower, left: ProjMorphism | int, right: TLMorphism | int) -> ProjMorphism:
    """``left < right`` where one side is an identity, given by its object.

    ``module_action(tower, f, j)`` is ``f < 1_{[j]}`` and
    ``module_action(tower, n, g)`` is ``1_{[n]} < g``.
    """
    if isinstance(left, ProjMorphism) and isinstance(right, int):
        return act_on_identity(tower, left, right)
    if isinstance(left, int) and isinstance(right, TLMorphism):
        return act_identity_on_tl(tower, left, right)
    if isinstance(left, int) and isinstance(right, int):
        return identity(tower, left + right)
    raise CategoryError("one side of the action must be an identity")


# ------------------------------------------------------------ pivotal trace

def pivotal_trace(tower: MarkovTower, f: ProjMorphism) -> complex:
    if f.source != f.target:
        raise CategoryError("pivotal trace needs an endomorphism")
    return tower.modulus ** f.source * f.carrier.trace()


def coevaluation(tower: MarkovTower, n: int, k: int) -> ProjMorphism:
    """``1_{[n]} < coev_{[k]}`` with ``coev_{[k]} = d^{k/2} 1_k``."""
    return ProjMorphism(n, n + 2 * k, tower.levels[n + k].one() * tower.modulus ** (k / 2))


def verify_pivotal(
    tower: MarkovTower,
    max_object: int = 3,
    max_k: int = 2,
    samples: int = 5,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Report:
    report = Report(f"pivotal trace on {tower.name}")
    rng = np.random.default_rng(seed)
    d = tower.modulus
    limit = tower.depth

    tr1 = 0.0
    tr2 = 0.0
    min_ratio = np.inf
    for m in range(max_object + 1):
        for n in range(m % 2, max_object + 1, 2):
            if (m + n) // 2 > limit or max(m, n) > limit:
                continue
            for _ in range(samples):
                f = random_morphism(tower, m, n, rng)
                g = random_morphism(tower, n, m, rng)
                lhs = pivotal_trace(tower, compose(tower, g, f))
                rhs = pivotal_trace(tower, compose(tower, f, g))
                tr1 = max(tr1, abs(lhs - rhs) / max(1.0, abs(lhs)))
                val = pivotal_trace(tower, compose(tower, f.dagger(), f))
                norm = float(np.real(f.carrier.inner(f.carrier)))
                ratio = float(np.real(val)) / norm
                min_ratio = min(min_ratio, ratio)
                tr2 = max(tr2, abs(np.imag(val)) / norm, max(0.0, -ratio))
    report.add("Tr(g o f) = Tr(f o g)", "Tr1", tr1, tolerance)
    report.add("Tr(f* o f) > 0", "Tr2", tr2 if min_ratio > 0 else max(tr2, 1.0), tolerance, min_ratio=min_ratio)

    tr3 = 0.0
    for n in range(max_object + 1):
        for k in range(1, max_k + 1):
            if n + 2 * k > limit:
                continue
            for _ in range(samples):
                f = random_morphism(tower, n + k, n + k, rng)
                coev = coevaluation(tower, n, k)
                mid = compose(tower, act_on_identity(tower, f, k), coev)
                rhs = pivotal_trace(tower, compose(tower, coev.dagger(), mid))
                lhs = pivotal_trace(tower, f)
                tr3 = max(tr3, abs(lhs - rhs) / max(1.0, abs(lhs)))
    report.add("Tr compatible with the action", "Tr3", tr3, tolerance)
    unit = abs(pivotal_trace(tower, identity(tower, 0)) - 1.0)
    report.add("Tr_[0](1) = 1", "Tr-norm", unit, tolerance)
    return report


# ------------------------------------------------------------ simple objects

@dataclass
class SimpleObject:
    vertex: object
    level: int
    projection: ProjMorphism
    witness: ProjMorphism
    image: ProjMorphism
    trace: float
    dim: float


def simple_objects(tower: MarkovTower, tolerance: float = DEFAULT_TOLERANCE) -> list[SimpleObject]:
    """One minimal projection per principal-graph vertex, with its partial isometry.

    The representative of a vertex that first appears at level ``n`` is a
    rank-one matrix unit ``p`` of that block; ``p`` viewed in ``M_{n+1}`` is a
    morphism ``[n] -> [n+2]`` with ``v^+ v = p`` and ``v v^+ = p e_{n+1}``.
    """
    from .tower import principal_graph

    data = principal_graph(tower, tolerance, details=True)
    out = []
    for vertex, level in data.first_level.items():
        block = data.vertex_of_block[level].index(vertex)
        alg = tower.levels[level]
        p = alg.matrix_unit(block, 0, 0)
        proj = ProjMorphism(level, level, p)
        if level + 2 <= tower.depth:
            v = ProjMorphism(level, level + 2, tower.include(p, level + 1))
            image = ProjMorphism(level + 2, level + 2, tower.include(p, level + 2) @ tower.e(level + 1, level + 2))
        else:
            v = proj
            image = proj
        out.append(SimpleObject(vertex, level, proj, v, image, float(np.real(pivotal_trace(tower, proj))), data.graph.dim[vertex]))
    return out


def verify_simple_objects(tower: MarkovTower, tolerance: float = DEFAULT_TOLERANCE) -> Report:
    report = Report(f"simple objects of {tower.name}")
    worst_iso = 0.0
    worst_tr = 0.0
    worst_dim = 0.0
    for s in simple_objects(tower, tolerance):
        worst_dim = max(worst_dim, abs(s.trace - s.dim))
        if s.witness is s.projection:
            continue
        left = compose(tower, s.witness.dagger(), s.witness)
        right = compose(tower, s.witness, s.witness.dagger())
        worst_iso = max(worst_iso, left.dist(s.projection), right.dist(s.image))
        worst_tr = max(worst_tr, abs(pivotal_trace(tower, s.image) - s.trace))
    report.add("v^+ v = p and v v^+ = p e", "simple-iso", worst_iso, tolerance)
    report.add("isomorphic projections share Tr", "simple-Tr", worst_tr, tolerance)
    report.add("Tr of simple = dim of vertex", "simple-dim", worst_dim, tolerance)
    return report


# ------------------------------------------------------------ category laws

def random_tl_morphism(source: int, target: int, modulus: float, rng: np.random.Generator) -> TLMorphism:
    m = (source + target) // 2
    diagrams = basis_diagrams(m)
    coeffs = rng.standard_normal(len(diagrams))
    return TLMorphism(source, target, TLElement(m, m, dict(zip(diagrams, coeffs)), modulus))


def _signatures(max_object: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(max_object + 1) for b in range(max_object + 1) if (a - b) % 2 == 0]


def _relative(lhs: ProjMorphism, rhs: ProjMorphism) -> float:
    return lhs.dist(rhs) / max(1.0, lhs.carrier.max_abs())


def verify_category_laws(
    tower: MarkovTower,
    max_object: int = 2,
    samples: int = 3,
    seed: int = 0,
    tolerance: float = 1e-8,
) -> Report:
    """Associativity, the dagger contract and the laws of the Temperley-Lieb action."""
    report = Report(f"category laws on {tower.name}")
    rng = np.random.default_rng(seed)
    sigs = _signatures(max_object)
    depth = tower.depth

    def fits(*objects: int) -> bool:
        return 2 * max(objects) <= depth

    assoc = dagger = unit = 0.0
    for a, b in sigs:
        for c in range(b % 2, max_object + 1, 2):
            for e in range(c % 2, max_object + 1, 2):
                if not fits(a, b, c, e):
                    continue
                for _ in range(samples):
                    f = random_morphism(tower, a, b, rng)
                    g = random_morphism(tower, b, c, rng)
                    h = random_morphism(tower, c, e, rng)
                    gf = compose(tower, g, f)
                    assoc = max(assoc, _relative(compose(tower, h, gf), compose(tower, compose(tower, h, g), f)))
                    dagger = max(dagger, _relative(gf.dagger(), compose(tower, f.dagger(), g.dagger())))
                    unit = max(unit, _relative(compose(tower, identity(tower, b), f), f),
                               _relative(compose(tower, f, identity(tower, a)), f))
    report.add("h o (g o f) = (h o g) o f", "assoc", assoc, tolerance)
    report.add("(g o f)^+ = f^+ o g^+", "dagger", dagger, tolerance)
    report.add("1 o f = f = f o 1", "unit", unit, tolerance)

    exchange = bifunctor = nesting = trivial = 0.0
    for n, m in sigs:
        for a, b in sigs:
            if not fits(n + a, n + b, m + a, m + b):
                continue
            for _ in range(samples):
                f = random_morphism(tower, n, m, rng)
                g = random_tl_morphism(a, b, tower.modulus, rng)
                lhs = compose(tower, act_on_identity(tower, f, b), act_identity_on_tl(tower, n, g))
                rhs = compose(tower, act_identity_on_tl(tower, m, g), act_on_identity(tower, f, a))
                exchange = max(exchange, _relative(lhs, rhs))
        for j in range(max_object + 1):
            if not fits(n + j, m + j):
                continue
            f = random_morphism(tower, n, m, rng)
            trivial = max(trivial, _relative(act_on_identity(tower, f, 0), f))
            for c in range(m % 2, max_object + 1, 2):
                if not fits(c + j, n + j, m + j):
                    continue
                g = random_morphism(tower, m, c, rng)
                lhs = compose(tower, act_on_identity(tower, g, j), act_on_identity(tower, f, j))
                bifunctor = max(bifunctor, _relative(lhs, act_on_identity(tower, compose(tower, g, f), j)))
            for k in range(max_object + 1 - j):
                if not fits(n + j + k, m + j + k):
                    continue
                twice = act_on_identity(tower, act_on_identity(tower, f, j), k)
                nesting = max(nesting, _relative(twice, act_on_identity(tower, f, j + k)))
    report.add("(f < 1)(1 < g) = (1 < g)(f < 1)", "exchange", exchange, tolerance)
    report.add("(g < 1)(f < 1) = (g o f) < 1", "bifunctor", bifunctor, tolerance)
    report.add("(f < 1_j) < 1_k = f < 1_(j+k)", "action-assoc", nesting, tolerance)
    report.add("f < 1_0 = f", "action-unit", trivial, tolerance)
    return report
