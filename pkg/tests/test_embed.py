import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import tower_of
from markovtower.embed import (
    Box,
    EmbedError,
    GPABoxes,
    ModuleEmbedding,
    RelativeCommutantPA,
    TLBoxes,
    canonical_pa,
    compression_iso,
    embed_module,
    find_phase_permutation,
    find_standard_level,
    gpa_isomorphism,
    invariance_check,
    left_cap_basis_residual,
    pimsner_popa_basis,
    shift_iso,
    standard_level_report,
    strongly_markov_inclusion,
    verify_embedding,
    verify_planar_map,
)
from markovtower.gpa import GraphPlanarAlgebra, box_dimension, gpa_cap_left, gpa_jones_projection
from markovtower.graph import builtin
from markovtower.multimatrix import MultiMatrixAlgebra, Slot, UnitalInclusion
from markovtower.tljdiag import image_dimension
from markovtower.tower import build_tower

seeds = st.integers(0, 2**32 - 1)


# ---------------------------------------------------------------- inclusions

def test_a2_basis_is_one():
    smi = strongly_markov_inclusion(tower_of("A2", 4), 1)
    assert len(smi.basis) == 1
    assert smi.basis[0].dist(smi.inclusion.upper.one()) < 1e-12
    assert smi.watatani_index == pytest.approx(1.0, abs=1e-12)


def test_a3_index_two(rng):
    t = tower_of("A3", 6)
    smi = strongly_markov_inclusion(t, 2)
    assert smi.watatani_index == pytest.approx(2.0, abs=1e-10)
    upper = smi.inclusion.upper
    total = upper.zero()
    for b in smi.basis:
        total = total + b @ b.adjoint()
    assert total.dist(upper.one() * 2.0) < 1e-10
    assert smi.basic_construction_residual() < 1e-10
    for _ in range(5):
        assert smi.reconstruction_residual(upper.random(rng)) < 1e-9


@pytest.mark.parametrize("name", ["A3", "A4", "D4", "D5", "E6"])
def test_index_is_d_squared_from_standard_level(name):
    t = tower_of(name, 7)
    for k in range(2 * find_standard_level(t), t.depth):
        smi = strongly_markov_inclusion(t, k)
        assert smi.watatani_index == pytest.approx(t.modulus**2, abs=1e-9), k
        if k + 1 < t.depth:
            assert smi.basic_construction_residual() < 1e-9


def test_matrix_unit_seeds_give_a_basis_too(rng):
    t = tower_of("D4", 6)
    incl = t.inclusions[3]
    units = (incl.upper.matrix_unit(*u) for u in incl.upper.matrix_units())
    basis = pimsner_popa_basis(incl, seeds=units)
    upper = incl.upper
    x = upper.random(rng)
    rebuilt = upper.zero()
    for b in basis:
        rebuilt = rebuilt + b @ incl.embed(incl.expect(b.adjoint() @ x))
    assert rebuilt.dist(x) < 1e-9


def test_non_markov_inclusion_is_diagnosed():
    lower = MultiMatrixAlgebra(["a", "b"], [1, 1], [0.5, 0.5])
    upper = MultiMatrixAlgebra(["x", "y"], [2, 1], [0.25, 0.5])
    incl = UnitalInclusion(lower, upper, [[Slot(0, 0), Slot(1, 1)], [Slot(1, 0)]])
    from markovtower.tower import MarkovTower

    tower = MarkovTower([lower, upper], [incl], {}, 1.0)
    with pytest.raises(EmbedError, match="not scalar"):
        strongly_markov_inclusion(tower, 0)


@pytest.mark.parametrize("name,r", [("A2", 0), ("A3", 1), ("D4", 1), ("E6", 2), ("A5", 2)])
def test_standard_level(name, r):
    assert find_standard_level(tower_of(name, 10)) == r


def test_standard_level_report_labels():
    report = standard_level_report(tower_of("E6", 8), 2)
    assert report.passed
    assert {c.label for c in report.checks} == {"R1", "R2", "R3"}
    assert not standard_level_report(tower_of("E6", 8), 1).passed


# ---------------------------------------------------------------- canonical PA

def test_a3_pa_dimensions():
    pa = canonical_pa(tower_of("A3", 6), 2)
    g = builtin("A3")
    assert pa.dim(0, 1) == 2
    for n in range(4):
        assert pa.dim(n, 1) == box_dimension(g, n, 1)
        if n <= 2:
            assert pa.dim(n, -1) == box_dimension(g, n, -1)


def test_e6_pa_dimensions():
    pa = canonical_pa(tower_of("E6", 8), 4)
    g = builtin("E6")
    for n in range(3):
        for sign in (1, -1):
            assert pa.dim(n, sign) == box_dimension(g, n, sign)


def test_jones_in_relative_commutant():
    pa = canonical_pa(tower_of("D4", 7), 2)
    for n in range(2, 4):
        for i in range(1, n):
            assert pa.membership_residual(pa.jones(i, n)) < 1e-12


@pytest.mark.parametrize("name,level", [("A3", 2), ("D4", 2), ("E6", 4)])
def test_left_cap_independent_of_basis(name, level, rng):
    pa = canonical_pa(tower_of(name, level + 4), level)
    for n in (1, 2):
        assert left_cap_basis_residual(pa, n, rng) < 1e-9


@pytest.mark.parametrize("name,level", [("A3", 2), ("D4", 2), ("E6", 4)])
def test_gpa_isomorphism_intertwines(name, level):
    pa = canonical_pa(tower_of(name, level + 4), level)
    iso = gpa_isomorphism(pa)
    report = verify_planar_map(iso, pa, iso.target, 2, samples=2, name="iso")
    assert report.passed, report.summary()
    one = iso(pa.one(2, 1))
    assert one.value.dist(iso.gpa.space(2, 1).one()) < 1e-12
    e = iso(pa.jones(1, 2))
    assert e.value.dist(gpa_jones_projection(iso.gpa, 1)) < 1e-9


def test_gpa_isomorphism_inverse(rng):
    pa = canonical_pa(tower_of("E6", 8), 4)
    iso = gpa_isomorphism(pa)
    for n in range(3):
        for sign in (1, -1):
            x = pa.random(n, sign, rng)
            assert pa.dist(iso.inverse(iso(x)), x) < 1e-10


def test_shift_isomorphism():
    t = tower_of("A3", 8)
    src = canonical_pa(t, 2)
    sh = shift_iso(src)
    tgt = sh.target
    for n in range(3):
        for sign in (1, -1):
            assert src.dim(n, sign) == tgt.dim(n, sign)
    assert tgt.dist(sh(src.one(2, 1)), tgt.one(2, 1)) < 1e-12
    report = verify_planar_map(sh, src, tgt, 2, samples=2, name="shift")
    assert report.passed, report.summary()


def test_compression_by_one_is_identity(rng):
    t = tower_of("A3", 6)
    pa = canonical_pa(t, 2)
    comp = compression_iso(pa, t.levels[2].one())
    x = pa.random(2, 1, rng)
    assert pa.dist(comp(x), x) < 1e-12


@pytest.mark.parametrize("name,level", [("D4", 2), ("A3", 4)])
def test_compression_isomorphism(name, level):
    t = tower_of(name, level + 4)
    pa = canonical_pa(t, level)
    base = t.levels[level]
    p = base.zero()
    for b, s in enumerate(base.sizes):
        p.blocks[b][0, 0] = 1.0
    comp = compression_iso(pa, p)
    assert comp.target.watatani_index() == pytest.approx(pa.watatani_index(), abs=1e-9)
    report = verify_planar_map(comp, pa, comp.target, 2, samples=2, name="compression")
    assert report.passed, report.summary()


def test_compression_rejects_partial_support():
    t = tower_of("D4", 6)
    base = t.levels[2]
    p = base.block_unit(0)
    with pytest.raises(EmbedError, match="zero central support"):
        compression_iso(canonical_pa(t, 2), p)


# ---------------------------------------------------------------- embedding

def test_embedding_a3():
    emb = embed_module(builtin("A3"), 4)
    assert emb.r == 1
    tl = emb.source
    assert emb.target.dist(emb(tl.one(2, 1)), emb.target.one(2, 1)) < 1e-12
    assert emb(tl.jones(1, 2)).value.dist(gpa_jones_projection(emb.gpa, 1)) < 1e-9
    for n in range(5):
        assert emb.rank(n) == image_dimension(emb.tower, n)
    report = verify_embedding(emb, 3)
    assert report.passed, report.summary()


def test_embedding_modulus_mismatch():
    with pytest.raises(EmbedError, match="modulus"):
        embed_module(builtin("A3"), 2, modulus=1.5)


def test_identity_map_passes():
    tl = TLBoxes(1.3)
    report = verify_planar_map(lambda x: x, tl, tl, 3, samples=2)
    assert report.passed


class MisnormalizedGPA(GPABoxes):
    def cap_left(self, x: Box) -> Box:
        return Box(x.n - 1, -1, gpa_cap_left(x.value) * self.modulus)


def test_fault_injection_fails_left_cap():
    emb = embed_module(builtin("A3"), 3)
    report = verify_planar_map(emb, emb.source, MisnormalizedGPA(emb.gpa), 3, samples=2)
    assert not report.passed
    assert report.first_failure().label == "left-cap"
    assert [c.label for c in report.checks if not c.passed] == ["left-cap"]


# ---------------------------------------------------------------- invariance

def test_invariance_same_level():
    report = invariance_check(builtin("A3"), 1, 1, 2)
    assert report.passed
    assert report.by_label("shift")[0].residual == 0.0


def test_invariance_a3():
    report = invariance_check(builtin("A3"), 1, 2, 2)
    assert report.passed, report.summary()
    assert {c.label for c in report.checks} == {"shift", "index", "equiv"}


@given(seeds, st.integers(1, 8), st.integers(1, 4))
def test_phase_permutation_recovered(seed, rows, cols):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    perm = rng.permutation(rows)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, rows))
    b = np.empty_like(a)
    for i in range(rows):
        b[perm[i]] = phases[i] * a[i]
    w = find_phase_permutation(a, b)
    assert w is not None
    for i in range(rows):
        assert np.allclose(b[w.perm[i]], w.phases[i] * a[i], atol=1e-8)


def test_phase_permutation_rejects_rescaling():
    a = np.array([[1.0, 2.0], [3.0, 1.0]])
    assert find_phase_permutation(a, 2 * a) is None
    assert find_phase_permutation(a, a).identity
