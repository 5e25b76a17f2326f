import numpy as np
import pytest

from opi_triangle import kernels as K
from opi_triangle import local as L
from opi_triangle.opi import CHARACTER_TABLE


@pytest.mark.parametrize("n", [3, 4, 5, 6])
@pytest.mark.parametrize("nsym", [3, 4])
def test_canonical_keys_agree(n, nsym):
    maps = K.dihedral_maps(n)
    assert (K._canonical_keys_numba(n, nsym, maps) == K._canonical_keys_numpy(n, nsym, maps)).all()


@pytest.mark.parametrize("n", [3, 4, 5])
def test_character_sums_agree(n):
    from opi_triangle import orbits

    en = orbits.enumerate_all(n)
    reps = np.array([[int(c) for c in o.canonical] for o in en.outcomes], dtype=np.int64)
    digits = K.digit_table(n).astype(np.int64)
    table = CHARACTER_TABLE.astype(np.int64)
    a = K._character_sums_numba(reps, en.word_ids, len(en.words), digits, table)
    b = K._character_sums_numpy(reps, en.word_ids, len(en.words), digits, table)
    assert (a == b).all()


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_outcome_counts_agree(k):
    tables = np.random.default_rng(k).integers(0, 4, size=(500, 3, k, k), dtype=np.int8)
    a = K._outcome_counts_numba(tables)
    b = K._outcome_counts_numpy(tables)
    assert (a == b).all()
    assert (a.sum(axis=1) == k**3).all()


def test_count_statistics_agree():
    tables = np.random.default_rng(9).integers(0, 4, size=(500, 3, 4, 4), dtype=np.int8)
    counts = K._outcome_counts_numba(tables)
    args = (counts, 64.0, L._W2, L._W3, L._CLASS)
    assert np.allclose(K._count_statistics_numba(*args), K._count_statistics_numpy(*args), atol=1e-14)


def test_saturating_triples_agree():
    masks, cells = L._cell_sets(4)
    a, na = K._saturating_triples_numba(masks, cells, 0, 40, 8, 1 << 14)
    b, nb = K._saturating_triples_numpy(masks, cells, 0, 40, 8, 1 << 14)
    assert na == nb
    assert sorted(map(tuple, a)) == sorted(map(tuple, b))


def test_saturating_triples_capacity_flag():
    masks, cells = L._cell_sets(2)
    _, found = K._saturating_triples_numba(masks, cells, 0, len(masks), 1, 0)
    assert found == -1


def test_digit_table():
    t = K.digit_table(3)
    assert t.shape == (64, 3)
    assert t[27].tolist() == [1, 2, 3]
