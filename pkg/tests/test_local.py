from fractions import Fraction as F
from itertools import islice, permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opi_triangle import local as L, opi


def test_constant_strategy():
    t = L.eval_strategy(L.GridStrategy.constant(3))
    assert t.p[0, 0, 0] == 1
    assert t.p.sum() == 1


def test_example_strategy_distribution():
    t = L.eval_strategy(L.example_strategy())
    nonzero = {(a, b, c): t.p[a, b, c] for a in range(4) for b in range(4) for c in range(4) if t.p[a, b, c]}
    assert nonzero[(0, 0, 0)] == nonzero[(3, 3, 3)] == F(1, 8)
    others = [k for k in nonzero if k not in ((0, 0, 0), (3, 3, 3))]
    assert len(others) == 6
    assert all(len(set(k)) == 3 and nonzero[k] == F(1, 8) for k in others)
    assert opi.finner_margin_general(t) == 0
    assert opi.opi_deviation(t) > 0


def test_opi_deviation_examples():
    assert opi.opi_deviation(L.eval_strategy(L.GridStrategy.constant(2))) == F(3, 4)


def test_strategy_validation():
    with pytest.raises(ValueError):
        L.GridStrategy(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        L.GridStrategy(np.full((3, 2, 2), 4))


def test_code_roundtrip():
    s = L.example_strategy()
    assert L.GridStrategy.from_code(2, s.code) == s


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4).flatmap(lambda k: st.tuples(
    st.just(k),
    st.lists(st.integers(0, 3), min_size=3 * k * k, max_size=3 * k * k),
    st.permutations(range(k)),
    st.integers(0, 2),
    st.permutations(range(4)),
)))
def test_relabeling_equivariance(args):
    k, digits, sym_perm, axis, out_perm = args
    s = L.GridStrategy(np.array(digits).reshape(3, k, k))
    t = L.eval_strategy(s)
    assert t.p.sum() == 1
    # renaming a source's symbols changes nothing
    assert (L.eval_strategy(s.permute_symbols(axis, sym_perm)).p == t.p).all()
    # relabeling outputs permutes the distribution
    r = L.eval_strategy(s.relabel_outputs(out_perm)).p
    inv = np.argsort(out_perm)
    assert (r[np.ix_(out_perm, out_perm, out_perm)] == t.p).all() or (
        r == t.p[np.ix_(inv, inv, inv)]
    ).all()
    assert opi.finner_margin_general(t) >= -1e-12


def test_batch_statistics_match_exact():
    rng = np.random.default_rng(5)
    tables = rng.integers(0, 4, size=(20, 3, 3, 3), dtype=np.int8)
    e2, e3, dev, margin = L.batch_statistics(L.kernels.outcome_counts(tables), 3)
    for i, t in enumerate(tables):
        d = L.eval_strategy(L.GridStrategy(t))
        a2, a3 = opi.correlator_averages(d)
        assert e2[i] == pytest.approx(a2, abs=1e-12)
        assert e3[i] == pytest.approx(a3, abs=1e-12)
        assert dev[i] == pytest.approx(float(opi.opi_deviation(d)), abs=1e-12)
        assert margin[i] == pytest.approx(opi.finner_margin_general(d), abs=1e-12)


def test_scan_k1_exhaustive():
    recs = list(L.scan_local(1))
    assert len(recs) == 64
    assert not any(r.opi for r in recs)
    assert all(r.finner_margin >= -1e-12 for r in recs)


def test_scan_random_deterministic():
    a = list(L.scan_local(3, "random", seed=11, count=50))
    b = list(L.scan_local(3, "random", seed=11, count=50))
    assert a == b
    c = list(L.scan_local(3, "random", seed=12, count=50))
    assert a != c


def test_scan_random_large_k_margin():
    for k in (4, 6, 8):
        for *_, margin in L.scan_arrays(k, "random", seed=k, count=20000):
            assert margin.min() >= -1e-12


def test_scan_exhaustive_refuses_large_k():
    with pytest.raises(ValueError):
        next(L.scan_local(3))


def test_k2_scan_contains_witness():
    witness = L.example_strategy().code
    rec = next(r for r in islice(L.scan_local(2), witness, witness + 1))
    assert rec.strategy == witness
    assert rec.finner_margin == pytest.approx(0, abs=1e-15)
    assert not rec.opi


def test_saturating_k2():
    found = L.search_finner_saturating(2, False)
    assert L.example_strategy() in found
    assert L.search_finner_saturating(2, True) == []


def test_box_shape():
    v = L.box_shape_check(L.example_strategy(), 0)
    assert v.verdict == "cube" and v.sides == (1, 1, 1) and v.volume == F(1, 8)
    v = L.box_shape_check(L.GridStrategy.constant(3), 0)
    assert v.verdict == "cube" and v.sides == (3, 3, 3) and v.volume == 1
    assert L.box_shape_check(L.example_strategy(), 1).verdict == "other"


def test_box_shape_non_box():
    # cells (0,0,0) and (1,1,0) only: not a product set
    s = L.GridStrategy.from_functions(
        2, lambda b, g: 0 if (b, g) in ((0, 0), (1, 0)) else 1,
        lambda a, g: 0 if (a, g) in ((0, 0), (1, 0)) else 2,
        lambda a, b: 0 if a == b else 3,
    )
    assert L.box_shape_check(s, 0).verdict == "other"


@pytest.fixture(scope="module")
def k4_saturating():
    return L.search_finner_saturating(4, False)


def test_k4_saturating_are_cubes(k4_saturating):
    assert k4_saturating
    for s in k4_saturating[:: max(1, len(k4_saturating) // 50)]:
        counts = L.outcome_counts(s)
        assert all(counts[21 * x] == 8 for x in range(4))
        for x in range(4):
            v = L.box_shape_check(s, x)
            assert v.verdict == "cube" and v.sides == (2, 2, 2)


def test_k4_budget_checkpoint():
    with pytest.raises(L.BudgetExceeded) as info:
        L.search_finner_saturating(4, True, budget=0.0)
    ckpt = info.value.checkpoint
    assert 0 < ckpt.position
    assert L.search_finner_saturating(4, True, checkpoint=ckpt) == []


def test_search_other_k():
    with pytest.raises(ValueError):
        L.search_finner_saturating(3, True)
