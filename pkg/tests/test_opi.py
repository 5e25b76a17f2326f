from fractions import Fraction as F
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from opi_triangle import opi
from opi_triangle.opi import OpiCorrelators, OpiDistribution


@pytest.mark.parametrize(
    "probs, corr",
    [
        ((F(1, 4), 0, 0), (1, 1)),
        ((F(1, 64), F(1, 64), F(1, 64)), (0, 0)),
        ((F(25, 256), F(1, 256), F(5, 256)), (F(1, 4), F(1, 2))),
    ],
)
def test_probs_to_correlators(probs, corr):
    c = opi.probs_to_correlators(OpiDistribution(*probs))
    assert (c.e2, c.e3o) == corr


@pytest.mark.parametrize(
    "corr, probs",
    [
        ((0, 0), (F(1, 64), F(1, 64), F(1, 64))),
        ((1, 1), (F(1, 4), 0, 0)),
        ((F(1, 3), F(2, 3)), (F(1, 8), 0, F(1, 48))),
    ],
)
def test_correlators_to_probs(corr, probs):
    assert opi.correlators_to_probs(OpiCorrelators(*corr)).as_tuple() == probs


def test_normalization_violated():
    with pytest.raises(opi.NormalizationViolated):
        opi.probs_to_correlators(OpiDistribution(F(1, 4), F(1, 64), 0))


def test_invalid_point_is_flag_not_error():
    d = opi.correlators_to_probs(OpiCorrelators(F(1), F(-1)))
    assert not d.valid


@pytest.mark.parametrize(
    "probs, margin",
    [
        ((F(1, 4), 0, 0), F(-1, 8)),
        ((F(1, 8), 0, F(1, 48)), 0),
        ((F(1, 64), F(1, 64), F(1, 64)), F(7, 64)),
    ],
)
def test_finner_margin_opi(probs, margin):
    assert opi.finner_margin_opi(OpiDistribution(*probs)) == margin


def test_special_points():
    pts = opi.special_points()
    assert (pts["vertex_p111"].e2, pts["vertex_p111"].e3o) == (1, 1)
    assert (pts["vertex_p123"].e2, pts["vertex_p123"].e3o) == (F(-1, 3), F(1, 3))
    assert (pts["vertex_p112"].e2, pts["vertex_p112"].e3o) == (F(1, 9), F(-1, 3))
    assert (pts["special"].e2, pts["special"].e3o) == (F(1, 3), F(2, 3))
    assert pts["finner_line"] == (9, 6, 7)
    for name in ("vertex_p111", "vertex_p112", "vertex_p123"):
        assert opi.correlators_to_probs(pts[name]).valid


def test_vertices_are_simplex_images():
    assert opi.probs_to_correlators(OpiDistribution(0, 0, F(1, 24))) == OpiCorrelators(F(-1, 3), F(1, 3))
    assert opi.probs_to_correlators(OpiDistribution(0, F(1, 36), 0)) == OpiCorrelators(F(1, 9), F(-1, 3))


def test_finner_line_by_fourier_expansion():
    # p000 = 1/64 sum_abc chi(0)... expand the all-equal probability of an OPI
    # point through the full 64-outcome table and compare with the line
    e2, e3 = F(2, 7), F(1, 5)
    t = opi.opi_triangle_distribution(opi.correlators_to_probs(OpiCorrelators(e2, e3)))
    p000 = t.p[0, 0, 0]
    # p000 = (1 + 9 E2 + 6 E3o) / 64, so p000 = 1/8 iff 1 + 9E2 + 6E3o = 8
    assert p000 == (1 + 9 * e2 + 6 * e3) / 64
    a, b, c = opi.finner_line()
    on_line = OpiCorrelators(F(1, 3), F(2, 3))
    assert a * on_line.e2 + b * on_line.e3o == c
    tt = opi.opi_triangle_distribution(opi.correlators_to_probs(on_line))
    assert tt.p[0, 0, 0] == F(1, 8)


def test_correlator_averages_match_opi_coordinates():
    c = OpiCorrelators(F(1, 5), F(1, 7))
    t = opi.opi_triangle_distribution(opi.correlators_to_probs(c))
    e2, e3 = opi.correlator_averages(t)
    assert e2 == pytest.approx(float(c.e2), abs=1e-12)
    assert e3 == pytest.approx(float(c.e3o), abs=1e-12)


def test_finner_margin_general_examples():
    det = np.zeros((4, 4, 4), dtype=object)
    det[...] = F(0)
    det[0, 0, 0] = F(1)
    assert opi.finner_margin_general(opi.TriangleDistribution(det)) == 0
    uni = np.full((4, 4, 4), 1 / 64)
    assert opi.finner_margin_general(opi.TriangleDistribution(uni)) == pytest.approx(7 / 64)


def test_opi_deviation_examples():
    uni = opi.TriangleDistribution(np.full((4, 4, 4), 1 / 64))
    assert opi.opi_deviation(uni) == pytest.approx(0, abs=1e-15)
    det = np.empty((4, 4, 4), dtype=object)
    det[...] = F(0)
    det[0, 0, 0] = F(1)
    assert opi.opi_deviation(opi.TriangleDistribution(det)) == F(3, 4)


def test_clip_line_finner_segment():
    p, q = opi.clip_line(*opi.finner_line())
    assert (p.e2, p.e3o) == (F(1, 3), F(2, 3))
    assert (q.e2, q.e3o) == (F(5, 9), F(1, 3))
    assert opi.clip_line(1, 0, 2) is None


fractions = st.fractions(min_value=-1, max_value=1, max_denominator=1000)


@given(fractions, fractions)
def test_round_trip_exact(e2, e3):
    c = OpiCorrelators(e2, e3)
    assert opi.probs_to_correlators(opi.correlators_to_probs(c)) == c


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_round_trip_float(e2, e3):
    back = opi.probs_to_correlators(opi.correlators_to_probs(OpiCorrelators(e2, e3)))
    assert back.e2 == pytest.approx(e2, abs=1e-12)
    assert back.e3o == pytest.approx(e3, abs=1e-12)


def _in_triangle(e2, e3):
    # barycentric test against the three vertices
    (x1, y1), (x2, y2), (x3, y3) = (1, 1), (F(1, 9), F(-1, 3)), (F(-1, 3), F(1, 3))
    den = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
    l1 = ((y2 - y3) * (e2 - x3) + (x3 - x2) * (e3 - y3)) / den
    l2 = ((y3 - y1) * (e2 - x3) + (x1 - x3) * (e3 - y3)) / den
    return l1 >= 0 and l2 >= 0 and 1 - l1 - l2 >= 0


@given(fractions, fractions)
def test_validity_matches_triangle(e2, e3):
    assert opi.correlators_to_probs(OpiCorrelators(e2, e3)).valid == _in_triangle(e2, e3)


@given(st.tuples(fractions, fractions))
def test_general_margin_against_opi_margin(pt):
    d = opi.correlators_to_probs(OpiCorrelators(*pt))
    if not d.valid:
        return
    t = opi.opi_triangle_distribution(d)
    general = opi.finner_margin_general(t)
    # every marginal is 1/4, so the general margin is 1/8 - max(p); p112 and
    # p123 can never exceed 1/8, hence only p111 can violate
    expected = min(opi.finner_margin_opi(d), F(1, 8) - d.p112, F(1, 8) - d.p123)
    assert general == pytest.approx(float(expected), abs=1e-12)
    assert (general >= -1e-12) == (opi.finner_margin_opi(d) >= 0)
    if d.p111 >= max(d.p112, d.p123):
        assert general == pytest.approx(float(opi.finner_margin_opi(d)), abs=1e-12)


def test_opi_symmetrize_is_projection():
    rng = np.random.default_rng(3)
    p = rng.random((4, 4, 4))
    t = opi.TriangleDistribution(p / p.sum())
    s = opi.opi_symmetrize(t)
    assert opi.opi_deviation(s) == pytest.approx(0, abs=1e-15)
    for a, b, c in product(range(4), repeat=3):
        assert s.p[a, b, c] == pytest.approx(s.p[b, a, c])
