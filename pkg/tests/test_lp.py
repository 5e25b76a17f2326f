from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opi_triangle import bounds, constraints as C
from opi_triangle.lp import Infeasible, LpProblem, Unbounded, solve_lp


def _box_problem():
    # max x + y  s.t.  x + 2y <= 4, 3x + y <= 6, 0 <= x, y
    return LpProblem(c=[1, 1], A_ub=[[1, 2], [3, 1]], b_ub=[4, 6], lo=[0, 0], hi=[None, None])


def test_exact_small_lp():
    sol = solve_lp(_box_problem(), exact=True)
    assert sol.value == F(14, 5)
    assert sol.x == [F(8, 5), F(6, 5)]
    assert sorted(sol.active) == [0, 1]


def test_float_small_lp():
    sol = solve_lp(_box_problem())
    assert sol.value == pytest.approx(2.8)
    assert sorted(sol.active) == [0, 1]


def test_min_and_equalities():
    p = LpProblem(c=[1, 2], A_eq=[[1, 1]], b_eq=[1], lo=[0, 0], hi=[1, 1], sense="min")
    assert solve_lp(p, exact=True).value == 1
    assert solve_lp(p).value == pytest.approx(1)


def test_negative_lower_bounds_exact():
    p = LpProblem(c=[1], A_ub=[[-1]], b_ub=[F(1, 3)], lo=[-1], hi=[1], sense="min")
    assert solve_lp(p, exact=True).value == F(-1, 3)


def test_infeasible():
    p = LpProblem(c=[1], A_ub=[[1], [-1]], b_ub=[0, -1], lo=[-5], hi=[5])
    with pytest.raises(Infeasible):
        solve_lp(p, exact=True)
    with pytest.raises(Infeasible):
        solve_lp(p)


def test_unbounded():
    p = LpProblem(c=[1], lo=[0], hi=[None])
    with pytest.raises(Unbounded):
        solve_lp(p, exact=True)
    with pytest.raises(Unbounded):
        solve_lp(p)


def test_bad_sense():
    with pytest.raises(ValueError):
        LpProblem(c=[1], sense="up")


@pytest.mark.parametrize("n, value", [(3, F(1)), (4, F(1, 2)), (5, F(5, 11))])
def test_polygon_lps_exact(n, value):
    res = bounds.exact_lp_bound(C.build_constraints(n), "max")
    assert res.exact == value


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=1, max_size=4),
    st.lists(st.integers(-3, 3), min_size=3, max_size=3),
)
def test_exact_matches_highs(rows, c):
    # bounded random LPs on the box [-1, 1]^3
    p = LpProblem(c=c, A_ub=rows, b_ub=[1] * len(rows), lo=[-1] * 3, hi=[1] * 3)
    try:
        exact = solve_lp(p, exact=True).value
    except Infeasible:
        with pytest.raises(Infeasible):
            solve_lp(p)
        return
    assert float(exact) == pytest.approx(solve_lp(p).value, abs=1e-8)
