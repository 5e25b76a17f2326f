"""Linear programs: HiGHS for floating point, a dense rational simplex for
exact answers.

Problems are stated as::

    maximize / minimize  c @ x
    subject to           A_ub @ x <= b_ub
                         A_eq @ x == b_eq
                         lo <= x <= hi
"""
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

FLOAT_TOL = 1e-9


class Infeasible(RuntimeError):
    pass


class Unbounded(RuntimeError):
    pass


def _nrows(mat):
    if mat is None:
        return 0
    return mat.shape[0] if hasattr(mat, "shape") else len(mat)


def _ncols(mat):
    return mat.shape[1] if hasattr(mat, "shape") else len(mat[0])


@dataclass
class LpProblem:
    c: np.ndarray
    A_ub: object = None
    b_ub: object = None
    A_eq: object = None
    b_eq: object = None
    lo: object = None
    hi: object = None
    sense: str = "max"

    def __post_init__(self):
        if self.sense not in ("max", "min"):
            raise ValueError(f"sense must be 'max' or 'min', got {self.sense!r}")
        nvar = len(self.c)
        for name in ("A_ub", "A_eq"):
            mat = getattr(self, name)
            if _nrows(mat) and _ncols(mat) != nvar:
                raise ValueError(f"{name} has {_ncols(mat)} columns, expected {nvar}")

    @property
    def n_vars(self):
        return len(self.c)


@dataclass
class LpSolution:
    value: object
    x: object
    active: list = field(default_factory=list)  # tight A_ub rows
    exact: bool = False


def solve_lp(problem, exact=False, tol=FLOAT_TOL):
    if exact:
        return _solve_exact(problem)
    return _solve_highs(problem, tol)


# ---------------------------------------------------------------------------
# floating point
# ---------------------------------------------------------------------------


_TIGHT = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "presolve": True,
}


def _as_float_matrix(mat):
    if sparse.issparse(mat):
        return mat.tocsr().astype(float)
    return np.asarray(mat, dtype=float)


def _solve_highs(p, tol):
    sign = -1.0 if p.sense == "max" else 1.0
    c = sign * np.asarray(p.c, dtype=float)
    n = len(c)
    lo = np.full(n, -np.inf) if p.lo is None else np.asarray(p.lo, dtype=float)
    hi = np.full(n, np.inf) if p.hi is None else np.asarray(p.hi, dtype=float)
    has_ub = _nrows(p.A_ub) > 0
    has_eq = _nrows(p.A_eq) > 0
    A_ub = _as_float_matrix(p.A_ub) if has_ub else None
    A_eq = _as_float_matrix(p.A_eq) if has_eq else None
    kwargs = dict(
        A_ub=A_ub,
        b_ub=np.asarray(p.b_ub, dtype=float) if has_ub else None,
        A_eq=A_eq,
        b_eq=np.asarray(p.b_eq, dtype=float) if has_eq else None,
        bounds=np.column_stack([lo, hi]),
    )
    res = linprog(c, method="highs-ds", options=_TIGHT, **kwargs)
    if res.status not in (0, 2, 3):
        # HiGHS occasionally gives up at the tight tolerances; retry with defaults
        res = linprog(c, method="highs", **kwargs)
    if res.status == 2:
        raise Infeasible(res.message)
    if res.status == 3:
        raise Unbounded(res.message)
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    active = []
    if has_ub:
        slack = np.asarray(p.b_ub, dtype=float) - A_ub @ res.x
        active = [int(i) for i in np.flatnonzero(slack <= tol)]
    return LpSolution(sign * res.fun, res.x, active, exact=False)


# ---------------------------------------------------------------------------
# exact rational simplex (two phase, Bland's rule)
# ---------------------------------------------------------------------------


def _frac_matrix(mat, ncols):
    if not _nrows(mat):
        return []
    return [[Fraction(v) for v in row] for row in (mat.tolist() if hasattr(mat, "tolist") else mat)]


def _frac_vector(vec):
    if vec is None:
        return []
    return [Fraction(v) for v in (vec.tolist() if hasattr(vec, "tolist") else vec)]


def _pivot(T, basis, row, col):
    pr = T[row]
    piv = pr[col]
    if piv != 1:
        T[row] = pr = [v / piv for v in pr]
    for r, other in enumerate(T):
        if r == row:
            continue
        f = other[col]
        if f:
            T[r] = [a - f * b for a, b in zip(other, pr)]
    basis[row] = col


def _run_simplex(T, basis, obj_row, allowed):
    """Maximise the objective stored as reduced costs in ``T[obj_row]``
    (entry ``j`` is ``-c_j`` for nonbasic columns). Bland's rule."""
    ncols = len(T[0]) - 1
    while True:
        entering = next(
            (j for j in range(ncols) if allowed[j] and T[obj_row][j] < 0), None
        )
        if entering is None:
            return
        best, leaving = None, None
        for r in range(len(T)):
            if r == obj_row or r >= len(basis):
                continue
            a = T[r][entering]
            if a > 0:
                ratio = T[r][-1] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leaving]):
                    best, leaving = ratio, r
        if leaving is None:
            raise Unbounded("objective unbounded")
        _pivot(T, basis, leaving, entering)


def _solve_exact(p):
    n = p.n_vars
    c = _frac_vector(p.c)
    if p.sense == "min":
        c = [-v for v in c]
    lo = [Fraction(v) if v is not None and np.isfinite(float(v)) else None
          for v in (p.lo if p.lo is not None else [None] * n)]
    hi = [Fraction(v) if v is not None and np.isfinite(float(v)) else None
          for v in (p.hi if p.hi is not None else [None] * n)]
    if any(v is None for v in lo):
        raise ValueError("exact mode needs finite lower bounds on every variable")

    A_ub = _frac_matrix(p.A_ub, n)
    b_ub = _frac_vector(p.b_ub)
    A_eq = _frac_matrix(p.A_eq, n)
    b_eq = _frac_vector(p.b_eq)

    # shift x = lo + y, y >= 0
    def shifted(rows, rhs):
        return [
            (row, b - sum(a * l for a, l in zip(row, lo) if a))
            for row, b in zip(rows, rhs)
        ]

    ub_rows = shifted(A_ub, b_ub)
    n_orig_ub = len(ub_rows)
    for j in range(n):
        if hi[j] is not None:
            row = [Fraction(0)] * n
            row[j] = Fraction(1)
            ub_rows.append((row, hi[j] - lo[j]))
    eq_rows = shifted(A_eq, b_eq)

    m_ub, m_eq = len(ub_rows), len(eq_rows)
    # columns: y (n) | slacks (m_ub) | artificials (m_ub + m_eq, only some used)
    n_slack = m_ub
    rows, basis, art_cols = [], [], []
    width = n + n_slack
    needs_art = []
    for i, (row, b) in enumerate(ub_rows):
        coeffs = list(row) + [Fraction(0)] * n_slack
        coeffs[n + i] = Fraction(1)
        if b < 0:
            coeffs = [-v for v in coeffs]
            b = -b
            needs_art.append(len(rows))
        rows.append((coeffs, b))
    for row, b in eq_rows:
        coeffs = list(row) + [Fraction(0)] * n_slack
        if b < 0:
            coeffs = [-v for v in coeffs]
            b = -b
        needs_art.append(len(rows))
        rows.append((coeffs, b))

    n_art = len(needs_art)
    total = width + n_art
    T = []
    art_of_row = {r: width + k for k, r in enumerate(needs_art)}
    for r, (coeffs, b) in enumerate(rows):
        full = coeffs + [Fraction(0)] * n_art
        if r in art_of_row:
            full[art_of_row[r]] = Fraction(1)
            basis.append(art_of_row[r])
        else:
            basis.append(n + r)  # slack of an ub row with b >= 0
        T.append(full + [b])
    art_cols = set(art_of_row.values())

    # phase 1: maximise -sum(artificials)
    phase1 = [Fraction(0)] * (total + 1)
    for a in art_cols:
        phase1[a] = Fraction(1)
    for r, col in enumerate(basis):
        if col in art_cols:
            phase1 = [u - v for u, v in zip(phase1, T[r])]
    T.append(phase1)
    obj = len(T) - 1
    allowed = [True] * total
    _run_simplex(T, basis, obj, allowed)
    if T[obj][-1] != 0:
        raise Infeasible("no feasible point")
    # drive remaining artificials out of the basis
    for r in range(len(basis)):
        if basis[r] in art_cols:
            col = next((j for j in range(width) if T[r][j] != 0), None)
            if col is not None:
                _pivot(T, basis, r, col)
    keep = [r for r in range(len(basis)) if basis[r] not in art_cols]
    T = [T[r] for r in keep]
    basis = [basis[r] for r in keep]
    T = [row[:width] + [row[-1]] for row in T]

    # phase 2
    cost = list(c) + [Fraction(0)] * n_slack
    objrow = [-v for v in cost] + [Fraction(0)]
    for r, col in enumerate(basis):
        f = objrow[col]
        if f:
            objrow = [u - f * v for u, v in zip(objrow, T[r])]
    T.append(objrow)
    obj = len(T) - 1
    _run_simplex(T, basis, obj, [True] * width)

    y = [Fraction(0)] * width
    for r, col in enumerate(basis):
        y[col] = T[r][-1]
    x = [l + v for l, v in zip(lo, y[:n])]
    value = sum(ci * xi for ci, xi in zip(_frac_vector(p.c), x))
    active = [i for i in range(n_orig_ub) if y[n + i] == 0]
    return LpSolution(value, x, active, exact=True)
