"""Exact algebraic bounds from the zero pattern of an optimal point.

At an optimum some outcome probabilities vanish. Each vanishing probability
is a linear form in the correlators; a rational combination ``q`` of those
forms that cancels every correlator except the constant, E2 and the word
standing for E2**2 leaves ``c0 + c1 E2 + c2 E2**2 = 0``. With ``q >= 0`` the
same combination is a nonnegative sum of probabilities, so every feasible
point satisfies ``c0 + c1 E2 + c2 E2**2 >= 0``.
"""
from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np
from sympy import factorint

from . import orbits
from .constraints import SINGLE, build_constraints

ACTIVE_TOL = 1e-7
ACTIVE_RETRY_TOL = 1e-5
ROOT_MATCH_TOL = 1e-4


class NoCertificate(RuntimeError):
    pass


class NoRealRoot(ArithmeticError):
    pass


class AmbiguousRoot(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# rational linear algebra
# ---------------------------------------------------------------------------


def rref(rows):
    """Reduced row echelon form over the rationals. Returns ``(matrix,
    pivot columns)``; the input is not modified."""
    M = [[Fraction(v) for v in row] for row in rows]
    if not M:
        return M, []
    ncols = len(M[0])
    pivots = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(M)) if M[i][col] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        lead = M[r][col]
        M[r] = [v / lead for v in M[r]]
        for i in range(len(M)):
            if i != r and M[i][col] != 0:
                f = M[i][col]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(col)
        r += 1
        if r == len(M):
            break
    return M, pivots


def nullspace(rows, ncols):
    """Basis of ``{x : rows @ x = 0}`` as lists of Fractions."""
    if not rows:
        basis = []
        for j in range(ncols):
            v = [Fraction(0)] * ncols
            v[j] = Fraction(1)
            basis.append(v)
        return basis
    R, pivots = rref(rows)
    free = [j for j in range(ncols) if j not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            v[p] = -R[i][f]
        basis.append(v)
    return basis


def _primitive(vec):
    """Scale a rational vector to coprime integers."""
    den = 1
    for v in vec:
        den = den * v.denominator // math.gcd(den, v.denominator)
    ints = [int(v * den) for v in vec]
    g = 0
    for v in ints:
        g = math.gcd(g, v)
    return [Fraction(v, g or 1) for v in ints]


# ---------------------------------------------------------------------------
# quadratic surds
# ---------------------------------------------------------------------------


def _squarefree_split(m):
    """``m = s**2 * d`` with d squarefree; returns ``(s, d)``."""
    s, d = 1, 1
    for prime, power in factorint(m).items():
        s *= prime ** (power // 2)
        if power % 2:
            d *= prime
    return s, d


def _fmt_rational(q):
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class QuadraticSurd:
    """``rational + coeff * sqrt(radicand)`` with a squarefree radicand."""

    rational: Fraction
    coeff: Fraction = Fraction(0)
    radicand: int = 1

    def __float__(self):
        return float(self.rational) + float(self.coeff) * math.sqrt(self.radicand)

    @property
    def is_rational(self):
        return self.coeff == 0 or self.radicand == 1

    def __str__(self):
        if self.is_rational:
            return _fmt_rational(self.rational + (self.coeff if self.radicand == 1 else 0))
        root = f"sqrt({self.radicand})"
        if self.coeff == 1:
            head = root
        elif self.coeff == -1:
            head = "-" + root
        else:
            head = f"{_fmt_rational(self.coeff)}*{root}"
        if self.rational == 0:
            return head
        sign = "+" if self.rational > 0 else "-"
        return f"{head}{sign}{_fmt_rational(abs(self.rational))}"


def _sqrt_rational(q):
    """``sqrt(q)`` for a nonnegative Fraction as ``(coeff, radicand)``."""
    s, d = _squarefree_split(q.numerator * q.denominator) if q else (0, 1)
    return Fraction(s, q.denominator), d


def quadratic_roots(c0, c1, c2):
    """Real roots of ``c0 + c1 x + c2 x**2`` as surds (one root when linear)."""
    c0, c1, c2 = Fraction(c0), Fraction(c1), Fraction(c2)
    if c2 == 0:
        if c1 == 0:
            raise NoRealRoot("constant residual polynomial")
        return [QuadraticSurd(-c0 / c1)]
    disc = c1 * c1 - 4 * c0 * c2
    if disc < 0:
        raise NoRealRoot(f"negative discriminant {disc}")
    coeff, radicand = _sqrt_rational(disc)
    centre = -c1 / (2 * c2)
    half = coeff / (2 * c2)
    if coeff == 0:
        return [QuadraticSurd(centre)]
    if radicand == 1:
        return sorted({QuadraticSurd(centre - half), QuadraticSurd(centre + half)}, key=float)
    return sorted(
        [QuadraticSurd(centre, -half, radicand), QuadraticSurd(centre, half, radicand)],
        key=float,
    )


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


@dataclass
class Certificate:
    n: int
    active: list  # outcome orbit labels with p = 0
    q: list  # Fraction per active orbit
    coefficients: tuple  # (c0, c1, c2) of c0 + c1*E2 + c2*E2**2, probability units
    cancelled: list  # correlator columns eliminated
    square_word: str = None
    root: QuadraticSurd = None

    @property
    def is_linear(self):
        return self.coefficients[2] == 0

    def to_text(self):
        lines = [f"# exact bound certificate, {self.n}-gon"]
        lines.append(f"active outcome orbits: {len(self.active)}")
        lines.append(f"cancelled correlators: {len(self.cancelled)}")
        if self.square_word:
            lines.append(f"E2^2 represented by: {self.square_word}")
        lines.append("q:")
        for label, qv in zip(self.active, self.q):
            lines.append(f"  p[{label}]  {_fmt_rational(qv)}")
        c0, c1, c2 = self.coefficients
        lines.append(
            f"residual: {_fmt_rational(c0)} + ({_fmt_rational(c1)})*E2 + ({_fmt_rational(c2)})*E2^2 = 0"
        )
        if self.root is not None:
            lines.append(f"root: {self.root}  ({float(self.root):.12f})")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {
            "polygon": self.n,
            "active": list(self.active),
            "q": [_fmt_rational(v) for v in self.q],
            "coefficients": [_fmt_rational(v) for v in self.coefficients],
            "cancelled": list(self.cancelled),
            "square_word": self.square_word,
            "root": None if self.root is None else str(self.root),
            "root_value": None if self.root is None else float(self.root),
        }


def active_outcomes(point, n, tol=ACTIVE_TOL):
    """Outcome orbits whose probability at ``point`` (values of the single
    n-gon ConstraintSet variables) is below ``tol``."""
    cs = build_constraints(n, SINGLE)
    probs = cs.probabilities(point)
    return [label for (_, label), p in zip(cs.positivity_labels, probs) if p < tol]


def face_zeros(point, n, active, tol=ACTIVE_TOL):
    """Restrict ``active`` to the orbits that vanish on the whole optimal face.

    E2 and every variable in a quadratic constraint are pinned at ``point``;
    what remains is a polytope, and a row that can be made positive on it is
    only zero at this particular vertex. Such rows cannot enter a
    nonnegative certificate.
    """
    from .bounds import lp_problem
    from .lp import LpProblem, solve_lp

    cs = build_constraints(n, SINGLE)
    base = lp_problem(cs, "max")
    pinned = {cs.objective} | {i for q in cs.quadratic for i in (q.target, q.left, q.right)}
    pinned = sorted(pinned)
    x = np.asarray(point, dtype=float)
    lo, hi = base.lo.copy(), base.hi.copy()
    lo[pinned] = hi[pinned] = x[pinned]
    row_of = {label: i for i, (_, label) in enumerate(cs.positivity_labels)}
    kept = []
    for label in active:
        r = row_of[label]
        sol = solve_lp(LpProblem(
            c=cs.positivity[r].astype(float), A_ub=base.A_ub, b_ub=base.b_ub,
            A_eq=base.A_eq, b_eq=base.b_eq, lo=lo, hi=hi, sense="max",
        ))
        if cs.positivity_scale[r] * (1.0 + sol.value) < tol:
            kept.append(label)
    return kept


def reduced_columns(n):
    """Positivity coefficients after eliminating the linear constraints.

    Returns ``(labels, matrix)``: zero words are dropped and each group of
    equal products collapses onto its representative; matrix rows follow the
    outcome orbits.
    """
    cs = build_constraints(n, SINGLE)
    R = cs.positivity
    merged = {}
    zero = {c.var for c in cs.linear if c.other is None}
    target = {c.var: c.other for c in cs.linear if c.other is not None}
    for col in range(cs.n_vars):
        if col in zero:
            continue
        rep = col
        while rep in target:
            rep = target[rep]
        merged.setdefault(rep, np.zeros(R.shape[0], dtype=np.int64))
        merged[rep] = merged[rep] + R[:, col]
    keys = sorted(merged)
    labels = [cs.variables[k] for k in keys]
    return labels, np.column_stack([merged[k] for k in keys]) if keys else np.zeros((R.shape[0], 0))


def square_alias(n):
    """Word representing E2**2 in the n-gon (``None`` below the hexagon)."""
    cs = build_constraints(n, SINGLE)
    for q in cs.quadratic:
        if q.left == q.right == cs.objective:
            return cs.variables[q.target]
    return None


def certificate_search(n, active, square_word="auto"):
    """Rational combination of the ``active`` positivity rows that cancels
    every correlator except E2 and its square.

    Raises :class:`NoCertificate` when the null space is trivial or every
    combination leaves the residual identically zero.
    """
    if square_word == "auto":
        square_word = square_alias(n)
    labels, cols = reduced_columns(n)
    e2 = "jj" + "0" * (n - 2)
    targets = [e2] + ([square_word] if square_word else [])
    target_idx = [labels.index(t) for t in targets]
    other_idx = [i for i in range(len(labels)) if i not in target_idx]

    outcome_labels = [label for _, label in build_constraints(n, SINGLE).positivity_labels]
    rows = [outcome_labels.index(a) for a in active]
    if not rows:
        raise NoCertificate("no active outcomes")
    A = cols[rows]  # (active, reduced correlators)
    # q @ A[:, other] = 0  <=>  A[:, other].T @ q = 0
    system = [[int(A[r, j]) for r in range(len(rows))] for j in other_idx]
    basis = nullspace(system, len(rows))
    scale = Fraction(1, 4**n)

    def residual(vec):
        c0 = scale * sum(vec)
        c1 = scale * sum(v * int(A[r, target_idx[0]]) for r, v in enumerate(vec))
        c2 = (
            scale * sum(v * int(A[r, target_idx[1]]) for r, v in enumerate(vec))
            if square_word
            else Fraction(0)
        )
        return c0, c1, c2

    candidates = [(vec, residual(vec)) for vec in basis]
    candidates = [(v, c) for v, c in candidates if c[1] or c[2]]
    if not candidates:
        raise NoCertificate(
            f"{len(rows)} active outcomes leave no combination with a nonzero E2 residual"
        )
    definite = [
        (v, c) for v, c in candidates if all(x >= 0 for x in v) or all(x <= 0 for x in v)
    ]
    if not definite:
        vec = _nonnegative_combination(system, len(rows), A[:, target_idx[0]])
        if vec is None:
            raise NoCertificate(
                f"the {len(basis)}-dimensional null space of {len(rows)} active outcomes "
                "has no nonnegative combination"
            )
        definite = [(vec, residual(vec))]
    candidates = definite
    vec, coeffs = _pick_candidate(candidates)
    coeffs = normalise_polynomial(coeffs, n)
    return Certificate(
        n=n,
        active=list(active),
        q=vec,
        coefficients=coeffs,
        cancelled=[labels[i] for i in other_idx],
        square_word=square_word,
    )


def _nonnegative_combination(system, size, e2_column):
    """Exact LP for ``q >= 0`` with ``system @ q = 0`` and ``sum(q) = 1``,
    pushing the E2 coefficient down. ``None`` when no such q exists."""
    from .lp import Infeasible, LpProblem, solve_lp

    A_eq = [list(row) for row in system] + [[1] * size]
    b_eq = [0] * len(system) + [1]
    prob = LpProblem(
        c=np.asarray([int(v) for v in e2_column], dtype=object), A_eq=A_eq, b_eq=b_eq,
        lo=[0] * size, hi=[None] * size, sense="min",
    )
    try:
        sol = solve_lp(prob, exact=True)
    except Infeasible:
        return None
    return list(sol.x)


def _pick_candidate(candidates):
    """First sign-definite combination, scaled to coprime nonnegative integers."""
    vec, coeffs = candidates[0]
    return _normalise(vec, coeffs)


def _normalise(vec, coeffs):
    prim = _primitive(vec)
    ratio = next(p / v for p, v in zip(prim, vec) if v)
    if sum(prim) < 0 or all(v <= 0 for v in prim):
        prim = [-v for v in prim]
        ratio = -ratio
    return prim, tuple(ratio * c for c in coeffs)


def normalise_polynomial(coeffs, n):
    """Fix the free positive scale of a residual polynomial: coprime integer
    coefficients times ``4**-(n-2)``. The sign is kept, so the inequality
    ``c0 + c1 E2 + c2 E2**2 >= 0`` keeps its direction."""
    ints = _primitive([Fraction(c) for c in coeffs])
    ratio = next(i / c for i, c in zip(ints, coeffs) if c)
    if ratio < 0:
        ints = [-v for v in ints]
    unit = Fraction(1, 4 ** max(n - 2, 0))
    return tuple(unit * v for v in ints)


def certify_polygon(n, point=None, numeric=None):
    """Certificate for the maximum of E2 on the single n-gon.

    ``point`` is an optimal point of the single ConstraintSet (solved here
    when omitted). The active set is taken at 1e-7 and retried at 1e-5 when
    that yields no certificate.
    """
    if point is None:
        from .bounds import slp_bound

        res = slp_bound(build_constraints(n, SINGLE), "max")
        point, numeric = res.point, res.bound
    last = None
    for tol in (ACTIVE_TOL, ACTIVE_RETRY_TOL):
        active = face_zeros(point, n, active_outcomes(point, n, tol), tol)
        try:
            cert = certificate_search(n, active)
        except NoCertificate as exc:
            last = exc
            continue
        algebraic_bound(cert, numeric)
        return cert
    raise last


def algebraic_bound(cert, numeric=None, tol=ROOT_MATCH_TOL):
    """Exact root of the certificate's residual polynomial matching the
    numerical bound (or the largest root when ``numeric`` is None)."""
    roots = quadratic_roots(*cert.coefficients)
    if numeric is None:
        choice = roots[-1]
    else:
        close = [r for r in roots if abs(float(r) - numeric) <= tol]
        if not close:
            raise NoRealRoot(
                f"no root of the residual polynomial within {tol} of {numeric}: "
                f"{[str(r) for r in roots]}"
            )
        if len(close) > 1:
            raise AmbiguousRoot(f"both roots {[str(r) for r in close]} match {numeric}")
        choice = close[0]
    cert.root = choice
    return choice
