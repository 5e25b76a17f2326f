"""NSI bounds on E2 by successive linear programming.

Each quadratic equality ``w = u * v`` is replaced by its first-order
expansion around the current estimates ``w = ubar * v + vbar * u - ubar * vbar``.
For ``w = E2**2`` this is ``w = Ebar**2 + eps`` with ``E2 = Ebar + eps / (2 Ebar)``,
so maximising E2 maximises ``eps``; the bound ``Ebar * (1 + eps / (2 Ebar**2))``
is read off the LP and becomes the next ``Ebar``. Iteration stops once ``eps``
and every estimate change fall below ``tol``.
"""
from dataclasses import dataclass, field
from fractions import Fraction
import logging
import time

import numpy as np
from scipy import sparse
from scipy.optimize import curve_fit

from .constraints import CUMULATIVE, OPEN_SPLIT, SINGLE, build_constraints
from .lp import Infeasible, LpProblem, solve_lp

log = logging.getLogger(__name__)

CONVERGED = "converged"
NOT_CONVERGED = "not_converged"

DEFAULT_TOL = 1e-10
RESIDUAL_TOL = 1e-7


class NotConverged(RuntimeError):
    def __init__(self, result):
        super().__init__(
            f"n={result.n} {result.mode} {result.direction}: not converged after "
            f"{result.iterations} iterations (eps={result.epsilon:.3g}, residual={result.residual:.3g})"
        )
        self.result = result


class FitFailed(RuntimeError):
    pass


@dataclass
class SlpOptions:
    tol: float = DEFAULT_TOL
    max_iter: int = 200
    start: float = None  # initial Ebar; None picks a default per direction
    estimates: dict = None  # variable name -> initial estimate
    damping: float = 0.5
    residual_tol: float = RESIDUAL_TOL
    time_limit: float = None  # seconds; the best iterate is returned on expiry


@dataclass
class LinearizationState:
    ebar: float
    estimates: np.ndarray
    epsilon: float = float("inf")
    iteration: int = 0
    tol: float = DEFAULT_TOL


@dataclass
class BoundResult:
    n: int
    mode: str
    direction: str
    bound: float
    iterations: int
    epsilon: float
    residual: float
    status: str
    wall_time: float
    point: np.ndarray = field(default=None, repr=False)
    exact: object = None  # Fraction when solved in rational arithmetic

    @property
    def converged(self):
        return self.status == CONVERGED

    def to_dict(self):
        return {
            "polygon": self.n,
            "mode": self.mode,
            "direction": self.direction,
            "bound": self.bound,
            "exact": None if self.exact is None else str(self.exact),
            "iterations": self.iterations,
            "epsilon": self.epsilon,
            "residual": self.residual,
            "status": self.status,
            "wall_time_s": self.wall_time,
        }


# ---------------------------------------------------------------------------
# LP assembly
# ---------------------------------------------------------------------------


def _sense(direction):
    if direction not in ("max", "min"):
        raise ValueError(f"direction must be 'max' or 'min', got {direction!r}")
    return direction


ELASTIC_PENALTY = 100.0


def lp_problem(cs, direction="max", estimates=None, exact=False, elastic=False):
    """The LP of ``cs`` with quadratics linearised around ``estimates``.

    Without estimates the quadratic constraints are dropped (LP relaxation).
    ``elastic`` appends two nonnegative slacks per linearised row, charged
    ``ELASTIC_PENALTY`` each in the objective; they follow the ``cs.n_vars``
    original variables.
    """
    _sense(direction)
    if exact:
        return _exact_problem(cs, direction, estimates)
    V = cs.n_vars
    A_ub, b_ub, A_lin, lo, hi = _static_parts(cs)
    c = np.zeros(V)
    c[cs.objective] = 1.0
    blocks, rhs = [A_lin], [np.zeros(A_lin.shape[0])]
    nq = len(cs.quadratic) if estimates is not None else 0
    if nq:
        est = np.asarray(estimates, dtype=float)
        t = np.array([q.target for q in cs.quadratic])
        u = np.array([q.left for q in cs.quadratic])
        v = np.array([q.right for q in cs.quadratic])
        rows = np.repeat(np.arange(nq), 3)
        cols = np.column_stack([t, v, u]).ravel()
        vals = np.column_stack([np.ones(nq), -est[u], -est[v]]).ravel()
        # a square (u == v) lands twice on the same column; coo sums duplicates
        blocks.append(sparse.coo_matrix((vals, (rows, cols)), shape=(nq, V)).tocsr())
        rhs.append(-est[u] * est[v])
    A_eq = sparse.vstack(blocks).tocsr()
    b_eq = np.concatenate(rhs)
    if elastic and nq:
        sign = 1.0 if direction == "max" else -1.0
        c = np.concatenate([c, np.full(2 * nq, -sign * ELASTIC_PENALTY)])
        lo = np.concatenate([lo, np.zeros(2 * nq)])
        hi = np.concatenate([hi, np.full(2 * nq, np.inf)])
        A_ub = sparse.hstack([A_ub, sparse.csr_matrix((A_ub.shape[0], 2 * nq))]).tocsr()
        n_lin = A_lin.shape[0]
        slack = sparse.lil_matrix((A_eq.shape[0], 2 * nq))
        for k in range(nq):
            slack[n_lin + k, 2 * k] = 1.0
            slack[n_lin + k, 2 * k + 1] = -1.0
        A_eq = sparse.hstack([A_eq, slack.tocsr()]).tocsr()
    return LpProblem(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, lo=lo, hi=hi,
                     sense=direction)


_STATIC = {}


def _static_parts(cs):
    key = id(cs)
    hit = _STATIC.get(key)
    if hit is not None and hit[0] is cs:
        return hit[1]
    V = cs.n_vars
    scale = np.abs(cs.positivity).max(axis=1).clip(min=1).astype(float)
    A_ub = sparse.csr_matrix(-cs.positivity / scale[:, None])
    b_ub = 1.0 / scale
    lo = np.full(V, -1.0)
    hi = np.full(V, 1.0)
    rows, cols, vals = [], [], []
    r = 0
    for lin in cs.linear:
        if lin.other is None:
            lo[lin.var] = hi[lin.var] = 0.0
        else:
            rows += [r, r]
            cols += [lin.var, lin.other]
            vals += [1.0, -1.0]
            r += 1
    A_lin = sparse.csr_matrix((vals, (rows, cols)), shape=(r, V))
    parts = (A_ub, b_ub, A_lin, lo, hi)
    _STATIC[key] = (cs, parts)
    return parts


def _exact_problem(cs, direction, estimates):
    V = cs.n_vars
    c = [0] * V
    c[cs.objective] = 1
    lo, hi = [-1] * V, [1] * V
    A_eq, b_eq = [], []
    for lin in cs.linear:
        if lin.other is None:
            lo[lin.var] = hi[lin.var] = 0
        else:
            row = [0] * V
            row[lin.var] += 1
            row[lin.other] -= 1
            A_eq.append(row)
            b_eq.append(0)
    if estimates is not None:
        for q in cs.quadratic:
            ul, vr = Fraction(estimates[q.left]), Fraction(estimates[q.right])
            row = [Fraction(0)] * V
            row[q.target] += 1
            row[q.right] -= ul
            row[q.left] -= vr
            A_eq.append(row)
            b_eq.append(-ul * vr)
    A_ub = [[-int(v) for v in row] for row in cs.positivity]
    return LpProblem(c=c, A_ub=A_ub, b_ub=[1] * len(A_ub), A_eq=A_eq, b_eq=b_eq,
                     lo=lo, hi=hi, sense=direction)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass
class ResidualReport:
    positivity: float
    linear: float
    quadratic: float
    box: float

    @property
    def max(self):
        return max(self.positivity, self.linear, self.quadratic, self.box)


def verify_solution(point, cs):
    """Largest violation of ``point`` against the exact constraints of ``cs``.

    Positivity violations are measured in probability units.
    """
    x = np.asarray(point, dtype=float)
    if x.shape != (cs.n_vars,):
        raise ValueError(f"point has shape {x.shape}, expected ({cs.n_vars},)")
    probs = cs.probabilities(x)
    pos = float(max(0.0, -probs.min())) if len(probs) else 0.0
    lin = 0.0
    for c in cs.linear:
        other = 0.0 if c.other is None else x[c.other]
        lin = max(lin, abs(x[c.var] - other))
    quad = 0.0
    for q in cs.quadratic:
        quad = max(quad, abs(x[q.target] - x[q.left] * x[q.right]))
    box = float(max(0.0, np.abs(x).max() - 1.0)) if len(x) else 0.0
    return ResidualReport(pos, lin, quad, box)


# ---------------------------------------------------------------------------
# successive linearisation
# ---------------------------------------------------------------------------


def default_start(direction):
    # E2 of the square's vertex-attaining points; a safe outer estimate
    return 0.5 if direction == "max" else -1.0 / 3.0


def slp_bound(cs, direction="max", opts=None):
    """Bound E2 over ``cs``. Returns a :class:`BoundResult`; the status is
    ``not_converged`` (best iterate kept) when the loop hits ``max_iter`` or the
    returned point violates the exact constraints by more than
    ``residual_tol``."""
    opts = opts or SlpOptions()
    _sense(direction)
    t0 = time.perf_counter()

    if not cs.quadratic:
        sol = solve_lp(lp_problem(cs, direction))
        residual = verify_solution(sol.x, cs).max
        status = CONVERGED if residual < opts.residual_tol else NOT_CONVERGED
        return BoundResult(
            cs.n, cs.mode, direction, float(sol.value), 1, 0.0, residual, status,
            time.perf_counter() - t0, np.asarray(sol.x),
        )

    if opts.estimates is None:
        # seed from the LP relaxation (quadratics dropped)
        est = np.asarray(solve_lp(lp_problem(cs, direction)).x, dtype=float).copy()
    else:
        est = np.zeros(cs.n_vars)
    if opts.estimates:
        for name, value in opts.estimates.items():
            if name in cs.var_index:
                est[cs.var_index[name]] = value
    ebar = opts.start if opts.start is not None else default_start(direction)
    est[cs.objective] = ebar
    involved = sorted({i for q in cs.quadratic for i in (q.target, q.left, q.right)})
    state = LinearizationState(ebar, est, tol=opts.tol)

    best = None
    prev_step = 0.0
    status = NOT_CONVERGED
    x = None
    for it in range(1, opts.max_iter + 1):
        state.iteration = it
        try:
            sol = solve_lp(lp_problem(cs, direction, state.estimates))
        except Infeasible:
            # linearisation point too far out; let the tangent rows bend
            sol = solve_lp(lp_problem(cs, direction, state.estimates, elastic=True))
        x = np.asarray(sol.x)[: cs.n_vars]
        e2 = float(x[cs.objective])
        ebar = state.ebar
        state.epsilon = 2.0 * ebar * (e2 - ebar)
        bound = e2  # = ebar * (1 + eps / (2 ebar**2))
        delta = float(np.abs(x[involved] - state.estimates[involved]).max())
        residual = verify_solution(x, cs).max
        if best is None or residual < best[2] or (
            abs(residual - best[2]) < 1e-12 and _better(bound, best[0], direction)
        ):
            best = (bound, x.copy(), residual, it, state.epsilon)
        log.debug("n=%d it=%d ebar=%.12f bound=%.12f eps=%.3e delta=%.3e",
                  cs.n, it, ebar, bound, state.epsilon, delta)
        if abs(state.epsilon) < opts.tol and delta < opts.tol:
            best = (bound, x.copy(), residual, it, state.epsilon)
            status = CONVERGED if residual < opts.residual_tol else NOT_CONVERGED
            break
        step = e2 - ebar
        lam = opts.damping if prev_step * step < 0 else 1.0
        prev_step = step
        new = state.estimates.copy()
        new[involved] += lam * (x[involved] - state.estimates[involved])
        state.estimates = new
        state.ebar = float(new[cs.objective])
        if opts.time_limit is not None and time.perf_counter() - t0 > opts.time_limit:
            log.info("n=%d: time limit reached after %d iterations", cs.n, it)
            break

    bound, point, residual, iters, eps = best
    if status != CONVERGED:
        iters = state.iteration
    return BoundResult(
        cs.n, cs.mode, direction, float(bound), iters, float(eps), float(residual),
        status, time.perf_counter() - t0, point,
    )


def _better(a, b, direction):
    return a > b if direction == "max" else a < b


def exact_lp_bound(cs, direction="max"):
    """Exact rational optimum for systems without quadratic constraints."""
    if cs.quadratic:
        raise ValueError("exact LP only applies to systems without quadratic constraints")
    t0 = time.perf_counter()
    sol = solve_lp(lp_problem(cs, direction, exact=True), exact=True)
    value = Fraction(sol.value)
    point = np.array([float(v) for v in sol.x])
    return BoundResult(
        cs.n, cs.mode, direction, float(value), 1, 0.0,
        verify_solution(point, cs).max, CONVERGED, time.perf_counter() - t0,
        point, exact=value,
    )


def bound_curve(n_range, mode=CUMULATIVE, direction="max", opts=None, split=OPEN_SPLIT):
    """Bounds for every polygon size in ``n_range``, each solve warm-started
    from the previous one."""
    opts = opts or SlpOptions()
    results = []
    start, estimates = None, None
    for n in n_range:
        cs = build_constraints(n, mode, split)
        run = SlpOptions(
            tol=opts.tol, max_iter=opts.max_iter, damping=opts.damping,
            residual_tol=opts.residual_tol, time_limit=opts.time_limit,
            start=start if start is not None else opts.start,
            estimates=estimates,
        )
        res = slp_bound(cs, direction, run)
        results.append(res)
        start = res.bound
        estimates = {name: float(v) for name, v in zip(cs.variables, res.point)}
    return results


# ---------------------------------------------------------------------------
# extrapolation
# ---------------------------------------------------------------------------


@dataclass
class FitResult:
    limit: float
    amplitude: float
    rate: float


def _model(n, a, b, c):
    return a + b * np.exp(-c * n)


TRIVIAL_BOUND = 1.0


def fit_extrapolate(series, drop_trivial=True):
    """Least-squares fit of ``a + b exp(-c n)`` to ``[(n, bound), ...]``;
    ``a`` is the extrapolated limit. Descriptive only.

    Points at ``|bound| >= 1`` sit on the box of the variable and carry no
    information about the decay; they are dropped unless ``drop_trivial`` is
    False.
    """
    pts = [(r.n, r.bound) if isinstance(r, BoundResult) else tuple(r) for r in series]
    if drop_trivial:
        pts = [p for p in pts if abs(float(p[1])) < TRIVIAL_BOUND - 1e-12]
    if len(pts) < 4:
        raise FitFailed(f"need at least 4 points, got {len(pts)}")
    n = np.array([float(p[0]) for p in pts])
    y = np.array([float(p[1]) for p in pts])
    if not np.all(np.isfinite(y)) or len(set(n)) < len(n):
        raise FitFailed("series has non-finite values or repeated sizes")
    if np.ptp(y) == 0:
        return FitResult(float(y[0]), 0.0, 0.0)
    guess = (y[-1], (y[0] - y[-1]) * np.exp(0.5 * n[0]), 0.5)
    try:
        params, _ = curve_fit(_model, n, y, p0=guess, maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitFailed(str(exc)) from exc
    if not np.all(np.isfinite(params)):
        raise FitFailed("fit produced non-finite parameters")
    return FitResult(*(float(v) for v in params))
