"""Coordinates of the output-permutation-invariant (OPI) triangle subspace.

An OPI distribution is fixed by three numbers: ``p111`` (probability of one
all-equal outcome such as 000), ``p112`` (one two-equal outcome, e.g. 001)
and ``p123`` (one all-distinct outcome, e.g. 012). Equivalently by the two
non-vanishing correlators ``E2 = <a_j b_j>`` and ``E3o = <a_j b_k c_l>``.

Every function accepts floats or :class:`fractions.Fraction`; with fractions
in, results are exact.
"""
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product

import numpy as np

# Output x -> bits (a0, a1, a2) with a2 = a0 * a1; last column is the identity.
CHARACTER_TABLE = np.array(
    [
        [1, 1, 1, 1],
        [1, -1, -1, 1],
        [-1, 1, -1, 1],
        [-1, -1, 1, 1],
    ],
    dtype=np.int8,
)

# (1, E2, E3o) = TO_CORRELATORS @ (p111, p112, p123)
TO_CORRELATORS = ((4, 36, 24), (4, 4, -8), (4, -12, 8))

# (p111, p112, p123) = TO_PROBS @ (1, E2, E3o); exact inverse of the above.
TO_PROBS = (
    (Fraction(1, 64), Fraction(9, 64), Fraction(6, 64)),
    (Fraction(1, 64), Fraction(1, 64), Fraction(-2, 64)),
    (Fraction(1, 64), Fraction(-3, 64), Fraction(2, 64)),
)

NORMALIZATION_TOL = 1e-12


class NormalizationViolated(ValueError):
    pass


def _is_exact(*values):
    return all(isinstance(v, (int, Fraction)) for v in values)


@dataclass(frozen=True)
class OpiDistribution:
    p111: object
    p112: object
    p123: object

    def as_tuple(self):
        return (self.p111, self.p112, self.p123)

    @property
    def total(self):
        return 4 * self.p111 + 36 * self.p112 + 24 * self.p123

    @property
    def valid(self):
        """Nonnegative and normalised."""
        if min(self.as_tuple()) < 0:
            return False
        if _is_exact(*self.as_tuple()):
            return self.total == 1
        return abs(self.total - 1) <= NORMALIZATION_TOL


@dataclass(frozen=True)
class OpiCorrelators:
    e2: object
    e3o: object

    @property
    def valid(self):
        return correlators_to_probs(self).valid


def probs_to_correlators(d):
    p = d.as_tuple()
    one, e2, e3 = (sum(c * x for c, x in zip(row, p)) for row in TO_CORRELATORS)
    if _is_exact(*p):
        ok = one == 1
    else:
        ok = abs(one - 1) <= NORMALIZATION_TOL
    if not ok:
        raise NormalizationViolated(f"4*p111 + 36*p112 + 24*p123 = {one}, expected 1")
    return OpiCorrelators(e2, e3)


def correlators_to_probs(c):
    vec = (1, c.e2, c.e3o)
    if _is_exact(c.e2, c.e3o):
        rows = TO_PROBS
    else:
        rows = [[float(x) for x in row] for row in TO_PROBS]
    return OpiDistribution(*(sum(a * v for a, v in zip(row, vec)) for row in rows))


def finner_margin_opi(d):
    """``1/8 - p111``. OPI marginals are all 1/4, so the Finner bound on an
    all-equal outcome is sqrt(1/64)."""
    eighth = Fraction(1, 8) if _is_exact(d.p111) else 0.125
    return eighth - d.p111


def finner_line():
    """Finner saturation in correlator coordinates: ``a*E2 + b*E3o = c``,
    returned as ``(a, b, c) = (9, 6, 7)``, i.e. ``1 + 9 E2 + 6 E3o = 8``."""
    return (9, 6, 7)


def special_points():
    """Named reference points of the OPI plane, in (E2, E3o)."""
    f = Fraction
    return {
        "vertex_p111": OpiCorrelators(f(1), f(1)),  # p112 = p123 = 0
        "vertex_p112": OpiCorrelators(f(1, 9), f(-1, 3)),  # p111 = p123 = 0
        "vertex_p123": OpiCorrelators(f(-1, 3), f(1, 3)),  # p111 = p112 = 0
        "noisy": OpiCorrelators(f(0), f(0)),
        "special": OpiCorrelators(f(1, 3), f(2, 3)),  # Finner line meets p112 = 0
        "finner_line": finner_line(),
    }


def triangle_edges():
    """The three positivity edges of the OPI plane as pairs of vertices."""
    pts = special_points()
    v1, v2, v3 = pts["vertex_p111"], pts["vertex_p112"], pts["vertex_p123"]
    return {"p123=0": (v1, v2), "p111=0": (v2, v3), "p112=0": (v3, v1)}


def clip_line(a, b, c):
    """Part of the line ``a*E2 + b*E3o = c`` inside the positivity triangle,
    as a pair of endpoints (``None`` when the line misses it)."""
    hits = []
    for p, q in triangle_edges().values():
        fp = a * p.e2 + b * p.e3o - c
        fq = a * q.e2 + b * q.e3o - c
        if fp == fq:
            continue
        t = fp / (fp - fq)
        if 0 <= t <= 1:
            pt = OpiCorrelators(p.e2 + t * (q.e2 - p.e2), p.e3o + t * (q.e3o - p.e3o))
            if all(abs(pt.e2 - h.e2) + abs(pt.e3o - h.e3o) > 1e-12 for h in hits):
                hits.append(pt)
    if not hits:
        return None
    hits.sort(key=lambda h: (h.e2, h.e3o))
    return hits[0], hits[-1]


# ---------------------------------------------------------------------------
# general 4x4x4 triangle distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TriangleDistribution:
    p: np.ndarray  # shape (4, 4, 4), float or object array of Fractions

    def __post_init__(self):
        arr = np.asarray(self.p)
        if arr.shape != (4, 4, 4):
            raise ValueError(f"expected a 4x4x4 array, got shape {arr.shape}")
        object.__setattr__(self, "p", arr)

    @property
    def exact(self):
        return self.p.dtype == object

    @property
    def valid(self):
        if (self.p < 0).any():
            return False
        total = self.p.sum()
        return total == 1 if self.exact else abs(total - 1) <= NORMALIZATION_TOL

    def marginals(self):
        return self.p.sum(axis=(1, 2)), self.p.sum(axis=(0, 2)), self.p.sum(axis=(0, 1))


def finner_margin_general(t):
    """``min_abc sqrt(p(a) p(b) p(c)) - p_abc`` (floating point)."""
    pa, pb, pc = (np.asarray(m, dtype=float) for m in t.marginals())
    bound = np.sqrt(pa[:, None, None] * pb[None, :, None] * pc[None, None, :])
    return float((bound - np.asarray(t.p, dtype=float)).min())


def opi_triangle_distribution(d):
    """Expand an OPI point to the full 4x4x4 table."""
    exact = _is_exact(*d.as_tuple())
    p = np.empty((4, 4, 4), dtype=object if exact else float)
    for a, b, c in product(range(4), repeat=3):
        distinct = len({a, b, c})
        p[a, b, c] = (d.p111, d.p112, d.p123)[distinct - 1]
    return TriangleDistribution(p)


_OUTPUT_PERMS = list(permutations(range(4)))
_PARTY_PERMS = list(permutations(range(3)))


def opi_symmetrize(t):
    """Average of ``t`` over party exchanges and simultaneous output
    permutations."""
    p = np.asarray(t.p)
    acc = np.zeros((4, 4, 4), dtype=p.dtype)
    if t.exact:
        acc[...] = Fraction(0)
    for sigma in _PARTY_PERMS:
        q = np.transpose(p, sigma)
        for pi in _OUTPUT_PERMS:
            idx = np.array(pi)
            acc = acc + q[np.ix_(idx, idx, idx)]
    n_elems = len(_PARTY_PERMS) * len(_OUTPUT_PERMS)
    return TriangleDistribution(acc / (Fraction(n_elems) if t.exact else n_elems))


def opi_deviation(t):
    """Max ``|p_abc - pbar_abc|`` against the OPI symmetrisation; 0 iff OPI."""
    diff = np.asarray(t.p) - opi_symmetrize(t).p
    m = np.abs(diff).max()
    return m if t.exact else float(m)


def correlator_averages(t):
    """``(E2 averaged over the three pairs and labels, E3o averaged over the six
    distinct label triples)``."""
    p = np.asarray(t.p, dtype=float)
    bits = CHARACTER_TABLE[:, :3].astype(float)
    e2 = 0.0
    for j in range(3):
        s = bits[:, j]
        e2 += np.einsum("abc,a,b->", p, s, s)
        e2 += np.einsum("abc,b,c->", p, s, s)
        e2 += np.einsum("abc,a,c->", p, s, s)
    e3 = 0.0
    for j, k, l in permutations(range(3)):
        e3 += np.einsum("abc,a,b,c->", p, bits[:, j], bits[:, k], bits[:, l])
    return e2 / 9.0, e3 / 6.0
