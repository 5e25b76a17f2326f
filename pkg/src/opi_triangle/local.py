"""Local models on a uniform grid ("cube representation").

Each source sends one of ``k`` equiprobable symbols. Party A sees the
symbols of sources beta and gamma and answers ``s_A[beta, gamma]``, B answers
``s_B[alpha, gamma]`` and C answers ``s_C[alpha, beta]``. An outcome's
probability is the fraction of the ``k**3`` cells of the cube producing it.

The searches here corroborate the no-go statement for OPI Finner saturation
at small ``k`` only. An empty finite search is evidence, not a proof.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations
import time

import numpy as np

from . import kernels
from .opi import CHARACTER_TABLE, TriangleDistribution

OPI_TOL = 1e-9
EXHAUSTIVE_MAX_K = 2
CHUNK = 1 << 16


class BudgetExceeded(RuntimeError):
    """Raised by a search that ran out of time. ``checkpoint`` can be passed
    back to resume it."""

    def __init__(self, checkpoint):
        super().__init__(f"search budget exhausted at {checkpoint.position}")
        self.checkpoint = checkpoint


@dataclass
class SearchCheckpoint:
    k: int
    require_opi: bool
    position: int = 0  # next S_A index
    triples: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridStrategy:
    """Response tables of the three parties; ``tables[0]`` is s_A indexed
    ``(beta, gamma)``, ``tables[1]`` is s_B ``(alpha, gamma)`` and
    ``tables[2]`` is s_C ``(alpha, beta)``."""

    tables: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tables)
        if t.ndim != 3 or t.shape[0] != 3 or t.shape[1] != t.shape[2] or t.shape[1] < 1:
            raise ValueError(f"tables must have shape (3, k, k), got {t.shape}")
        if t.min() < 0 or t.max() > 3:
            raise ValueError("table entries must lie in 0..3")
        object.__setattr__(self, "tables", t.astype(np.int8))

    @property
    def k(self):
        return self.tables.shape[1]

    @classmethod
    def from_functions(cls, k, fa, fb, fc):
        r = range(k)
        return cls(np.array([
            [[fa(b, g) for g in r] for b in r],
            [[fb(a, g) for g in r] for a in r],
            [[fc(a, b) for b in r] for a in r],
        ]))

    @classmethod
    def constant(cls, k, x=0):
        return cls(np.full((3, k, k), x))

    @property
    def code(self):
        """Base-4 integer of the flattened tables (first entry most
        significant); doubles as a stable identifier."""
        return _encode(self.tables.ravel())

    @classmethod
    def from_code(cls, k, code):
        size = 3 * k * k
        digits = [(code >> (2 * (size - 1 - i))) & 3 for i in range(size)]
        return cls(np.array(digits).reshape(3, k, k))

    def relabel_outputs(self, perm):
        return GridStrategy(np.asarray(perm)[self.tables])

    def permute_symbols(self, axis, perm):
        """Rename the symbols of source ``axis`` (0 alpha, 1 beta, 2 gamma)."""
        perm = np.asarray(perm)
        t = self.tables.copy()
        if axis == 0:
            t[1] = self.tables[1][perm, :]
            t[2] = self.tables[2][perm, :]
        elif axis == 1:
            t[0] = self.tables[0][perm, :]
            t[2] = self.tables[2][:, perm]
        else:
            t[0] = self.tables[0][:, perm]
            t[1] = self.tables[1][:, perm]
        return GridStrategy(t)

    def __eq__(self, other):
        return isinstance(other, GridStrategy) and np.array_equal(self.tables, other.tables)

    def __hash__(self):
        return hash(self.code)


def _encode(digits):
    code = 0
    for d in digits:
        code = 4 * code + int(d)
    return code


def example_strategy():
    """k = 2 strategy with p000 = p333 = 1/8 and six distinct-output cells."""
    return GridStrategy.from_functions(
        2, lambda b, g: 2 * b + g, lambda a, g: 2 * g + a, lambda a, b: 2 * a + b
    )


def outcome_counts(strategy):
    return kernels.outcome_counts(strategy.tables[None])[0]


def eval_strategy(strategy):
    """Exact distribution of a grid strategy (object array of Fractions)."""
    counts = outcome_counts(strategy)
    vol = strategy.k**3
    p = np.array([Fraction(int(c), vol) for c in counts], dtype=object).reshape(4, 4, 4)
    return TriangleDistribution(p)


# ---------------------------------------------------------------------------
# batched statistics from outcome counts
# ---------------------------------------------------------------------------


def _outcome_class():
    cls = np.empty(64, dtype=np.int64)
    for code in range(64):
        a, b, c = code >> 4, (code >> 2) & 3, code & 3
        cls[code] = len({a, b, c}) - 1
    return cls


_CLASS = _outcome_class()
_CLASS_SIZE = np.bincount(_CLASS)  # 4, 36, 24


def _correlator_weights():
    bits = CHARACTER_TABLE[:, :3].astype(float)
    w2 = np.zeros(64)
    w3 = np.zeros(64)
    for code in range(64):
        a, b, c = code >> 4, (code >> 2) & 3, code & 3
        for j in range(3):
            s = bits[:, j]
            w2[code] += s[a] * s[b] + s[b] * s[c] + s[a] * s[c]
        for j, kk, ll in permutations(range(3)):
            w3[code] += bits[a, j] * bits[b, kk] * bits[c, ll]
    return w2 / 9.0, w3 / 6.0


_W2, _W3 = _correlator_weights()


def batch_statistics(counts, k):
    """Per-strategy ``(e2_avg, e3_avg, opi_deviation, finner_margin)`` from an
    ``(N, 64)`` count array."""
    stats = kernels.count_statistics(counts, float(k**3), _W2, _W3, _CLASS)
    return stats[:, 0], stats[:, 1], stats[:, 2], stats[:, 3]


def is_opi_counts(counts):
    """Exact OPI test on integer counts: constant within each outcome class."""
    counts = np.atleast_2d(counts)
    ok = np.ones(counts.shape[0], dtype=bool)
    for c in range(3):
        block = counts[:, _CLASS == c]
        ok &= (block == block[:, :1]).all(axis=1)
    return ok


@dataclass(frozen=True)
class ScanRecord:
    strategy: int  # GridStrategy.code
    e2_avg: float
    e3_avg: float
    opi_deviation: float
    finner_margin: float

    @property
    def opi(self):
        return self.opi_deviation <= OPI_TOL

    def to_row(self):
        return [self.strategy, self.e2_avg, self.e3_avg, self.opi_deviation,
                self.finner_margin, int(self.opi)]


SCAN_FIELDS = ["strategy", "e2_avg", "e3_avg", "opi_deviation", "finner_margin", "opi"]


def _index_tables(k, start, stop):
    """Tables of the strategies with codes ``start..stop-1``."""
    size = 3 * k * k
    codes = np.arange(start, stop, dtype=np.int64)
    shifts = 2 * np.arange(size - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 3).astype(np.int8).reshape(-1, 3, k, k)


def strategy_batches(k, sampling="exhaustive", seed=0, count=1000, chunk=CHUNK):
    """Yield ``(codes, tables)`` batches in a deterministic order."""
    if sampling == "exhaustive":
        if k > EXHAUSTIVE_MAX_K:
            raise ValueError(f"exhaustive scans need k <= {EXHAUSTIVE_MAX_K}, got {k}")
        total = 4 ** (3 * k * k)
        for start in range(0, total, chunk):
            stop = min(total, start + chunk)
            yield np.arange(start, stop, dtype=np.int64), _index_tables(k, start, stop)
    elif sampling == "random":
        rng = np.random.default_rng(seed)
        done = 0
        while done < count:
            m = min(chunk, count - done)
            tables = rng.integers(0, 4, size=(m, 3, k, k), dtype=np.int8)
            codes = [_encode(t.ravel()) for t in tables] if k > 2 else (
                tables.reshape(m, -1).astype(np.int64) @ (4 ** np.arange(3 * k * k - 1, -1, -1))
            )
            yield codes, tables
            done += m
    else:
        raise ValueError(f"unknown sampling {sampling!r}")


def scan_arrays(k, sampling="exhaustive", seed=0, count=1000, chunk=CHUNK):
    """Batched scan: yields ``(codes, e2, e3, deviation, margin)`` arrays."""
    for codes, tables in strategy_batches(k, sampling, seed, count, chunk):
        stats = batch_statistics(kernels.outcome_counts(tables), k)
        yield (codes,) + stats


def scan_local(k, sampling="exhaustive", seed=0, count=1000):
    """Stream of :class:`ScanRecord`; exhaustive for ``k <= 2``, otherwise
    ``count`` random strategies drawn with ``seed``."""
    for codes, e2, e3, dev, margin in scan_arrays(k, sampling, seed, count):
        for i in range(len(e2)):
            yield ScanRecord(int(codes[i]), float(e2[i]), float(e3[i]), float(dev[i]),
                             float(margin[i]))


# ---------------------------------------------------------------------------
# Finner saturation searches
# ---------------------------------------------------------------------------


def _saturating_k2(require_opi):
    # uniform marginals: each 2x2 table is a bijection onto the outputs
    perms = np.array(list(permutations(range(4))), dtype=np.int8).reshape(24, 2, 2)
    idx = np.array(np.meshgrid(np.arange(24), np.arange(24), np.arange(24), indexing="ij"))
    idx = idx.reshape(3, -1).T
    tables = np.stack([perms[idx[:, 0]], perms[idx[:, 1]], perms[idx[:, 2]]], axis=1)
    counts = kernels.outcome_counts(tables)
    diag = counts[:, [0, 21, 42, 63]]  # xxx outcomes
    keep = (diag == 1).any(axis=1)  # p_xxx = 1/8 for some x
    if require_opi:
        keep &= is_opi_counts(counts)
    return [GridStrategy(t) for t in tables[keep]]


def _cell_sets(k):
    m = k * k // 4
    subsets = list(combinations(range(k * k), m))
    cells = np.array(subsets, dtype=np.int64)
    masks = np.zeros((len(subsets), k, k), dtype=np.int64)
    for i, sub in enumerate(subsets):
        for c in sub:
            masks[i, c // k, c % k] = 1
    return masks, cells


def _triples(k, checkpoint, budget):
    masks, cells = _cell_sets(k)
    target = k**3 // 8
    M = masks.shape[0]
    t0 = time.perf_counter()
    step = 8
    while checkpoint.position < M:
        stop = min(M, checkpoint.position + step)
        capacity = 1 << 12
        while True:
            hits, found = kernels.saturating_triples(
                masks, cells, checkpoint.position, stop, target, capacity
            )
            if found >= 0:
                break
            capacity *= 4
        checkpoint.triples.extend(tuple(int(v) for v in row) for row in hits)
        checkpoint.position = stop
        if budget is not None and time.perf_counter() - t0 > budget and checkpoint.position < M:
            raise BudgetExceeded(checkpoint)
    return masks, checkpoint.triples


def _exact_covers(triples, masks):
    """Ordered choices of one triple per output whose cell sets partition all
    three tables."""
    n_cells = masks.shape[1] * masks.shape[2]
    flat = masks.reshape(masks.shape[0], -1).astype(bool)
    covers = []

    def extend(chosen, used):
        if len(chosen) == 4:
            if all(u.all() for u in used):
                covers.append(list(chosen))
            return
        for t in triples:
            sets = [flat[i] for i in t]
            if any((s & u).any() for s, u in zip(sets, used)):
                continue
            chosen.append(t)
            extend(chosen, [s | u for s, u in zip(sets, used)])
            chosen.pop()

    extend([], [np.zeros(n_cells, dtype=bool)] * 3)
    return covers


def _cover_strategy(cover, masks, k):
    tables = np.zeros((3, k, k), dtype=np.int8)
    for x, triple in enumerate(cover):
        for party, i in enumerate(triple):
            tables[party][masks[i].astype(bool)] = x
    return GridStrategy(tables)


def search_finner_saturating(k, require_opi, budget=None, checkpoint=None):
    """Grid strategies with uniform one-party marginals that saturate Finner.

    ``k = 2`` is exhaustive over the bijective tables and keeps strategies
    with ``p_xxx = 1/8`` for at least one ``x``. ``k = 4`` requires
    ``p_xxx = 1/8`` for every ``x``, the condition forced on an OPI
    saturating point: per output it collects every triple of 4-cell sets
    meeting in 8 cube cells, then assembles tables from triples that
    partition all three tables. ``budget`` (seconds) bounds the triple
    search; on overrun :class:`BudgetExceeded` carries a resumable
    checkpoint.
    """
    if k == 2:
        return _saturating_k2(require_opi)
    if k != 4:
        raise ValueError(f"the reference search covers k in (2, 4), got {k}")
    if checkpoint is None:
        checkpoint = SearchCheckpoint(k, require_opi)
    masks, triples = _triples(k, checkpoint, budget)
    found = []
    for cover in _exact_covers(triples, masks):
        s = _cover_strategy(cover, masks, k)
        counts = outcome_counts(s)
        if require_opi and not is_opi_counts(counts)[0]:
            continue
        found.append(s)
    return found


# ---------------------------------------------------------------------------
# shape of a saturating cell set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxVerdict:
    verdict: str  # "cube", "box" or "other"
    sides: tuple  # (alpha, beta, gamma) extents; () when not a box
    volume: Fraction  # fraction of the cube covered by the cell set


def cell_set(strategy, x):
    t = strategy.tables
    k = strategy.k
    al, be, ga = np.meshgrid(np.arange(k), np.arange(k), np.arange(k), indexing="ij")
    hit = (t[0][be, ga] == x) & (t[1][al, ga] == x) & (t[2][al, be] == x)
    return np.argwhere(hit)


def box_shape_check(strategy, x):
    """Is the set of cells where all three parties output ``x`` a product
    set, i.e. a box once each axis's symbols are reordered?"""
    cells = cell_set(strategy, x)
    volume = Fraction(len(cells), strategy.k**3)
    if not len(cells):
        return BoxVerdict("other", (), volume)
    sides = tuple(len(np.unique(cells[:, axis])) for axis in range(3))
    if int(np.prod(sides)) != len(cells):
        return BoxVerdict("other", (), volume)
    return BoxVerdict("cube" if len(set(sides)) == 1 else "box", sides, volume)
