"""No-signalling constraints of the polygon inflations.

Two groups of parties in the n-gon share no source when they are separated
by at least one silent (identity) party on both sides, so a correlator whose
support splits into such blocks is the product of the block correlators.
A vanishing block forces the word to zero; otherwise the word is a product
of non-vanishing correlators, which gives a quadratic equality (chained for
three or more blocks). Words with the same multiset of factors are equal.

In cumulative mode every polygon 3..n contributes its full system, and a
word whose support fits inside ``m < n`` consecutive parties is identified
with the corresponding open chain, shared by all polygons.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import orbits
from .orbits import IDENTITY, UnsupportedSize, format_word

SINGLE = "single"
OPEN_SPLIT = "open"
CYCLIC_SPLIT = "cyclic"
SPLITS = (OPEN_SPLIT, CYCLIC_SPLIT)
CUMULATIVE = "cumulative"
MODES = (SINGLE, CUMULATIVE)


class MissingIntermediate(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# support geometry
# ---------------------------------------------------------------------------


def _digits(word):
    return orbits.parse_word(word) if isinstance(word, str) else tuple(word)


def factorize(word):
    """Blocks of the word: maximal cyclic runs of non-identity parties.

    Returns a list of sorted position tuples. Distinct blocks are separated
    by at least one identity on both sides, hence share no source.
    """
    d = _digits(word)
    n = len(d)
    support = [i for i in range(n) if d[i] != IDENTITY]
    if not support:
        raise ValueError("the all-identity word has no blocks")
    if len(support) == n:
        return [tuple(range(n))]
    # start scanning right after an identity so no run wraps the origin
    start = next(i for i in range(n) if d[i] == IDENTITY)
    blocks, run = [], []
    for step in range(1, n + 1):
        i = (start + step) % n
        if d[i] != IDENTITY:
            run.append(i)
        elif run:
            blocks.append(tuple(sorted(run)))
            run = []
    if run:
        blocks.append(tuple(sorted(run)))
    return blocks


def string_runs(word):
    """Maximal runs of non-identity parties in the word read as an open
    string (a run touching both ends is *not* merged)."""
    d = _digits(word)
    runs, run = [], []
    for i, x in enumerate(d):
        if x != IDENTITY:
            run.append(i)
        elif run:
            runs.append(tuple(run))
            run = []
    if run:
        runs.append(tuple(run))
    return runs


def split_blocks(word, split=OPEN_SPLIT):
    """Blocks used to write a canonical word as a product.

    ``cyclic`` returns :func:`factorize`. ``open`` agrees with it except on
    words with two or more identity gaps whose canonical string has support
    at both ends: there the runs of the string read as an open chain are
    used, so no block wraps from the last party to the first. The two differ
    from n = 8 on (114/6 against 113/7 linear/quadratic at n = 8).
    """
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    blocks = factorize(word)
    if split == CYCLIC_SPLIT or len(blocks) < 2:
        return blocks
    return string_runs(word)


def block_word(word, positions):
    """The word restricted to ``positions`` (identity elsewhere)."""
    d = _digits(word)
    keep = set(positions)
    return tuple(x if i in keep else IDENTITY for i, x in enumerate(d))


def _canonical_chain(seq):
    best = None
    for cand in (tuple(seq), tuple(reversed(seq))):
        relabel, nxt, out = {IDENTITY: IDENTITY}, 0, []
        for s in cand:
            if s not in relabel:
                relabel[s] = nxt
                nxt += 1
            out.append(relabel[s])
        out = tuple(out)
        if best is None or out < best:
            best = out
    return best


def chain_pattern(word):
    """Trimmed pattern of the shortest window of consecutive parties holding
    the support, canonical under reflection and label renaming.

    ``None`` when the support cannot be covered by fewer than n parties.
    """
    d = _digits(word)
    n = len(d)
    idle = [i for i in range(n) if d[i] == IDENTITY]
    if not idle:
        return None
    # runs of identities; the window leaves out the longest one
    runs = []
    for i in idle:
        if d[(i - 1) % n] != IDENTITY:
            length = 0
            while d[(i + length) % n] == IDENTITY:
                length += 1
            runs.append((i, length))
    longest = max(length for _, length in runs)
    patterns = []
    for i, length in runs:
        if length != longest:
            continue
        begin = (i + length) % n
        seq = [d[(begin + t) % n] for t in range(n - length)]
        patterns.append(_canonical_chain(seq))
    return format_word(min(patterns))


# ---------------------------------------------------------------------------
# per-polygon analysis (mode independent)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolygonSystem:
    """Constraint structure of one n-gon in terms of its word orbits."""

    n: int
    words: tuple  # canonical display strings, sorted
    zeros: tuple  # word indices forced to 0
    groups: tuple  # (representative index, (member indices...)) for equal products
    factors: dict  # word index -> tuple of factor word indices (sorted), product words only
    positions: dict  # word index -> tuple of blocks (position tuples)


@lru_cache(maxsize=None)
def polygon_system(n, split=OPEN_SPLIT):
    en = orbits.enumerate_all(n)
    words = tuple(w.canonical for w in en.words)
    zeros, keyed, factors, positions = [], {}, {}, {}
    for idx, w in enumerate(words):
        blocks = split_blocks(w, split)
        if len(blocks) < 2:
            continue
        parts = [block_word(w, b) for b in blocks]
        if any(orbits.is_vanishing(p) for p in parts):
            zeros.append(idx)
            continue
        fids = tuple(sorted(en.word_index(p) for p in parts))
        factors[idx] = fids
        positions[idx] = tuple(blocks)
        keyed.setdefault(fids, []).append(idx)
    groups = tuple((min(m), tuple(sorted(m))) for m in keyed.values())
    groups = tuple(sorted(groups))
    return PolygonSystem(n, words, tuple(zeros), groups, factors, positions)


def chain_reduce(n, word, blocks=None):
    """Quadratic triples ``(target, factor, factor)`` for a product word.

    Two blocks give one triple. With k >= 3 blocks the word is written as
    (first k-1 blocks) x (last block), recursing down, so every triple is
    quadratic. Words are returned as canonical display strings.
    """
    en = orbits.enumerate_all(n)
    d = _digits(word)
    if blocks is None:
        blocks = factorize(d)
    if len(blocks) < 2:
        raise ValueError(f"{format_word(d)} does not factorize")
    if any(orbits.is_vanishing(block_word(d, b)) for b in blocks):
        raise ValueError(f"{format_word(d)} has a vanishing factor")
    triples = []
    for k in range(len(blocks), 1, -1):
        union = [p for b in blocks[: k - 1] for p in b]
        target = block_word(d, [p for b in blocks[:k] for p in b])
        left = block_word(d, union)
        right = block_word(d, blocks[k - 1])
        names = []
        for part in (target, left, right):
            if en.word_index(part) < 0:
                raise MissingIntermediate(f"{format_word(part)} is not a variable of the {n}-gon")
            names.append(orbits.canonicalize_word(part).canonical)
        t, a, b = names
        triples.append((t,) + tuple(sorted((a, b))))
    return triples


# ---------------------------------------------------------------------------
# constraint sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearConstraint:
    """``x[var] = 0`` when ``other`` is None, else ``x[var] = x[other]``."""

    var: int
    other: object
    display: str


@dataclass(frozen=True)
class QuadraticConstraint:
    """``x[target] = x[left] * x[right]``."""

    target: int
    left: int
    right: int
    display: str


@dataclass
class ConstraintSet:
    n: int
    mode: str
    split: str
    variables: list
    positivity: np.ndarray  # int64 (rows, variables); p = scale * (1 + row @ x)
    positivity_scale: np.ndarray  # 4**-m per row
    positivity_labels: list  # (polygon, outcome orbit canonical)
    linear: list
    quadratic: list
    objective: int
    var_index: dict = field(default_factory=dict)

    def __post_init__(self):
        self.var_index = {v: i for i, v in enumerate(self.variables)}

    @property
    def n_vars(self):
        return len(self.variables)

    def counts(self):
        return {
            "variables": self.n_vars,
            "positivity": int(self.positivity.shape[0]),
            "linear": len(self.linear),
            "quadratic": len(self.quadratic),
        }

    def probabilities(self, x):
        return self.positivity_scale * (1.0 + self.positivity @ np.asarray(x, dtype=float))


def _chain_var(pattern):
    return f"chain[{pattern}]"


def objective_name(n, mode):
    return "jj" + "0" * (n - 2) if mode == SINGLE else _chain_var("jj")


def _variable_name(word, mode):
    if mode == SINGLE:
        return word
    pattern = chain_pattern(word)
    return word if pattern is None else _chain_var(pattern)


@lru_cache(maxsize=None)
def _build(n, mode, split):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not isinstance(n, int) or n < orbits.MIN_POLYGON:
        raise UnsupportedSize(f"polygon size must be an integer >= 3, got {n!r}")
    sizes = [n] if mode == SINGLE else list(range(3, n + 1))

    variables, index = [], {}

    def var(name):
        if name not in index:
            index[name] = len(variables)
            variables.append(name)
        return index[name]

    per_polygon = []
    for m in sizes:
        system = polygon_system(m, split)
        cols = [var(_variable_name(w, mode)) for w in system.words]
        per_polygon.append((m, system, cols))
    objective = index[objective_name(n, mode)]

    pos_rows, pos_scale, pos_labels = [], [], []
    linear, seen_linear = [], set()
    quadratic, seen_quad = [], set()
    for m, system, cols in per_polygon:
        coeff = orbits.positivity_matrix(m)
        block = np.zeros((coeff.shape[0], len(variables)), dtype=np.int64)
        for w_idx, col in enumerate(cols):
            block[:, col] += coeff[:, w_idx]
        pos_rows.append(block)
        pos_scale.extend([4.0**-m] * coeff.shape[0])
        pos_labels.extend((m, o.canonical) for o in orbits.enumerate_outcome_orbits(m))

        for w_idx in system.zeros:
            v = cols[w_idx]
            if ("zero", v) in seen_linear:
                continue
            seen_linear.add(("zero", v))
            linear.append(LinearConstraint(v, None, f"{system.words[w_idx]}=0"))
        for rep, members in system.groups:
            for w_idx in members:
                if w_idx == rep:
                    continue
                a, b = cols[w_idx], cols[rep]
                key = ("eq",) + tuple(sorted((a, b)))
                if a == b or key in seen_linear:
                    continue
                seen_linear.add(key)
                linear.append(
                    LinearConstraint(a, b, f"{system.words[w_idx]}={system.words[rep]}")
                )
            rep_word = system.words[rep]
            for t, f1, f2 in chain_reduce(m, rep_word, system.positions[rep]):
                # intermediate unions map to their group representative
                t_idx = _representative(system, t)
                a_idx = _representative(system, f1)
                b_idx = _representative(system, f2)
                triple = (cols[t_idx], *sorted((cols[a_idx], cols[b_idx])))
                if triple in seen_quad:
                    continue
                seen_quad.add(triple)
                display = (
                    f"{system.words[t_idx]}={system.words[a_idx]}*{system.words[b_idx]}"
                )
                quadratic.append(QuadraticConstraint(*triple, display))

    width = len(variables)
    positivity = np.vstack(
        [np.pad(b, ((0, 0), (0, width - b.shape[1]))) for b in pos_rows]
    )
    return ConstraintSet(
        n=n,
        mode=mode,
        split=split,
        variables=variables,
        positivity=positivity,
        positivity_scale=np.array(pos_scale),
        positivity_labels=pos_labels,
        linear=linear,
        quadratic=quadratic,
        objective=objective,
    )


def _representative(system, word):
    idx = system.words.index(word)
    for rep, members in system.groups:
        if idx in members:
            return rep
    return idx


def build_constraints(n, mode=SINGLE, split=OPEN_SPLIT):
    """Constraint system of the n-gon (``mode="single"``) or of all polygons
    3..n together (``mode="cumulative"``). Cached; treat as read-only.

    ``split`` selects how product words are cut into blocks, see
    :func:`split_blocks`; the two rules first differ at n = 8.
    """
    return _build(n, mode, split)


@dataclass(frozen=True)
class ChainLink:
    polygon: int
    word: str
    pattern: str


def cross_links(n):
    """Identifications of polygon words with open chains, for polygons 3..n."""
    links = []
    for m in range(3, n + 1):
        for w in orbits.enumerate_words(m):
            pattern = chain_pattern(w.canonical)
            if pattern is not None:
                links.append(ChainLink(m, w.canonical, pattern))
    return links
