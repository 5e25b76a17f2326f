"""Correlator words, outcome orbits and the correlator matrix of the n-gon.

A word assigns to every party of the polygon either one of the three bit
labels ``j, k, l`` (the bits a0, a1, a2 = a0*a1 of the 2-bit output
encoding) or the identity ``0``. Internally a word is a base-4 string with
digits ``0=j, 1=k, 2=l, 3=identity``, so the numeric order of codes is the
lexicographic order ``j < k < l < 0`` used for canonical forms.

Outcome strings use digits ``0..3`` for the four outputs.
"""
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels
from .opi import CHARACTER_TABLE

IDENTITY = 3
LABEL_CHARS = "jkl0"
_CHAR_DIGIT = {"j": 0, "k": 1, "l": 2, "0": 3}

MIN_POLYGON = 3


class UnsupportedSize(ValueError):
    pass


def _check_n(n):
    if not isinstance(n, (int, np.integer)) or n < MIN_POLYGON:
        raise UnsupportedSize(f"polygon size must be an integer >= {MIN_POLYGON}, got {n!r}")


# ---------------------------------------------------------------------------
# word helpers
# ---------------------------------------------------------------------------


def parse_word(text):
    """``"jj0"`` -> ``(0, 0, 3)``."""
    try:
        return tuple(_CHAR_DIGIT[ch] for ch in text)
    except KeyError as exc:
        raise ValueError(f"bad word {text!r}: characters must be in 'jkl0'") from exc


def format_word(digits):
    return "".join(LABEL_CHARS[d] for d in digits)


def encode(digits):
    code = 0
    for d in digits:
        code = (code << 2) | int(d)
    return code


def decode(code, n):
    return tuple((code >> (2 * (n - 1 - i))) & 3 for i in range(n))


def label_counts(word):
    digits = parse_word(word) if isinstance(word, str) else word
    return tuple(sum(1 for d in digits if d == lab) for lab in range(3))


def is_vanishing(word):
    """True when the word's correlator is zero on every output-symmetric
    distribution: the label counts are not all of the same parity."""
    c = label_counts(word)
    return not (c[0] % 2 == c[1] % 2 == c[2] % 2)


def _word_images(digits):
    n = len(digits)
    for m in kernels.dihedral_maps(n):
        image = [digits[i] for i in m]
        for perm in _LABEL_PERMS:
            yield tuple(perm[d] for d in image)


_LABEL_PERMS = [
    (a, b, c, IDENTITY)
    for a, b, c in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
]


@dataclass(frozen=True)
class WordOrbit:
    canonical: str
    size: int

    @property
    def display(self):
        return self.canonical

    @property
    def n(self):
        return len(self.canonical)

    @property
    def digits(self):
        return parse_word(self.canonical)


@dataclass(frozen=True)
class OutcomeOrbit:
    canonical: str
    size: int


def canonicalize_word(word):
    """Orbit of ``word`` under polygon rotations, reflections and renaming of
    the three bit labels."""
    digits = parse_word(word) if isinstance(word, str) else tuple(word)
    if len(digits) < MIN_POLYGON:
        raise UnsupportedSize(f"word {word!r} is shorter than {MIN_POLYGON}")
    members = set(_word_images(digits))
    return WordOrbit(format_word(min(members)), len(members))


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Enumeration:
    """Everything derived from one brute-force pass over the 4**n strings."""

    n: int
    words: tuple  # WordOrbit, sorted by canonical form
    outcomes: tuple  # OutcomeOrbit, sorted by canonical form
    word_ids: np.ndarray  # per raw word code: orbit index, -1 if vanishing or identity
    outcome_ids: np.ndarray  # per raw outcome code: orbit index

    def word_index(self, word):
        digits = parse_word(word) if isinstance(word, str) else tuple(word)
        return int(self.word_ids[encode(digits)])


@lru_cache(maxsize=None)
def enumerate_all(n):
    _check_n(n)
    maps = kernels.dihedral_maps(n)
    digits = kernels.digit_table(n)

    # word orbits
    keys = kernels.canonical_keys(n, 3, maps)
    counts = np.stack([(digits == lab).sum(axis=1) for lab in range(3)], axis=1) % 2
    keep = (counts[:, 0] == counts[:, 1]) & (counts[:, 1] == counts[:, 2])
    keep[-1] = False  # all-identity word
    uniq, inverse, sizes = np.unique(keys[keep], return_inverse=True, return_counts=True)
    word_ids = np.full(4**n, -1, dtype=np.int64)
    word_ids[keep] = inverse
    words = tuple(
        WordOrbit(format_word(decode(int(k), n)), int(s)) for k, s in zip(uniq, sizes)
    )

    # outcome orbits
    okeys = kernels.canonical_keys(n, 4, maps)
    ouniq, oinverse, osizes = np.unique(okeys, return_inverse=True, return_counts=True)
    outcomes = tuple(
        OutcomeOrbit("".join(str(d) for d in decode(int(k), n)), int(s))
        for k, s in zip(ouniq, osizes)
    )
    return Enumeration(n, words, outcomes, word_ids, oinverse.astype(np.int64))


def enumerate_words(n):
    """Non-vanishing word orbits of the n-gon (identity excluded), sorted."""
    return list(enumerate_all(n).words)


def enumerate_outcome_orbits(n):
    return list(enumerate_all(n).outcomes)


# ---------------------------------------------------------------------------
# correlator matrix and positivity rows
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _character_rows(n):
    en = enumerate_all(n)
    reps = np.array([[int(ch) for ch in o.canonical] for o in en.outcomes], dtype=np.int64)
    digits = kernels.digit_table(n).astype(np.int64)
    table = CHARACTER_TABLE.astype(np.int64)
    return kernels.character_sums(reps, en.word_ids, len(en.words), digits, table)


@dataclass(frozen=True)
class CorrelatorMatrix:
    """``(1, E_w1, E_w2, ...) = entries @ (p_o1, p_o2, ...)`` where ``p_o`` is
    the probability of one outcome string of orbit ``o``.

    Row 0 is normalisation, the remaining rows follow the sorted word orbits,
    columns follow the sorted outcome orbits.
    """

    n: int
    row_labels: tuple
    col_labels: tuple
    entries: np.ndarray

    @property
    def shape(self):
        return self.entries.shape


def build_matrix(n):
    en = enumerate_all(n)
    r = _character_rows(n)  # (outcomes, words)
    osize = np.array([o.size for o in en.outcomes], dtype=np.int64)
    wsize = np.array([w.size for w in en.words], dtype=np.int64)
    # sum over the outcome orbit of chi of one word = |o| * r[o, w] / |W|
    body = (osize[:, None] * r) // wsize[None, :]
    entries = np.vstack([osize[None, :], body.T]).astype(np.int64)
    return CorrelatorMatrix(
        n,
        ("1",) + tuple(w.canonical for w in en.words),
        tuple(o.canonical for o in en.outcomes),
        entries,
    )


def positivity_rows(n):
    """``[(outcome orbit, coefficients)]`` with
    ``p_o = 4**-n * (1 + sum_w coeff[w] * E_w)``.

    Coefficients are integers (a numpy int64 vector over the sorted word
    orbits).
    """
    en = enumerate_all(n)
    r = _character_rows(n)
    return [(o, r[i]) for i, o in enumerate(en.outcomes)]


def positivity_matrix(n):
    """Integer matrix of :func:`positivity_rows`, shape (outcomes, words)."""
    return _character_rows(n)


def probabilities_from_correlators(n, values, exact=False):
    """Per-outcome probabilities of every orbit for correlator values given in
    word-orbit order."""
    r = _character_rows(n)
    if exact:
        scale = Fraction(1, 4**n)
        return [
            scale * (1 + sum(int(c) * Fraction(v) for c, v in zip(row, values) if c))
            for row in r
        ]
    return (1.0 + r @ np.asarray(values, dtype=float)) / 4.0**n
