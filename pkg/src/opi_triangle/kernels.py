"""Hot loops shared by the orbit enumerator and the local-model lab.

Every kernel exists twice: a numba-compiled loop and a vectorised numpy
version. The public names at the bottom of the module are bound to one or
the other according to :mod:`opi_triangle._accel`.
"""
import numpy as np

from ._accel import njit, select

# ---------------------------------------------------------------------------
# digit strings
# ---------------------------------------------------------------------------


def digit_table(n):
    """All ``4**n`` base-4 strings as an ``(4**n, n)`` int8 array, position 0
    most significant."""
    codes = np.arange(4**n, dtype=np.int64)
    shifts = 2 * np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 3).astype(np.int8)


def dihedral_maps(n):
    """Index maps ``img[i] = word[m[i]]`` for the 2n symmetries of the n-gon."""
    maps = []
    for r in range(n):
        maps.append([(r + i) % n for i in range(n)])
        maps.append([(r - i) % n for i in range(n)])
    return np.array(maps, dtype=np.int64)


# ---------------------------------------------------------------------------
# canonical keys: min over dihedral images after first-appearance relabeling
# ---------------------------------------------------------------------------


@njit(cache=True)
def _canonical_keys_numba(n, nsym, maps):
    total = 4**n
    out = np.empty(total, dtype=np.int64)
    digits = np.empty(n, dtype=np.int64)
    relabel = np.empty(4, dtype=np.int64)
    for code in range(total):
        c = code
        for i in range(n - 1, -1, -1):
            digits[i] = c & 3
            c >>= 2
        best = code
        for g in range(maps.shape[0]):
            for s in range(4):
                relabel[s] = -1 if s < nsym else s
            nxt = 0
            key = 0
            for i in range(n):
                s = digits[maps[g, i]]
                if relabel[s] < 0:
                    relabel[s] = nxt
                    nxt += 1
                key = (key << 2) | relabel[s]
            if key < best:
                best = key
        out[code] = best
    return out


def _relabel_first_appearance(seq, nsym):
    rows = np.arange(seq.shape[0])
    mapping = np.full((seq.shape[0], 4), -1, dtype=np.int64)
    for s in range(nsym, 4):
        mapping[:, s] = s
    nxt = np.zeros(seq.shape[0], dtype=np.int64)
    out = np.empty(seq.shape, dtype=np.int64)
    for i in range(seq.shape[1]):
        s = seq[:, i].astype(np.int64)
        new = mapping[rows, s] < 0
        mapping[rows[new], s[new]] = nxt[new]
        nxt[new] += 1
        out[:, i] = mapping[rows, s]
    return out


def _canonical_keys_numpy(n, nsym, maps):
    digits = digit_table(n)
    weights = 4 ** np.arange(n - 1, -1, -1, dtype=np.int64)
    best = np.arange(4**n, dtype=np.int64)
    for m in maps:
        image = _relabel_first_appearance(digits[:, m], nsym)
        np.minimum(best, image @ weights, out=best)
    return best


# ---------------------------------------------------------------------------
# character sums: r[o, w] = sum over words with orbit id w of chi_word(x_o)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _character_sums_numba(reps, orbit_ids, n_orbits, digits, table):
    out = np.zeros((reps.shape[0], n_orbits), dtype=np.int64)
    n = reps.shape[1]
    for o in range(reps.shape[0]):
        for code in range(orbit_ids.shape[0]):
            w = orbit_ids[code]
            if w < 0:
                continue
            chi = 1
            for i in range(n):
                chi *= table[reps[o, i], digits[code, i]]
            out[o, w] += chi
    return out


def _character_sums_numpy(reps, orbit_ids, n_orbits, digits, table):
    valid = orbit_ids >= 0
    ids = orbit_ids[valid]
    out = np.zeros((reps.shape[0], n_orbits), dtype=np.int64)
    for o, rep in enumerate(reps):
        vec = np.ones(1, dtype=np.int64)
        for x in rep:
            vec = np.kron(vec, table[x])
        out[o] = np.bincount(ids, weights=vec[valid], minlength=n_orbits).round().astype(np.int64)
    return out


# ---------------------------------------------------------------------------
# grid strategies: outcome counts over the k**3 cells
# ---------------------------------------------------------------------------


@njit(cache=True)
def _outcome_counts_numba(tables):
    N, k = tables.shape[0], tables.shape[2]
    out = np.zeros((N, 64), dtype=np.int64)
    for s in range(N):
        for al in range(k):
            for be in range(k):
                c = tables[s, 2, al, be]
                for ga in range(k):
                    a = tables[s, 0, be, ga]
                    b = tables[s, 1, al, ga]
                    out[s, 16 * a + 4 * b + c] += 1
    return out


def _outcome_counts_numpy(tables):
    N, k = tables.shape[0], tables.shape[2]
    al, be, ga = np.meshgrid(np.arange(k), np.arange(k), np.arange(k), indexing="ij")
    al, be, ga = al.ravel(), be.ravel(), ga.ravel()
    t = tables.astype(np.int64)
    code = 16 * t[:, 0][:, be, ga] + 4 * t[:, 1][:, al, ga] + t[:, 2][:, al, be]
    flat = (np.arange(N, dtype=np.int64)[:, None] * 64 + code).ravel()
    return np.bincount(flat, minlength=N * 64).reshape(N, 64)


# ---------------------------------------------------------------------------
# saturating triples: cell sets (S_A, S_B, S_C) of one output whose common
# cube cells number exactly ``target``
# ---------------------------------------------------------------------------


@njit(cache=True)
def _saturating_triples_numba(masks, cells, start, stop, target, capacity):
    """``masks``: (M, k, k) 0/1 tables of every candidate cell set;
    ``cells``: (M, m) flat cell indices of the same sets."""
    M, k = masks.shape[0], masks.shape[1]
    m = cells.shape[1]
    out = np.empty((capacity, 3), dtype=np.int64)
    found = 0
    # rows as bitmasks, so a row product is a popcount
    rows = np.zeros((M, k), dtype=np.int64)
    for s in range(M):
        for r in range(k):
            bits = 0
            for c in range(k):
                if masks[s, r, c]:
                    bits |= 1 << c
            rows[s, r] = bits
    pop = np.zeros(1 << k, dtype=np.int64)
    for v in range(1 << k):
        pop[v] = pop[v >> 1] + (v & 1)
    w = np.zeros(k * k, dtype=np.int64)
    hist = np.zeros(k + 1, dtype=np.int64)
    for ia in range(start, stop):
        for ib in range(M):
            # w[al, be] = sum_ga A[be, ga] * B[al, ga]
            hist[:] = 0
            for al in range(k):
                for be in range(k):
                    v = pop[rows[ia, be] & rows[ib, al]]
                    w[al * k + be] = v
                    hist[v] += 1
            # largest possible sum over m cells, from the value histogram
            best = 0
            left = m
            for v in range(k, 0, -1):
                take = min(left, hist[v])
                best += take * v
                left -= take
                if left == 0:
                    break
            if best < target:
                continue
            for ic in range(M):
                acc = 0
                for i in range(m):
                    acc += w[cells[ic, i]]
                if acc == target:
                    if found == capacity:
                        return out, -1
                    out[found, 0] = ia
                    out[found, 1] = ib
                    out[found, 2] = ic
                    found += 1
    return out[:found], found


def _saturating_triples_numpy(masks, cells, start, stop, target, capacity):
    M, k = masks.shape[0], masks.shape[1]
    m = cells.shape[1]
    B = masks.astype(np.int64)
    hits = []
    for ia in range(start, stop):
        W = (B @ masks[ia].astype(np.int64).T).reshape(M, k * k)
        best = np.sort(W, axis=1)[:, k * k - m:].sum(axis=1)
        ibs = np.flatnonzero(best >= target)
        if not len(ibs):
            continue
        sums = W[ibs][:, cells].sum(axis=2)
        rows, ics = np.nonzero(sums == target)
        for r, ic in zip(rows, ics):
            hits.append((ia, ibs[r], ic))
    if len(hits) > capacity:
        return np.empty((capacity, 3), dtype=np.int64), -1
    arr = np.array(hits, dtype=np.int64).reshape(-1, 3)
    return arr, len(hits)


# ---------------------------------------------------------------------------
# per-strategy statistics from outcome counts
# ---------------------------------------------------------------------------


@njit(cache=True)
def _count_statistics_numba(counts, vol, w2, w3, cls):
    N = counts.shape[0]
    out = np.empty((N, 4))
    csum = np.zeros(3)
    ccount = np.zeros(3)
    for code in range(64):
        ccount[cls[code]] += 1.0
    pa = np.zeros(4)
    pb = np.zeros(4)
    pc = np.zeros(4)
    for s in range(N):
        e2 = 0.0
        e3 = 0.0
        csum[:] = 0.0
        pa[:] = 0.0
        pb[:] = 0.0
        pc[:] = 0.0
        for code in range(64):
            p = counts[s, code] / vol
            e2 += p * w2[code]
            e3 += p * w3[code]
            csum[cls[code]] += p
            pa[code >> 4] += p
            pb[(code >> 2) & 3] += p
            pc[code & 3] += p
        dev = 0.0
        margin = np.inf
        for code in range(64):
            p = counts[s, code] / vol
            d = abs(p - csum[cls[code]] / ccount[cls[code]])
            if d > dev:
                dev = d
            m = np.sqrt(pa[code >> 4] * pb[(code >> 2) & 3] * pc[code & 3]) - p
            if m < margin:
                margin = m
        out[s, 0] = e2
        out[s, 1] = e3
        out[s, 2] = dev
        out[s, 3] = margin
    return out


def _count_statistics_numpy(counts, vol, w2, w3, cls):
    P = counts / vol
    class_mean = np.stack([P[:, cls == c].mean(axis=1) for c in range(3)], axis=1)
    dev = np.abs(P - class_mean[:, cls]).max(axis=1)
    cube = P.reshape(-1, 4, 4, 4)
    pa, pb, pc = cube.sum(axis=(2, 3)), cube.sum(axis=(1, 3)), cube.sum(axis=(1, 2))
    bound = np.sqrt(pa[:, :, None, None] * pb[:, None, :, None] * pc[:, None, None, :])
    margin = (bound - cube).reshape(-1, 64).min(axis=1)
    return np.column_stack([P @ w2, P @ w3, dev, margin])


canonical_keys = select(_canonical_keys_numba, _canonical_keys_numpy)
character_sums = select(_character_sums_numba, _character_sums_numpy)
outcome_counts = select(_outcome_counts_numba, _outcome_counts_numpy)
saturating_triples = select(_saturating_triples_numba, _saturating_triples_numpy)

count_statistics = select(_count_statistics_numba, _count_statistics_numpy)
