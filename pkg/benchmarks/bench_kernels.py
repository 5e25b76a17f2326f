"""Time the numba and numpy versions of each kernel on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Both versions are called directly, so the OPI_TRIANGLE_NO_NUMBA flag does not
matter here. The first numba call (compilation or cache load) is excluded.
"""
import argparse
import time

import numpy as np

from opi_triangle import kernels as K, local, orbits
from opi_triangle.opi import CHARACTER_TABLE


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    n = 8
    yield "canonical_keys n=8", K._canonical_keys_numba, K._canonical_keys_numpy, (n, 3, K.dihedral_maps(n))

    en = orbits.enumerate_all(6)
    reps = np.array([[int(c) for c in o.canonical] for o in en.outcomes], dtype=np.int64)
    args = (reps, en.word_ids, len(en.words), K.digit_table(6).astype(np.int64),
            CHARACTER_TABLE.astype(np.int64))
    yield "character_sums n=6", K._character_sums_numba, K._character_sums_numpy, args

    tables = np.random.default_rng(0).integers(0, 4, size=(1 << 16, 3, 2, 2), dtype=np.int8)
    yield "outcome_counts k=2 x65536", K._outcome_counts_numba, K._outcome_counts_numpy, (tables,)

    counts = K._outcome_counts_numba(tables)
    args = (counts, 8.0, local._W2, local._W3, local._CLASS)
    yield "count_statistics x65536", K._count_statistics_numba, K._count_statistics_numpy, args

    masks, cells = local._cell_sets(4)
    args = (masks, cells, 0, 60, 8, 1 << 16)
    yield "saturating_triples k=4 60 rows", K._saturating_triples_numba, K._saturating_triples_numpy, args


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'kernel':34s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, fast, slow, inputs in cases():
        fast(*inputs)  # compile or load from cache
        tf = best_of(fast, inputs, args.repeat)
        ts = best_of(slow, inputs, args.repeat)
        print(f"{name:34s} {tf:10.4f} {ts:10.4f} {ts / tf:8.1f}x")


if __name__ == "__main__":
    main()
