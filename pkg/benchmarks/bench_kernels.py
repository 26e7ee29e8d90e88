"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each case runs the same inputs through both backends, checks that the results
agree, and prints the best wall time of ``--repeat`` runs.
"""

import argparse
import time

import numpy as np

from qlga import _kernels_py
from qlga import state as st
from qlga.dynamics import collision_lift
from qlga.gates import CollisionSpec
from qlga.lattice import QLGA, advection_schedule, build_lattice

try:
    from qlga import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def dense_case(rng, N=20):
    psi = rng.normal(size=1 << N) + 1j * rng.normal(size=1 << N)
    psi /= np.linalg.norm(psi)
    g = st.random_number_conserving_gate(rng).matrix
    pairs = [(q, (q + 5) % N) for q in range(N)]

    def make(k):
        def go():
            v = psi.copy()
            for i, j in pairs:
                k.dense_gate(v, g, i, j, True)
            return v
        return go

    return f"dense gates, N={N}, {len(pairs)} gates", make


def sector_layer_case(rng, n=2):
    lat = build_lattice(2, 8, 0.1, QLGA)
    s = st.random_sector_state(lat, n, "fermion", rng)
    b = s.basis
    g = st.random_number_conserving_gate(rng).matrix
    layers = [np.ascontiguousarray(sch.pairs) for sch in advection_schedule(lat)]

    def make(k):
        def go():
            v = s.vector.copy()
            for pairs in layers:
                k.sector_gate_layer(v, b.configs, b.occ_ptr, b.occ_idx, b.binom, pairs, g, True)
            return v
        return go

    return f"sector advection, N={lat.num_qbits}, n={n}, {b.size} configs", make


def site_block_case(rng, n=2):
    lat = build_lattice(2, 8, 0.1, QLGA)
    s = st.random_sector_state(lat, n, "hard-boson", rng)
    b = s.basis
    U = collision_lift(CollisionSpec(1, 1j, np.exp(0.4j), 0.3), 2)
    pats, offs = st._patterns(4)
    bases = np.arange(lat.num_sites, dtype=np.int64) * 4

    def make(k):
        def go():
            v = s.vector.copy()
            k.sector_site_blocks(v, b.configs, b.occ_ptr, b.occ_idx, b.binom, bases, 4, U, pats, offs)
            return v
        return go

    return f"sector collision, N={lat.num_qbits}, n={n}, {b.size} configs", make


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)
    if _kernels_c is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'case':<52} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}")
    for case in (dense_case, sector_layer_case, site_block_case):
        label, make = case(rng)
        ref = make(_kernels_py)()
        t_py = best_time(make(_kernels_py), args.repeat)
        if _kernels_c is None:
            print(f"{label:<52} {t_py:11.4f}")
            continue
        out = make(_kernels_c)()
        gap = np.max(np.abs(out - ref))
        assert gap < 1e-12, f"backends disagree by {gap}"
        t_c = best_time(make(_kernels_c), args.repeat)
        print(f"{label:<52} {t_py:11.4f} {t_c:11.4f} {t_py / t_c:8.1f}x")


if __name__ == "__main__":
    main()
