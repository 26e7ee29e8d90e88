"""Pure-Python/numpy implementations of the hot kernels.

Mirrors the compiled ``_kernels`` module function for function. Gate layers
are vectorized with numpy (per pair for multi-particle sectors); site blocks
on multi-particle sectors fall back to explicit loops.
"""

import numpy as np

NAME = "python"


def set_num_threads(n):
    # serial implementation; accepted for interface parity
    return None


def _insert_zero_bits(k, lo, hi):
    k = ((k >> lo) << (lo + 1)) | (k & ((1 << lo) - 1))
    k = ((k >> hi) << (hi + 1)) | (k & ((1 << hi) - 1))
    return k


def _parity(x):
    return (np.bitwise_count(x) & 1).astype(np.int64)


def dense_gate(psi, g, i, j, fermion):
    n = psi.shape[0]
    lo, hi = min(i, j), max(i, j)
    base = _insert_zero_bits(np.arange(n >> 2, dtype=np.int64), lo, hi)
    bi, bj = np.int64(1 << i), np.int64(1 << j)
    idx = (base, base | bi, base | bj, base | bi | bj)
    v = [psi[x] for x in idx]
    if fermion:
        between = np.int64(((1 << hi) - 1) & ~((1 << (lo + 1)) - 1))
        s = 1 - 2 * _parity(base & between)
        psi[idx[0]] = g[0, 0] * v[0]
        psi[idx[1]] = g[1, 1] * v[1] + s * g[1, 2] * v[2]
        psi[idx[2]] = s * g[2, 1] * v[1] + g[2, 2] * v[2]
        psi[idx[3]] = g[3, 3] * v[3]
    else:
        for r in range(4):
            psi[idx[r]] = g[r, 0] * v[0] + g[r, 1] * v[1] + g[r, 2] * v[2] + g[r, 3] * v[3]


def _rank(row, binom):
    return sum(int(binom[c, k + 1]) for k, c in enumerate(row))


def sector_gate_layer(amp, configs, occ_ptr, occ_idx, binom, pairs, g, fermion):
    C, n = configs.shape
    if n == 1:
        i = pairs[:, 0]
        j = pairs[:, 1]
        x = amp[i].copy()
        y = amp[j].copy()
        amp[i] = g[1, 1] * x + g[1, 2] * y
        amp[j] = g[2, 1] * x + g[2, 2] * y
        if g[0, 0] != 1:
            # pairs in a layer are disjoint: each q-bit sees g00 from every other pair
            hits = np.zeros(C, dtype=np.int64)
            np.add.at(hits, pairs.ravel(), 1)
            amp *= g[0, 0] ** (len(pairs) - hits)
        return
    for p in range(len(pairs)):
        i, j = int(pairs[p, 0]), int(pairs[p, 1])
        lo, hi = min(i, j), max(i, j)
        if g[0, 0] != 1:
            untouched = ~((configs == i) | (configs == j)).any(axis=1)
            amp[untouched] *= g[0, 0]
        rows = occ_idx[occ_ptr[i] : occ_ptr[i + 1]]
        cfg = configs[rows]
        both = (cfg == j).any(axis=1)
        amp[rows[both]] *= g[3, 3]
        rows, cfg = rows[~both], cfg[~both]
        partners = np.sort(np.where(cfg == i, j, cfg), axis=1)
        r2 = binom[partners, np.arange(1, n + 1)].sum(axis=1)
        s = np.ones(len(rows))
        if fermion:
            s = 1 - 2 * (np.count_nonzero((cfg > lo) & (cfg < hi), axis=1) & 1)
        x, y = amp[rows].copy(), amp[r2].copy()
        amp[rows] = g[1, 1] * x + s * g[1, 2] * y
        amp[r2] = s * g[2, 1] * x + g[2, 2] * y


def sector_site_blocks(amp, configs, occ_ptr, occ_idx, binom, bases, K, U, patterns, offsets):
    C, n = configs.shape
    if n == 1:
        # one-particle patterns are 1, 2, 4, ... in channel order
        block = U[np.ix_(patterns[1 : K + 1], patterns[1 : K + 1])]
        idx = bases[:, None] + np.arange(K)[None, :]
        amp[idx] = amp[idx] @ block.T
        if U[0, 0] != 1:
            hits = np.zeros(C, dtype=np.int64)
            np.add.at(hits, idx.ravel(), 1)
            amp *= U[0, 0] ** (len(bases) - hits)
        return
    for base in bases:
        base = int(base)
        if U[0, 0] != 1:
            for r in range(C):
                row = configs[r]
                if not np.any((row >= base) & (row < base + K)):
                    amp[r] *= U[0, 0]
        for t in range(occ_ptr[base], occ_ptr[base + 1]):
            r = occ_idx[t]
            row = configs[r]
            inside = (row >= base) & (row < base + K)
            local = int(np.sum(1 << (row[inside] - base)))
            k = int(np.count_nonzero(inside))
            if local != (1 << k) - 1:
                continue
            rest = row[~inside]
            pats = patterns[offsets[k] : offsets[k + 1]]
            ranks = []
            for q in pats:
                bits = [base + c for c in range(K) if (q >> c) & 1]
                ranks.append(_rank(np.sort(np.concatenate([rest, bits])), binom))
            ranks = np.array(ranks)
            block = U[np.ix_(pats, pats)]
            amp[ranks] = block @ amp[ranks]
