# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled gate kernels for dense vectors and fixed-number sectors."""

from cython.parallel cimport prange
from libc.stdlib cimport malloc, free

ctypedef double complex cplx
ctypedef long long i64

NAME = "cython"

cdef int _threads = 1


cdef extern from *:
    int __builtin_parityll(unsigned long long) nogil


def set_num_threads(int n):
    global _threads
    _threads = max(1, n)


cdef inline unsigned long long _insert(unsigned long long k, int pos) noexcept nogil:
    return ((k >> pos) << (pos + 1)) | (k & ((1ULL << pos) - 1))


def dense_gate(cplx[::1] psi, const cplx[:, ::1] g, int i, int j, bint fermion):
    cdef Py_ssize_t quarter = psi.shape[0] >> 2
    cdef int lo = i if i < j else j
    cdef int hi = j if i < j else i
    cdef unsigned long long bi = 1ULL << i
    cdef unsigned long long bj = 1ULL << j
    cdef unsigned long long between = ((1ULL << hi) - 1) & ~((1ULL << (lo + 1)) - 1)
    cdef Py_ssize_t k
    cdef unsigned long long base, i0, i1, i2, i3
    cdef cplx v0, v1, v2, v3, s
    cdef cplx g00 = g[0, 0], g01 = g[0, 1], g02 = g[0, 2], g03 = g[0, 3]
    cdef cplx g10 = g[1, 0], g11 = g[1, 1], g12 = g[1, 2], g13 = g[1, 3]
    cdef cplx g20 = g[2, 0], g21 = g[2, 1], g22 = g[2, 2], g23 = g[2, 3]
    cdef cplx g30 = g[3, 0], g31 = g[3, 1], g32 = g[3, 2], g33 = g[3, 3]
    for k in prange(quarter, nogil=True, num_threads=_threads, schedule="static"):
        base = _insert(_insert(<unsigned long long>k, lo), hi)
        i0 = base
        i1 = base | bi
        i2 = base | bj
        i3 = base | bi | bj
        v0 = psi[i0]
        v1 = psi[i1]
        v2 = psi[i2]
        v3 = psi[i3]
        if fermion:
            s = 1.0
            if __builtin_parityll(base & between):
                s = -1.0
            psi[i0] = g00 * v0
            psi[i1] = g11 * v1 + s * g12 * v2
            psi[i2] = s * g21 * v1 + g22 * v2
            psi[i3] = g33 * v3
        else:
            psi[i0] = g00 * v0 + g01 * v1 + g02 * v2 + g03 * v3
            psi[i1] = g10 * v0 + g11 * v1 + g12 * v2 + g13 * v3
            psi[i2] = g20 * v0 + g21 * v1 + g22 * v2 + g23 * v3
            psi[i3] = g30 * v0 + g31 * v1 + g32 * v2 + g33 * v3


cdef inline bint _row_has(const i64[:, ::1] configs, Py_ssize_t r, i64 q, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(n):
        if configs[r, k] == q:
            return True
        if configs[r, k] > q:
            return False
    return False


def sector_gate_layer(cplx[::1] amp, const i64[:, ::1] configs, const i64[::1] occ_ptr,
                      const i64[::1] occ_idx, const i64[:, ::1] binom, const i64[:, ::1] pairs,
                      const cplx[:, ::1] g, bint fermion):
    cdef Py_ssize_t C = configs.shape[0], n = configs.shape[1]
    cdef Py_ssize_t p, t, k, r, r2, pos, between
    cdef i64 i, j, lo, hi, c
    cdef bint has_j, inserted
    cdef cplx x, y, s
    cdef cplx g00 = g[0, 0], g11 = g[1, 1], g12 = g[1, 2], g21 = g[2, 1], g22 = g[2, 2], g33 = g[3, 3]
    with nogil:
        for p in range(pairs.shape[0]):
            i = pairs[p, 0]
            j = pairs[p, 1]
            lo = i if i < j else j
            hi = j if i < j else i
            if g00 != 1.0:
                for r in range(C):
                    if not _row_has(configs, r, i, n) and not _row_has(configs, r, j, n):
                        amp[r] = amp[r] * g00
            for t in range(occ_ptr[i], occ_ptr[i + 1]):
                r = occ_idx[t]
                has_j = False
                between = 0
                for k in range(n):
                    c = configs[r, k]
                    if c == j:
                        has_j = True
                    elif c > lo and c < hi:
                        between += 1
                if has_j:
                    amp[r] = amp[r] * g33
                    continue
                # rank of the row with i replaced by j
                r2 = 0
                pos = 0
                inserted = False
                for k in range(n):
                    c = configs[r, k]
                    if c == i:
                        continue
                    if not inserted and j < c:
                        r2 += binom[j, pos + 1]
                        pos += 1
                        inserted = True
                    r2 += binom[c, pos + 1]
                    pos += 1
                if not inserted:
                    r2 += binom[j, pos + 1]
                s = 1.0
                if fermion and (between & 1):
                    s = -1.0
                x = amp[r]
                y = amp[r2]
                amp[r] = g11 * x + s * g12 * y
                amp[r2] = s * g21 * x + g22 * y


def sector_site_blocks(cplx[::1] amp, const i64[:, ::1] configs, const i64[::1] occ_ptr,
                       const i64[::1] occ_idx, const i64[:, ::1] binom, const i64[::1] bases,
                       int K, const cplx[:, ::1] U, const i64[::1] patterns, const i64[::1] offsets):
    cdef Py_ssize_t C = configs.shape[0], n = configs.shape[1]
    cdef Py_ssize_t b, t, r, k, m, a, q, e, pos, nin, rank, nrest
    cdef i64 base, c, local, pat
    cdef bint inside_any
    cdef cplx u00 = U[0, 0], acc
    cdef i64 *rest = <i64 *> malloc(n * sizeof(i64))
    cdef i64 *ranks = <i64 *> malloc(256 * sizeof(i64))
    cdef cplx *vin = <cplx *> malloc(256 * sizeof(cplx))
    if rest == NULL or ranks == NULL or vin == NULL:
        free(rest); free(ranks); free(vin)
        raise MemoryError()
    try:
        with nogil:
            for b in range(bases.shape[0]):
                base = bases[b]
                if u00 != 1.0:
                    for r in range(C):
                        inside_any = False
                        for k in range(n):
                            if configs[r, k] >= base and configs[r, k] < base + K:
                                inside_any = True
                                break
                        if not inside_any:
                            amp[r] = amp[r] * u00
                for t in range(occ_ptr[base], occ_ptr[base + 1]):
                    r = occ_idx[t]
                    local = 0
                    nin = 0
                    nrest = 0
                    for k in range(n):
                        c = configs[r, k]
                        if c >= base and c < base + K:
                            local |= (<i64> 1) << (c - base)
                            nin += 1
                        else:
                            rest[nrest] = c
                            nrest += 1
                    if local != ((<i64> 1) << nin) - 1:
                        continue
                    m = offsets[nin + 1] - offsets[nin]
                    for a in range(m):
                        pat = patterns[offsets[nin] + a]
                        # merge rest (sorted) with the block q-bits (sorted, contiguous)
                        rank = 0
                        pos = 0
                        e = 0
                        while e < nrest and rest[e] < base:
                            rank += binom[rest[e], pos + 1]
                            pos += 1
                            e += 1
                        for q in range(K):
                            if (pat >> q) & 1:
                                rank += binom[base + q, pos + 1]
                                pos += 1
                        while e < nrest:
                            rank += binom[rest[e], pos + 1]
                            pos += 1
                            e += 1
                        ranks[a] = rank
                        vin[a] = amp[rank]
                    for a in range(m):
                        acc = 0.0
                        for q in range(m):
                            acc = acc + U[patterns[offsets[nin] + a], patterns[offsets[nin] + q]] * vin[q]
                        amp[ranks[a]] = acc
    finally:
        free(rest)
        free(ranks)
        free(vin)
