"""Dense and fixed-particle-number state vectors.

A :class:`SectorState` stores one amplitude per sorted occupancy tuple, laid out
in colexicographic (combinadic) rank order so that the rank of a tuple is
``sum_k C(c_k, k + 1)``. Fermionic amplitudes are relative to ascending
canonical order; :func:`sector_to_dense` places them unchanged on the
matching bitstring, so the dense vector carries the Jordan-Wigner convention.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._backend import kernels
from .gates import FERMION, HARD_BOSON, STATISTICS, TwoQbitGate, is_number_conserving, unitarity_defect
from .lattice import LatticeSpec

DENSE_LIMIT = 24
NORM_ATOL = 1e-12
SAMPLE_NORM_ATOL = 1e-9


class SectorBasis:
    """Enumeration of all ``n``-subsets of ``N`` q-bits with rank lookup tables."""

    def __init__(self, num_qbits: int, n: int):
        if n < 0 or n > num_qbits:
            raise ValueError(f"cannot place {n} particles on {num_qbits} q-bits")
        if n > 64:
            raise ValueError("sectors are limited to 64 particles")
        self.num_qbits = num_qbits
        self.n = n
        size = math.comb(num_qbits, n)
        if size > 50_000_000:
            raise MemoryError(f"sector of {size} configurations is too large")
        binom = np.zeros((num_qbits + 1, n + 2), dtype=np.int64)
        for x in range(num_qbits + 1):
            for y in range(n + 2):
                binom[x, y] = math.comb(x, y)
        self.binom = binom
        if n == 1:
            configs = np.arange(num_qbits, dtype=np.int64)[:, None]
        elif n == 0:
            configs = np.zeros((1, 0), dtype=np.int64)
        else:
            lex = np.fromiter(
                itertools.chain.from_iterable(itertools.combinations(range(num_qbits), n)),
                dtype=np.int64,
                count=size * n,
            ).reshape(size, n)
            configs = np.empty_like(lex)
            configs[self.ranks(lex)] = lex
        self.configs = np.ascontiguousarray(configs)
        self.size = size
        flat = self.configs.ravel()
        order = np.argsort(flat, kind="stable")
        self.occ_idx = np.ascontiguousarray(order // max(n, 1), dtype=np.int64)
        counts = np.bincount(flat, minlength=num_qbits)
        self.occ_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        for arr in (self.binom, self.configs, self.occ_idx, self.occ_ptr):
            arr.setflags(write=False)

    def ranks(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, self.n)
        cols = np.arange(1, self.n + 1)
        return self.binom[rows, cols].sum(axis=1)

    def rank(self, occupied) -> int:
        row = tuple(sorted(int(q) for q in occupied))
        if len(row) != self.n:
            raise ValueError(f"expected {self.n} occupied q-bits, got {len(row)}")
        return int(sum(self.binom[c, k + 1] for k, c in enumerate(row)))

    def masks(self) -> np.ndarray:
        """Bitstring index of every configuration (``N`` must fit in 63 bits)."""
        if self.num_qbits > 62:
            raise ValueError("bitmasks need at most 62 q-bits")
        return (np.int64(1) << self.configs).sum(axis=1) if self.n else np.zeros(1, dtype=np.int64)


@lru_cache(maxsize=32)
def sector_basis(num_qbits: int, n: int) -> SectorBasis:
    return SectorBasis(num_qbits, n)


@dataclass(eq=False)
class DenseState:
    num_qbits: int
    vector: np.ndarray
    statistics: str = HARD_BOSON

    def copy(self) -> "DenseState":
        return DenseState(self.num_qbits, self.vector.copy(), self.statistics)

    def amplitude(self, bits) -> complex:
        idx = int(bits, 2) if isinstance(bits, str) else sum(1 << q for q in bits)
        return complex(self.vector[idx])


@dataclass(eq=False)
class SectorState:
    num_qbits: int
    n: int
    statistics: str
    vector: np.ndarray
    lattice: LatticeSpec | None = None

    @property
    def basis(self) -> SectorBasis:
        return sector_basis(self.num_qbits, self.n)

    def copy(self) -> "SectorState":
        return SectorState(self.num_qbits, self.n, self.statistics, self.vector.copy(), self.lattice)

    def amplitude(self, occupied) -> complex:
        return complex(self.vector[self.basis.rank(occupied)])

    def items(self, atol: float = 0.0):
        """Yield ``(occupancy tuple, amplitude)`` in rank order, skipping ``|amp| <= atol``."""
        configs = self.basis.configs
        for r in np.flatnonzero(np.abs(self.vector) > atol) if atol else range(len(self.vector)):
            yield tuple(int(c) for c in configs[r]), complex(self.vector[r])

    def as_dict(self, atol: float = 0.0) -> dict:
        return dict(self.items(atol))


State = DenseState | SectorState


def _num_qbits(lattice_or_N) -> tuple[int, LatticeSpec | None]:
    if isinstance(lattice_or_N, LatticeSpec):
        return lattice_or_N.num_qbits, lattice_or_N
    return int(lattice_or_N), None


def empty_sector(lattice_or_N, n: int, statistics: str = HARD_BOSON) -> SectorState:
    N, lattice = _num_qbits(lattice_or_N)
    if statistics not in STATISTICS:
        raise ValueError(f"unknown statistics {statistics!r}")
    basis = sector_basis(N, n)
    return SectorState(N, n, statistics, np.zeros(basis.size, dtype=np.complex128), lattice)


def empty_dense(N: int, statistics: str = HARD_BOSON, dense_limit: int = DENSE_LIMIT) -> DenseState:
    if N > dense_limit:
        raise ValueError(f"{N} q-bits exceed the dense limit of {dense_limit}")
    if statistics not in STATISTICS:
        raise ValueError(f"unknown statistics {statistics!r}")
    return DenseState(N, np.zeros(1 << N, dtype=np.complex128), statistics)


def init_basis(
    lattice_or_N,
    occupied=(),
    statistics: str = HARD_BOSON,
    representation: str = "sector",
    dense_limit: int = DENSE_LIMIT,
) -> State:
    """Unit-norm basis state with the given q-bits in state up."""
    N, lattice = _num_qbits(lattice_or_N)
    occ = [int(q) for q in occupied]
    if len(set(occ)) != len(occ):
        raise ValueError(f"duplicate occupied q-bits in {occ}")
    bad = [q for q in occ if not 0 <= q < N]
    if bad:
        raise ValueError(f"q-bits {bad} out of range [0, {N})")
    if representation == "dense":
        st = empty_dense(N, statistics, dense_limit)
        st.vector[sum(1 << q for q in occ)] = 1.0
        return st
    if representation != "sector":
        raise ValueError(f"unknown representation {representation!r}")
    st = empty_sector(lattice_or_N, len(occ), statistics)
    st.vector[st.basis.rank(occ)] = 1.0
    return st


def norm(state: State) -> float:
    return float(np.linalg.norm(state.vector))


def inner_product(s1: State, s2: State) -> complex:
    """``<s1|s2>``, antilinear in the first argument."""
    if type(s1) is not type(s2) or s1.num_qbits != s2.num_qbits:
        raise ValueError("inner product needs states of the same representation and size")
    if isinstance(s1, SectorState) and s1.n != s2.n:
        raise ValueError("inner product needs equal particle numbers")
    return complex(np.vdot(s1.vector, s2.vector))


def _check_pair(state: State, i: int, j: int):
    N = state.num_qbits
    if i == j:
        raise ValueError(f"gate needs two distinct q-bits, got ({i}, {j})")
    if not (0 <= i < N and 0 <= j < N):
        raise IndexError(f"q-bit pair ({i}, {j}) out of range")


def _gate_matrix(state: State, gate) -> np.ndarray:
    g = gate.matrix if isinstance(gate, TwoQbitGate) else np.ascontiguousarray(gate, dtype=np.complex128)
    conserving = gate.number_conserving if isinstance(gate, TwoQbitGate) else is_number_conserving(g)
    if isinstance(state, SectorState) and not conserving:
        raise ValueError("sector states only accept number-conserving gates")
    if state.statistics == FERMION and not conserving:
        raise ValueError("fermionic states only accept number-conserving gates")
    return g


def apply_gate(state: State, gate, i: int, j: int) -> State:
    """Act with a two-q-bit gate on q-bits ``(i, j)`` in place.

    For fermionic states the gate is read as an operator on modes ``i, j``:
    hopping between them picks up the parity of the occupied modes in between.
    """
    _check_pair(state, i, j)
    g = _gate_matrix(state, gate)
    fermion = state.statistics == FERMION
    if isinstance(state, DenseState):
        kernels.dense_gate(state.vector, g, int(i), int(j), fermion)
    else:
        b = state.basis
        kernels.sector_gate_layer(
            state.vector, b.configs, b.occ_ptr, b.occ_idx, b.binom,
            np.array([[i, j]], dtype=np.int64), g, fermion,
        )
    return state


def apply_gate_layer(state: State, gate, pairs) -> State:
    """Apply the same gate to every pair of a disjoint schedule."""
    pairs = np.ascontiguousarray(getattr(pairs, "pairs", pairs), dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return state
    flat = pairs.ravel()
    if len(np.unique(flat)) != len(flat):
        raise ValueError("pairs in a layer must be disjoint")
    if np.any(pairs[:, 0] == pairs[:, 1]) or flat.min() < 0 or flat.max() >= state.num_qbits:
        raise ValueError("invalid q-bit pair in layer")
    g = _gate_matrix(state, gate)
    fermion = state.statistics == FERMION
    if isinstance(state, DenseState):
        for i, j in pairs:
            kernels.dense_gate(state.vector, g, int(i), int(j), fermion)
    else:
        b = state.basis
        kernels.sector_gate_layer(state.vector, b.configs, b.occ_ptr, b.occ_idx, b.binom, pairs, g, fermion)
    return state


@lru_cache(maxsize=8)
def _patterns(K: int) -> tuple[np.ndarray, np.ndarray]:
    pats = sorted(range(1 << K), key=lambda p: (bin(p).count("1"), p))
    counts = np.bincount([bin(p).count("1") for p in pats], minlength=K + 2)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return np.array(pats, dtype=np.int64), offsets


def apply_site_blocks(state: State, block: np.ndarray, bases) -> State:
    """Apply a number-conserving ``2^K`` block to each run of ``K`` contiguous q-bits.

    ``bases`` lists the first q-bit of each run; runs must not overlap. Runs are
    contiguous in canonical order, so no fermionic string sign arises.
    """
    U = np.ascontiguousarray(block, dtype=np.complex128)
    K = U.shape[0].bit_length() - 1
    if U.shape != (1 << K, 1 << K):
        raise ValueError("site block must be 2^K x 2^K")
    if not is_number_conserving(U, 1e-10):
        raise ValueError("site block must conserve particle number")
    bases = np.ascontiguousarray(bases, dtype=np.int64)
    if isinstance(state, DenseState):
        N = state.num_qbits
        for base in bases:
            t = state.vector.reshape(1 << (N - base - K), 1 << K, 1 << base)
            t[...] = np.einsum("ab,xby->xay", U, t)
        return state
    pats, offsets = _patterns(K)
    b = state.basis
    kernels.sector_site_blocks(
        state.vector, b.configs, b.occ_ptr, b.occ_idx, b.binom, bases, K, U, pats, offsets
    )
    return state


def _occupation_columns(state: State, qbits) -> np.ndarray:
    """(dim, k) boolean occupations of the listed q-bits for every basis entry."""
    if isinstance(state, DenseState):
        idx = np.arange(state.vector.size, dtype=np.int64)
        return np.stack([(idx >> q) & 1 for q in qbits], axis=1).astype(bool)
    configs = state.basis.configs
    return np.stack([(configs == q).any(axis=1) for q in qbits], axis=1)


def apply_phase(state: State, qbit_indices, phase_fn, atol: float = NORM_ATOL) -> State:
    """Diagonal operator: multiply each basis entry by ``phase_fn(pattern)``.

    ``pattern`` is the tuple of 0/1 occupations of ``qbit_indices``;
    ``phase_fn`` may also be a sequence indexed by ``sum(bit_t << t)``.
    """
    qbits = [int(q) for q in qbit_indices]
    k = len(qbits)
    if callable(phase_fn):
        table = np.array(
            [complex(phase_fn(tuple((p >> t) & 1 for t in range(k)))) for p in range(1 << k)]
        )
    else:
        table = np.asarray(phase_fn, dtype=np.complex128)
        if table.shape != (1 << k,):
            raise ValueError(f"phase table needs {1 << k} entries")
    if np.any(np.abs(np.abs(table) - 1.0) > atol):
        raise ValueError("phase factors must be unimodular")
    occ = _occupation_columns(state, qbits)
    pattern = (occ.astype(np.int64) << np.arange(k)).sum(axis=1)
    state.vector *= table[pattern]
    return state


def apply_qbit_phases(state: State, angles: np.ndarray) -> State:
    """Multiply by ``exp(-i sum_{q occupied} angles[q])``."""
    angles = np.asarray(angles, dtype=float)
    if isinstance(state, SectorState):
        if state.n:
            state.vector *= np.exp(-1j * angles[state.basis.configs].sum(axis=1))
        return state
    N = state.num_qbits
    for q in range(N):
        t = state.vector.reshape(1 << (N - q - 1), 2, 1 << q)
        t[:, 1, :] *= np.exp(-1j * angles[q])
    return state


def apply_pair_phases(state: State, angles: np.ndarray) -> State:
    """Multiply by ``exp(-i sum_{p<q occupied} angles[p, q])`` (``angles`` symmetric)."""
    if isinstance(state, DenseState):
        raise TypeError("use per-pair apply_phase on dense states")
    configs = state.basis.configs
    total = np.zeros(len(configs))
    for s, t in itertools.combinations(range(state.n), 2):
        total += angles[configs[:, s], configs[:, t]]
    state.vector *= np.exp(-1j * total)
    return state


def density_profile(state: State) -> np.ndarray:
    """Expected occupation of every q-bit."""
    p = np.abs(state.vector) ** 2
    if isinstance(state, SectorState):
        if state.n == 0:
            return np.zeros(state.num_qbits)
        weights = np.repeat(p, state.n)
        return np.bincount(state.basis.configs.ravel(), weights=weights, minlength=state.num_qbits)
    N = state.num_qbits
    return np.array([p.reshape(1 << (N - q - 1), 2, 1 << q)[:, 1, :].sum() for q in range(N)])


def particle_number(state: State) -> float:
    return float(density_profile(state).sum())


def _bitstring(occupied, N: int) -> str:
    bits = ["0"] * N
    for q in occupied:
        bits[N - 1 - q] = "1"
    return "".join(bits)


def sample_measurement(state: State, seed: int, shots: int | None = None):
    """Born-rule samples of all q-bits.

    Bitstrings are written most significant q-bit first, so q-bit ``k`` is the
    character ``N - 1 - k`` and an occupied q-bit 2 of 4 reads ``"0100"``.
    The stream depends only on ``seed`` and the state.
    """
    p = np.abs(state.vector) ** 2
    total = p.sum()
    if abs(total - 1.0) > SAMPLE_NORM_ATOL:
        raise ValueError(f"state is not normalized (norm^2 = {total!r})")
    rng = np.random.Generator(np.random.PCG64(seed))
    count = 1 if shots is None else int(shots)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    picks = np.searchsorted(cdf, rng.random(count), side="right")
    picks = np.minimum(picks, len(p) - 1)
    N = state.num_qbits
    if isinstance(state, DenseState):
        out = [format(int(k), f"0{N}b") if N else "" for k in picks]
    else:
        configs = state.basis.configs
        out = [_bitstring(configs[k], N) for k in picks]
    return out[0] if shots is None else out


def sector_to_dense(sector: SectorState, dense_limit: int = DENSE_LIMIT) -> DenseState:
    dense = empty_dense(sector.num_qbits, sector.statistics, dense_limit)
    dense.vector[sector.basis.masks()] = sector.vector
    return dense


def dense_to_sector(dense: DenseState, n: int, lattice: LatticeSpec | None = None, atol: float = 1e-10) -> SectorState:
    """Restrict a dense vector to its ``n``-particle sector; weight outside must vanish."""
    st = empty_sector(lattice if lattice is not None else dense.num_qbits, n, dense.statistics)
    masks = st.basis.masks()
    st.vector[:] = dense.vector[masks]
    outside = np.linalg.norm(dense.vector) ** 2 - np.linalg.norm(st.vector) ** 2
    if outside > atol:
        raise ValueError(f"dense state has weight {outside:.3e} outside the {n}-particle sector")
    return st


def permute_qbits(state: State, perm) -> State:
    """Relabel q-bit ``q`` as ``perm[q]`` (returns a new state).

    For fermions the amplitude picks up the sign of the permutation that
    restores ascending order.
    """
    perm = np.asarray(perm, dtype=np.int64)
    if isinstance(state, DenseState):
        N = state.num_qbits
        idx = np.arange(1 << N, dtype=np.int64)
        new_idx = np.zeros_like(idx)
        for q in range(N):
            new_idx |= ((idx >> q) & 1) << perm[q]
        out = state.copy()
        out.vector[:] = 0
        if state.statistics == FERMION:
            sign = np.ones(idx.size)
            for p in range(N):
                for q in range(p + 1, N):
                    if perm[p] > perm[q]:
                        both = ((idx >> p) & 1) & ((idx >> q) & 1)
                        sign[both == 1] *= -1
            out.vector[new_idx] = sign * state.vector
        else:
            out.vector[new_idx] = state.vector
        return out
    b = state.basis
    mapped = perm[b.configs]
    order = np.argsort(mapped, axis=1, kind="stable")
    rows = np.take_along_axis(mapped, order, axis=1)
    out = state.copy()
    out.vector[:] = 0
    vals = state.vector.copy()
    if state.statistics == FERMION and state.n > 1:
        inversions = np.zeros(len(mapped), dtype=np.int64)
        for s, t in itertools.combinations(range(state.n), 2):
            inversions += mapped[:, s] > mapped[:, t]
        vals *= 1 - 2 * (inversions & 1)
    out.vector[b.ranks(rows)] = vals
    return out


def normalize(state: State) -> State:
    nrm = norm(state)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    state.vector /= nrm
    return state


def random_sector_state(lattice_or_N, n: int, statistics: str, rng: np.random.Generator) -> SectorState:
    st = empty_sector(lattice_or_N, n, statistics)
    st.vector[:] = rng.normal(size=st.vector.size) + 1j * rng.normal(size=st.vector.size)
    return normalize(st)


def random_number_conserving_gate(rng: np.random.Generator) -> TwoQbitGate:
    """Haar-like random unitary on each particle-number block of two q-bits."""
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    m = np.zeros((4, 4), dtype=np.complex128)
    m[0, 0] = np.exp(1j * rng.uniform(0, 2 * np.pi))
    m[1:3, 1:3] = q
    m[3, 3] = np.exp(1j * rng.uniform(0, 2 * np.pi))
    assert unitarity_defect(m) < 1e-12
    return TwoQbitGate(m, number_conserving=True, name="random")
