"""Cartesian lattice geometry, q-bit indexing and pair schedules.

Q-bits are linearized channel-major within a site and row-major over sites
(the last axis varies fastest), so ``qbit = site * channels_per_site + channel``.
In QLGA mode channel ``2*i`` moves along ``+e_i`` and ``2*i + 1`` along ``-e_i``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

BRICK1D = "brick1d"
QLGA = "qlga"

BRICK_EVEN = "brick-even"
BRICK_ODD = "brick-odd"


@dataclass(frozen=True)
class LatticeSpec:
    d: int
    l: int
    epsilon: float
    channels_per_site: int
    mode: str

    @property
    def num_sites(self) -> int:
        return self.l**self.d

    @property
    def num_qbits(self) -> int:
        return self.channels_per_site * self.num_sites

    @property
    def length(self) -> float:
        """Physical side length of the periodic box."""
        return self.l * self.epsilon

    def qbit(self, site: int, channel: int = 0) -> int:
        if not 0 <= channel < self.channels_per_site:
            raise IndexError(f"channel {channel} out of range")
        if not 0 <= site < self.num_sites:
            raise IndexError(f"site {site} out of range")
        return site * self.channels_per_site + channel

    def site_of(self, qbit: int) -> int:
        return qbit // self.channels_per_site

    def channel_of(self, qbit: int) -> int:
        return qbit % self.channels_per_site

    def coords(self, site: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(site, (self.l,) * self.d))

    def site_index(self, coords) -> int:
        wrapped = tuple(int(c) % self.l for c in coords)
        return int(np.ravel_multi_index(wrapped, (self.l,) * self.d))

    def velocity(self, channel: int) -> tuple[int, ...]:
        if self.mode != QLGA:
            raise ValueError("velocities are only defined for QLGA lattices")
        v = [0] * self.d
        v[channel // 2] = 1 if channel % 2 == 0 else -1
        return tuple(v)

    def parity_partner(self, channel: int) -> int:
        return channel ^ 1

    @cached_property
    def site_coords(self) -> np.ndarray:
        """(num_sites, d) integer coordinates of every site."""
        grids = np.indices((self.l,) * self.d).reshape(self.d, -1)
        return np.ascontiguousarray(grids.T)

    @cached_property
    def qbit_sites(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_sites), self.channels_per_site)

    @cached_property
    def positions(self) -> np.ndarray:
        """(num_qbits, d) physical position of each q-bit."""
        return self.site_coords[self.qbit_sites] * self.epsilon


@dataclass(frozen=True, eq=False)
class PairSchedule:
    """A layer of disjoint q-bit pairs acted on in parallel."""

    tag: str
    pairs: np.ndarray

    def __post_init__(self):
        pairs = np.ascontiguousarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        flat = pairs.ravel()
        if len(np.unique(flat)) != len(flat):
            raise ValueError(f"schedule {self.tag!r} reuses a q-bit")
        pairs.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(map(tuple, self.pairs.tolist()))


def build_lattice(d: int, l: int, epsilon: float, mode: str = QLGA) -> LatticeSpec:
    errors = []
    if d < 1:
        errors.append(f"d must be >= 1, got {d}")
    if l < 2:
        errors.append(f"l must be >= 2, got {l}")
    if not epsilon > 0:
        errors.append(f"epsilon must be positive, got {epsilon}")
    if mode == BRICK1D:
        if d != 1:
            errors.append("brick1d mode requires d = 1")
        if l % 2:
            errors.append(f"brick1d mode requires an even l, got {l}")
        channels = 1
    elif mode == QLGA:
        channels = 2 * d
    else:
        errors.append(f"unknown lattice mode {mode!r}")
        channels = 0
    if errors:
        raise ValueError("; ".join(errors))
    return LatticeSpec(d=d, l=l, epsilon=float(epsilon), channels_per_site=channels, mode=mode)


def brick_schedules(lattice: LatticeSpec) -> tuple[PairSchedule, PairSchedule]:
    """Return the even pairing ``(2j, 2j+1)`` and the odd pairing ``(2j+1, 2j+2 mod l)``."""
    if lattice.mode != BRICK1D:
        raise ValueError("brick schedules need a brick1d lattice")
    l = lattice.l
    even = [(2 * j, 2 * j + 1) for j in range(l // 2)]
    odd = [(2 * j + 1, (2 * j + 2) % l) for j in range(l // 2)]
    return PairSchedule(BRICK_EVEN, np.array(even)), PairSchedule(BRICK_ODD, np.array(odd))


def _reflection_pairs(lattice: LatticeSpec, axis: int, offset: int, channel: int) -> list:
    # involution x_axis -> offset - x_axis (mod l); fixed points are skipped
    pairs = []
    coords = lattice.site_coords
    for site in range(lattice.num_sites):
        x = coords[site, axis]
        y = (offset - x) % lattice.l
        if y <= x:
            continue
        target = coords[site].copy()
        target[axis] = y
        partner = lattice.site_index(target)
        pairs.append((lattice.qbit(site, channel), lattice.qbit(partner, channel)))
    return pairs


def advection_schedule(lattice: LatticeSpec) -> list[PairSchedule]:
    """Exchange layers whose composition shifts every channel by its velocity.

    A cyclic shift is the product of the reflections ``x -> -x`` and
    ``x -> 1 - x``; each reflection is a set of disjoint transpositions. Per
    axis the first layer applies the first reflection to the ``+`` channel and
    the second to the ``-`` channel, the second layer the other way round.
    """
    if lattice.mode != QLGA:
        raise ValueError("advection needs a qlga lattice")
    layers = []
    for axis in range(lattice.d):
        plus, minus = 2 * axis, 2 * axis + 1
        tag = f"advection-axis-{axis + 1}"
        first = _reflection_pairs(lattice, axis, 0, plus) + _reflection_pairs(lattice, axis, 1, minus)
        second = _reflection_pairs(lattice, axis, 1, plus) + _reflection_pairs(lattice, axis, 0, minus)
        layers.append(PairSchedule(tag, np.array(first, dtype=np.int64)))
        layers.append(PairSchedule(tag, np.array(second, dtype=np.int64)))
    return layers


def schedule_permutation(num_qbits: int, schedules) -> np.ndarray:
    """Where the content of each q-bit ends up after swapping along ``schedules``."""
    where = np.arange(num_qbits)
    slot = np.arange(num_qbits)  # slot[q] = original q-bit currently held by q
    for sched in schedules:
        for i, j in sched:
            slot[i], slot[j] = slot[j], slot[i]
    where[slot] = np.arange(num_qbits)
    return where


def symmetry_permutation(lattice: LatticeSpec, axes, signs, shift=None) -> np.ndarray:
    """Q-bit permutation for the signed axis permutation ``x'_{axes[i]} = signs[i] * x_i + shift``.

    ``axes`` is a permutation of ``range(d)``; ``signs`` are +-1. Velocities
    transform like displacements, so the QLGA channels are permuted too.
    """
    d = lattice.d
    axes = list(axes)
    signs = list(signs)
    if sorted(axes) != list(range(d)) or any(s not in (1, -1) for s in signs):
        raise ValueError("axes must permute range(d) and signs must be +-1")
    shift = np.zeros(d, dtype=int) if shift is None else np.asarray(shift, dtype=int)
    coords = lattice.site_coords
    new = np.empty_like(coords)
    for i in range(d):
        new[:, axes[i]] = signs[i] * coords[:, i]
    new = (new + shift) % lattice.l
    new_sites = np.ravel_multi_index(tuple(new.T), (lattice.l,) * d)
    K = lattice.channels_per_site
    perm = np.empty(lattice.num_qbits, dtype=np.int64)
    for c in range(K):
        if lattice.mode == QLGA:
            axis, neg = divmod(c, 2)
            flipped = neg ^ (signs[axis] < 0)
            c_new = 2 * axes[axis] + flipped
        else:
            c_new = c
        perm[np.arange(lattice.num_sites) * K + c] = new_sites * K + c_new
    return perm


def hyperoctahedral_generators(d: int):
    """(axes, signs) pairs generating the symmetry group of the cubic lattice."""
    gens = [(list(range(d)), [-1] + [1] * (d - 1))]
    for i in range(d - 1):
        axes = list(range(d))
        axes[i], axes[i + 1] = axes[i + 1], axes[i]
        gens.append((axes, [1] * d))
    return gens


def all_hyperoctahedral(d: int):
    for axes in itertools.permutations(range(d)):
        for signs in itertools.product((1, -1), repeat=d):
            yield list(axes), list(signs)
