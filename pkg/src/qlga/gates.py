"""Unitaries of the lattice algorithms and their validity constraints.

Two-q-bit matrices use the basis ``|dd>, |ud>, |du>, |uu>``, i.e. local
index ``sigma_i + 2 * sigma_j`` for a gate acting on q-bits ``(i, j)``.
Multi-q-bit site blocks follow the same rule: bit ``c`` of the local index is
the occupation of channel ``c``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

HARD_BOSON = "hard-boson"
FERMION = "fermion"
STATISTICS = (HARD_BOSON, FERMION)

ATOL = 1e-12


def _check_statistics(statistics: str) -> str:
    if statistics not in STATISTICS:
        raise ValueError(f"statistics must be one of {STATISTICS}, got {statistics!r}")
    return statistics


def is_number_conserving(matrix: np.ndarray, atol: float = ATOL) -> bool:
    """True when ``matrix`` only couples local basis states of equal popcount."""
    dim = matrix.shape[0]
    counts = np.array([bin(p).count("1") for p in range(dim)])
    mask = counts[:, None] != counts[None, :]
    return bool(np.all(np.abs(matrix[mask]) <= atol))


def unitarity_defect(matrix: np.ndarray) -> float:
    m = np.asarray(matrix)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


@dataclass(frozen=True, eq=False)
class TwoQbitGate:
    matrix: np.ndarray
    number_conserving: bool = field(default=False)
    name: str = "gate"

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        if m.shape != (4, 4):
            raise ValueError(f"two-q-bit gate needs a 4x4 matrix, got {m.shape}")
        if unitarity_defect(m) > ATOL:
            raise ValueError(f"{self.name} is not unitary (defect {unitarity_defect(m):.3e})")
        conserving = is_number_conserving(m)
        if self.number_conserving and not conserving:
            raise ValueError(f"{self.name} is flagged number-conserving but mixes particle numbers")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "number_conserving", conserving)


def validate_kinetic(a: complex, b: complex, atol: float = ATOL) -> tuple[bool, float]:
    """Check ``|a|^2 + |b|^2 = 1`` and ``a conj(b) + conj(a) b = 0``.

    Returns ``(ok, mass)`` with ``mass = i b / a``; ``inf`` when ``a = 0``
    (the particle never hops) and ``nan`` when the constraints fail.
    """
    a, b = complex(a), complex(b)
    norm_ok = abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) <= atol
    cross_ok = abs(a * b.conjugate() + a.conjugate() * b) <= atol
    if not (norm_ok and cross_ok):
        return False, math.nan
    if a == 0:
        return True, math.inf
    m = 1j * b / a
    if abs(m.imag) > atol * max(1.0, abs(m)):
        return False, math.nan
    return True, m.real


def kinetic_violations(a: complex, b: complex, atol: float = ATOL) -> list[str]:
    """Names of the violated kinetic constraints (empty when valid)."""
    a, b = complex(a), complex(b)
    out = []
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > atol:
        out.append(f"normalization |a|^2+|b|^2 = 1 (got {abs(a) ** 2 + abs(b) ** 2!r})")
    cross = a * b.conjugate() + a.conjugate() * b
    if abs(cross) > atol:
        out.append(f"unitarity a*conj(b)+conj(a)*b = 0 (got {cross.real!r})")
    return out


@dataclass(frozen=True)
class KineticParams:
    a: complex
    b: complex

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        problems = kinetic_violations(self.a, self.b)
        if problems:
            raise ValueError("invalid kinetic parameters: " + "; ".join(problems))

    @classmethod
    def from_angle(cls, theta: float, phase: float = 0.0) -> "KineticParams":
        """``a = i sin(theta) e^{i phase}``, ``b = cos(theta) e^{i phase}``; mass ``cot(theta)``."""
        g = cmath.exp(1j * phase)
        return cls(1j * math.sin(theta) * g, math.cos(theta) * g)

    @property
    def mass(self) -> float:
        return validate_kinetic(self.a, self.b)[1]


def build_s_gate(params: KineticParams, phi: float = 0.0) -> TwoQbitGate:
    a, b = params.a, params.b
    m = np.array(
        [
            [1, 0, 0, 0],
            [0, b, a, 0],
            [0, a, b, 0],
            [0, 0, 0, cmath.exp(-1j * phi)],
        ],
        dtype=np.complex128,
    )
    return TwoQbitGate(m, number_conserving=True, name="s")


def build_exchange_gate(statistics: str = HARD_BOSON) -> TwoQbitGate:
    """Swap of two q-bit states; the fermionic version flips the sign of ``|uu>``."""
    _check_statistics(statistics)
    m = np.zeros((4, 4), dtype=np.complex128)
    m[0, 0] = 1
    m[1, 2] = m[2, 1] = 1
    m[3, 3] = -1 if statistics == FERMION else 1
    return TwoQbitGate(m, number_conserving=True, name=f"exchange[{statistics}]")


def build_external_phase(U_value: float, epsilon: float) -> np.ndarray:
    """Single-q-bit ``diag(1, exp(-i eps^2 U))``."""
    if not math.isfinite(U_value):
        raise ValueError("potential value must be finite")
    return np.diag([1.0, cmath.exp(-1j * epsilon**2 * U_value)]).astype(np.complex128)


def build_pair_phase(U_value: float, epsilon: float) -> TwoQbitGate:
    if not math.isfinite(U_value):
        raise ValueError("pair potential value must be finite")
    m = np.diag([1, 1, 1, cmath.exp(-1j * epsilon**2 * U_value)]).astype(np.complex128)
    return TwoQbitGate(m, number_conserving=True, name="pair-phase")


@dataclass(frozen=True)
class CollisionSpec:
    mu: complex
    nu: complex
    lam: complex
    phi_onsite: float = 0.0
    statistics: str = HARD_BOSON

    def __post_init__(self):
        for name in ("mu", "nu", "lam"):
            z = complex(getattr(self, name))
            object.__setattr__(self, name, z)
            if abs(abs(z) - 1.0) > ATOL:
                raise ValueError(f"collision eigenvalue {name} must be unimodular, |{name}| = {abs(z)!r}")
        object.__setattr__(self, "phi_onsite", float(self.phi_onsite))
        _check_statistics(self.statistics)

    @classmethod
    def from_kinetic(cls, params: KineticParams, **kw) -> "CollisionSpec":
        """1D collision matching the brick model: ``mu = a + b``, ``nu = a - b``.

        ``lam`` has no eigenvectors in one dimension; it is set to ``mu``.
        """
        mu = params.a + params.b
        return cls(mu=mu, nu=params.a - params.b, lam=mu, **kw)


def collision_projectors(d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Projectors onto the constant vector, parity-odd vectors and the remainder."""
    K = 2 * d
    parity = np.zeros((K, K))
    for c in range(K):
        parity[c, c ^ 1] = 1.0
    p_mu = np.full((K, K), 1.0 / K)
    p_nu = (np.eye(K) - parity) / 2
    p_lam = (np.eye(K) + parity) / 2 - p_mu
    return p_mu, p_nu, p_lam


def build_collision_matrix(spec: CollisionSpec, d: int) -> np.ndarray:
    p_mu, p_nu, p_lam = collision_projectors(d)
    return spec.mu * p_mu + spec.nu * p_nu + spec.lam * p_lam


def _hermitian_log(C: np.ndarray, atol: float = ATOL) -> np.ndarray:
    # C = exp(-i h); C is normal, so the complex Schur form is diagonal.
    T, Z = scipy.linalg.schur(C, output="complex")
    eig = np.diag(T)
    if np.max(np.abs(T - np.diag(eig))) > 1e-10:
        raise ValueError("collision matrix is not normal")
    if np.any(np.abs(eig + 1.0) <= atol):
        raise ValueError("collision matrix has eigenvalue -1; logarithm branch is ambiguous, perturb the phases")
    h = -np.angle(eig)
    return (Z * h) @ Z.conj().T


def fock_hopping_matrix(K: int, c: int, c2: int, fermion: bool) -> np.ndarray:
    """Matrix of ``a_c^dagger a_{c2}`` on the 2^K local Fock space."""
    dim = 1 << K
    out = np.zeros((dim, dim))
    for s in range(dim):
        if not (s >> c2) & 1:
            continue
        t = s & ~(1 << c2)
        if (t >> c) & 1:
            continue
        sign = 1
        if fermion:
            sign = (-1) ** (bin(s & ((1 << c2) - 1)).count("1") + bin(t & ((1 << c) - 1)).count("1"))
        out[t | (1 << c), s] = sign
    return out


def lift_collision(C: np.ndarray, spec: CollisionSpec) -> np.ndarray:
    """Number-conserving many-body site unitary whose one-particle block is ``C``.

    ``exp(-i H_int) exp(-i H_kin)`` with ``H_kin = sum h_{cc'} a_c^+ a_c'``,
    ``C = exp(-i h)``, and ``H_int = phi_onsite * sum_{c<c'} n_c n_c'``.
    """
    C = np.asarray(C, dtype=np.complex128)
    K = C.shape[0]
    if K > 8:
        raise ValueError("site blocks are limited to 8 channels")
    if unitarity_defect(C) > 1e-10:
        raise ValueError("collision matrix is not unitary")
    h = _hermitian_log(C)
    fermion = spec.statistics == FERMION
    dim = 1 << K
    H = np.zeros((dim, dim), dtype=np.complex128)
    for c in range(K):
        for c2 in range(K):
            if abs(h[c, c2]) > 0:
                H += h[c, c2] * fock_hopping_matrix(K, c, c2, fermion)
    kin = scipy.linalg.expm(-1j * H)
    pairs = np.array([bin(p).count("1") for p in range(dim)])
    interaction = np.exp(-1j * spec.phi_onsite * pairs * (pairs - 1) / 2)
    return interaction[:, None] * kin


def single_particle_block(lift: np.ndarray) -> np.ndarray:
    K = lift.shape[0].bit_length() - 1
    idx = [1 << c for c in range(K)]
    return lift[np.ix_(idx, idx)]
