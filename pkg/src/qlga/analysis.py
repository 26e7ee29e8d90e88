"""Oracles and measurements: transfer matrices, dispersion, continuum error, inverse density."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import dynamics as dyn
from . import state as st
from .gates import CollisionSpec, KineticParams, build_collision_matrix
from .lattice import BRICK1D, QLGA, LatticeSpec, build_lattice

DEGENERACY_ATOL = 1e-9
NONZERO_THRESHOLD = 1e-10


def kappa_of(k: int, lattice: LatticeSpec) -> float:
    """Commensurate angular wave number ``2 pi k / (l epsilon)``."""
    return 2 * math.pi * k / (lattice.l * lattice.epsilon)


# brick transfer matrix ---------------------------------------------------------


def transfer_matrix(a: complex, b: complex, kappa: float, epsilon: float) -> np.ndarray:
    """Two-pass map of the cell amplitudes ``(alpha, beta)`` of a plane wave.

    Convention: ``psi_2j = alpha e^{i kappa 2j eps}``,
    ``psi_2j+1 = beta e^{i kappa (2j+1) eps}``, even pairs first, then odd pairs.
    """
    t = kappa * epsilon
    off = a * b * 2 * math.cos(t)
    return np.array(
        [[b * b + a * a * cmath.exp(-2j * t), off], [off, b * b + a * a * cmath.exp(2j * t)]],
        dtype=np.complex128,
    )


def smooth_eigenvalue(a: complex, b: complex, kappa_eps: float) -> complex:
    """Closed-form eigenvalue of the branch connected to ``(1, 1)``."""
    a, b = complex(a), complex(b)
    t = kappa_eps
    # valid (a, b) make (a/b)^2 real and negative, so the radicand is positive
    radicand = 1 - (a / b) ** 2 * math.sin(t) ** 2
    return b * b + a * a * math.cos(2 * t) + 2 * a * b * math.cos(t) * cmath.sqrt(radicand)


@dataclass(frozen=True, eq=False)
class TransferEigen:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    smooth_index: int
    closed_form: complex
    degenerate: bool

    @property
    def smooth_value(self) -> complex:
        return complex(self.eigenvalues[self.smooth_index])

    @property
    def smooth_vector(self) -> np.ndarray:
        return self.eigenvectors[:, self.smooth_index]

    @property
    def disagreement(self) -> float:
        return abs(self.smooth_value - self.closed_form)


def _smooth_index(vectors: np.ndarray) -> int:
    ref = np.ones(vectors.shape[0]) / math.sqrt(vectors.shape[0])
    return int(np.argmax(np.abs(ref @ vectors)))


def transfer_eigen(a: complex, b: complex, kappa: float, epsilon: float) -> TransferEigen:
    """Eigenpairs of :func:`transfer_matrix`, directly and in closed form."""
    if b == 0:
        raise ValueError("closed form needs b != 0")
    m = transfer_matrix(a, b, kappa, epsilon)
    w, v = np.linalg.eig(m)
    v = v / np.linalg.norm(v, axis=0)
    idx = _smooth_index(v)
    return TransferEigen(
        matrix=m,
        eigenvalues=w,
        eigenvectors=v,
        smooth_index=idx,
        closed_form=smooth_eigenvalue(a, b, kappa * epsilon),
        degenerate=bool(abs(w[0] - w[1]) < DEGENERACY_ATOL),
    )


def brick_bloch_vector(lattice: LatticeSpec, params: KineticParams, k: int, first_parity: str = dyn.ODD) -> np.ndarray:
    """Normalized smooth-branch Bloch mode for the brick circuit.

    Two passes starting with ``first_parity`` multiply it by the smooth
    eigenvalue. Starting with the odd pass is the even-first circuit on the
    lattice shifted by one site, so the mode is shifted accordingly.
    """
    if lattice.mode != BRICK1D:
        raise ValueError("brick Bloch modes need a brick1d lattice")
    kappa = kappa_of(k, lattice)
    te = transfer_eigen(params.a, params.b, kappa, lattice.epsilon)
    if te.degenerate:
        if np.max(np.abs(te.matrix - te.matrix[0, 0] * np.eye(2))) > DEGENERACY_ATOL:
            raise ValueError(f"transfer matrix is degenerate at k={k}; branch choice is ambiguous")
        # scalar transfer matrix: every vector is an eigenvector, keep the smooth one
        alpha, beta = 1 / math.sqrt(2), 1 / math.sqrt(2)
    else:
        alpha, beta = te.smooth_vector
    x = np.arange(lattice.l)
    psi = np.where(x % 2 == 0, alpha, beta) * np.exp(1j * kappa * lattice.epsilon * x)
    if first_parity == dyn.ODD:
        psi = np.roll(psi, 1)
    return psi / np.linalg.norm(psi)


# lattice-gas transfer matrix ---------------------------------------------------


def qlga_transfer(C: np.ndarray, kappa_vec, epsilon: float) -> np.ndarray:
    """One step (advection, then collision) acting on a plane wave's channel amplitudes."""
    K = C.shape[0]
    d = K // 2
    kappa_vec = np.asarray(kappa_vec, dtype=float)
    vel = np.zeros((K, d))
    for c in range(K):
        vel[c, c // 2] = 1 if c % 2 == 0 else -1
    return C @ np.diag(np.exp(-1j * epsilon * vel @ kappa_vec))


def qlga_smooth_mode(C: np.ndarray, kappa_vec, epsilon: float) -> tuple[complex, np.ndarray]:
    w, v = np.linalg.eig(qlga_transfer(C, kappa_vec, epsilon))
    v = v / np.linalg.norm(v, axis=0)
    idx = _smooth_index(v)
    return complex(w[idx]), v[:, idx]


def qlga_bloch_vector(lattice: LatticeSpec, C: np.ndarray, k: int, axis: int = 0) -> np.ndarray:
    if lattice.mode != QLGA:
        raise ValueError("lattice-gas Bloch modes need a qlga lattice")
    kappa = np.zeros(lattice.d)
    kappa[axis] = kappa_of(k, lattice)
    _, u = qlga_smooth_mode(C, kappa, lattice.epsilon)
    channels = np.arange(lattice.num_qbits) % lattice.channels_per_site
    psi = u[channels] * np.exp(1j * lattice.positions @ kappa)
    return psi / np.linalg.norm(psi)


# phase rescaling and dispersion -----------------------------------------------


def rescale_phase(trajectory, a: complex, b: complex, steps=None) -> list[np.ndarray]:
    """Multiply snapshot ``t`` by ``(a + b)^(-t)``; ``steps`` defaults to 0, 1, 2, ..."""
    g = complex(a) + complex(b)
    if g == 0:
        raise ValueError("a + b = 0: the phase cannot be factored out")
    snaps = [np.asarray(s.vector if hasattr(s, "vector") else s) for s in trajectory]
    steps = range(len(snaps)) if steps is None else steps
    return [s * g ** (-t) for s, t in zip(snaps, steps)]


class MassCheck(NamedTuple):
    mass: complex
    real: bool


def mass_consistency(mu: complex, nu: complex, d: int, atol: float = 1e-10) -> MassCheck:
    """Mass from ``i / (2m) = (1/d) (nu / (mu - nu) + 1/2)``."""
    mu, nu = complex(mu), complex(nu)
    if mu == nu:
        raise ValueError("mu = nu: the mass relation divides by zero")
    rhs = (nu / (mu - nu) + 0.5) / d
    if rhs == 0:
        return MassCheck(complex(math.inf), True)
    m = 1j / (2 * rhs)
    real = abs(m.imag) <= atol * max(1.0, abs(m))
    return MassCheck(complex(m.real) if real else m, real)


@dataclass(eq=False)
class DispersionResult:
    model: str
    ks: list
    kappas: list
    omegas: list
    coefficient: float
    mass: float
    target_mass: float
    residual: float
    ambiguous: list = field(default_factory=list)

    @property
    def rel_error(self) -> float:
        return abs(self.mass - self.target_mass) / abs(self.target_mass)

    def rows(self):
        for k, kap, om in zip(self.ks, self.kappas, self.omegas):
            model = self.coefficient * kap * kap
            yield {"k": k, "kappa": kap, "omega_measured": om, "omega_model": model, "residual": om - model}


def _fit_quadratic(kappas, omegas) -> tuple[float, float]:
    k2 = np.asarray(kappas) ** 2
    om = np.asarray(omegas)
    mask = k2 > 0
    if not np.any(mask):
        raise ValueError("need at least one nonzero wave number to fit")
    c = float(k2[mask] @ om[mask] / (k2[mask] @ k2[mask]))
    resid = float(np.sqrt(np.mean((om - c * k2) ** 2)))
    return c, resid


def measure_dispersion(model, lattice: LatticeSpec, k_list, steps: int, statistics: str = "hard-boson") -> DispersionResult:
    """Evolve exact smooth-branch Bloch modes through the circuit and fit ``omega = c kappa^2``.

    ``model`` is :class:`KineticParams` (brick) or :class:`CollisionSpec` (lattice gas).
    The per-step rescale is ``(a + b)`` or ``mu``; time per step is ``epsilon^2``.
    """
    eps = lattice.epsilon
    if isinstance(model, KineticParams):
        if lattice.mode != BRICK1D:
            raise ValueError("kinetic parameters need a brick1d lattice")
        if steps % 2:
            raise ValueError("brick dispersion needs an even number of steps")
        per = 2
        g = model.a + model.b
        target = model.mass
        cfg_kw = {"kinetic": model}
    elif isinstance(model, CollisionSpec):
        if lattice.mode != QLGA:
            raise ValueError("a collision spec needs a qlga lattice")
        per = 1
        g = model.mu
        target = mass_consistency(model.mu, model.nu, lattice.d).mass.real
        C = build_collision_matrix(model, lattice.d)
        cfg_kw = {"collision": model}
    else:
        raise TypeError("model must be KineticParams or CollisionSpec")
    if steps < per:
        raise ValueError("need at least one full period of steps")
    kappas, omegas, ambiguous = [], [], []
    for k in k_list:
        if isinstance(model, KineticParams):
            vec = brick_bloch_vector(lattice, model, k)
        else:
            vec = qlga_bloch_vector(lattice, C, k)
        state = st.empty_sector(lattice, 1, statistics)
        state.vector[:] = vec
        cfg = dyn.RunConfig(lattice=lattice, statistics=statistics, steps=per, **cfg_kw)
        stepper = dyn.Stepper(cfg)
        overlaps = []
        t = 0
        prev = state.vector.copy()
        while t < steps:
            for _ in range(per):
                stepper.step(state, t)
                t += 1
            overlaps.append(np.vdot(prev, state.vector) / g**per)
            prev = state.vector.copy()
        increments = np.angle(np.asarray(overlaps))
        if np.any(np.abs(increments) > math.pi / 2):
            ambiguous.append(k)
        total = float(np.sum(increments))
        kappas.append(kappa_of(k, lattice))
        omegas.append(-total / (t * eps**2))
    c, resid = _fit_quadratic(kappas, omegas)
    return DispersionResult(
        model=lattice.mode,
        ks=list(k_list),
        kappas=kappas,
        omegas=omegas,
        coefficient=c,
        mass=1 / (2 * c) if c else math.inf,
        target_mass=float(np.real(target)),
        residual=resid,
        ambiguous=ambiguous,
    )


# reference Schrodinger integrator ----------------------------------------------


@dataclass(eq=False)
class OracleResult:
    x: np.ndarray
    psi: np.ndarray
    norm_drift: float
    error_estimate: float | None


def _periodic_laplacian(nx: int, dx: float) -> sp.csc_matrix:
    lap = sp.diags([np.ones(nx - 1), -2 * np.ones(nx), np.ones(nx - 1)], [-1, 0, 1], format="lil")
    lap[0, nx - 1] = 1
    lap[nx - 1, 0] = 1
    return (lap / dx**2).tocsc()


def _crank_nicolson(psi0, length, mass, T, nx, nt, potential, pair, n):
    dx = length / nx
    x = dx * np.arange(nx)
    lap1 = _periodic_laplacian(nx, dx)
    if n == 1:
        kinetic = -lap1 / (2 * mass)
        diag = potential(x) if potential is not None else np.zeros(nx)
    elif n == 2:
        eye = sp.identity(nx, format="csc")
        kinetic = -(sp.kron(lap1, eye) + sp.kron(eye, lap1)) / (2 * mass)
        x1, x2 = np.meshgrid(x, x, indexing="ij")
        diag = np.zeros((nx, nx))
        if potential is not None:
            diag += potential(x1) + potential(x2)
        if pair is not None:
            diag += pair(x1, x2)
        diag = diag.ravel()
    else:
        raise ValueError("reference integrator supports one or two particles")
    H = (kinetic + sp.diags(diag)).tocsc()
    dt = T / nt
    eye = sp.identity(H.shape[0], format="csc")
    lu = spla.splu((eye + 0.5j * dt * H).tocsc())
    rhs_op = (eye - 0.5j * dt * H).tocsr()
    psi = np.asarray(psi0(x) if n == 1 else psi0(*np.meshgrid(x, x, indexing="ij")), dtype=np.complex128).ravel()
    psi = psi / math.sqrt(np.vdot(psi, psi).real * dx**n)
    for _ in range(nt):
        psi = lu.solve(rhs_op @ psi)
        if not np.all(np.isfinite(psi)):
            raise ArithmeticError("reference solve produced non-finite values")
    drift = abs(math.sqrt(np.vdot(psi, psi).real * dx**n) - 1.0)
    return x, psi.reshape((nx,) * n), drift


def oracle_pde(psi0, length: float, mass: float, T: float, nx: int, nt: int,
               potential=None, pair=None, n: int = 1, estimate: bool = True) -> OracleResult:
    """Crank-Nicolson solution of ``i dpsi/dt = -(1/2m) sum d^2 psi + V psi`` on a periodic box.

    ``psi0``, ``potential`` and ``pair`` are callables on grid positions
    ``x = j * length / nx``; the result is normalized in the continuum sense
    (``sum |psi|^2 dx^n = 1``). With ``estimate`` the discretization error is
    estimated by Richardson extrapolation against a run at half resolution.
    """
    if nx % 2 or nt % 2:
        raise ValueError("nx and nt must be even")
    x, psi, drift = _crank_nicolson(psi0, length, mass, T, nx, nt, potential, pair, n)
    err = None
    if estimate:
        _, coarse, _ = _crank_nicolson(psi0, length, mass, T, nx // 2, nt // 2, potential, pair, n)
        fine = psi[(slice(None, None, 2),) * n]
        dxc = length / (nx // 2)
        # second-order scheme: error of the fine run is about a third of the difference
        err = math.sqrt(np.sum(np.abs(fine - coarse) ** 2) * dxc**n) / 3
    return OracleResult(x, psi, drift, err)


def continuum_error(run_psi: np.ndarray, run_time: float, reference: np.ndarray, reference_time: float,
                    epsilon: float, atol: float = 1e-9) -> float:
    """L2 distance after optimal global phase alignment.

    ``run_psi`` holds lattice amplitudes (``sum |psi|^2 = 1``); ``reference`` holds
    continuum values at the same sites and is scaled by ``sqrt(epsilon)``.
    """
    if abs(run_time - reference_time) > atol * max(1.0, abs(run_time)):
        raise ValueError(f"physical times differ: {run_time!r} vs {reference_time!r}")
    u = np.asarray(run_psi).ravel()
    v = np.asarray(reference).ravel() * math.sqrt(epsilon)
    if u.shape != v.shape:
        raise ValueError("run and reference have different shapes")
    sq = np.vdot(u, u).real + np.vdot(v, v).real - 2 * abs(np.vdot(v, u))
    return math.sqrt(max(sq, 0.0))


def fit_order(epsilons, errors) -> float:
    return float(np.polyfit(np.log(epsilons), np.log(errors), 1)[0])


@dataclass(eq=False)
class ConvergenceResult:
    epsilons: list
    errors: list
    order: float
    reference_error: float
    reference_norm_drift: float
    run_norm_drift: float

    @property
    def reference_ok(self) -> bool:
        """Reference error at most 10% of the smallest measured error."""
        return self.reference_error <= 0.1 * min(self.errors)


def convergence_study(params: KineticParams, length: float, T: float, h: float, levels=(4, 2, 1),
                      center: float | None = None, width: float = 1.0, momentum: float = 2.0,
                      potential=None, refine: int = 4, reference_dt: float | None = None) -> ConvergenceResult:
    """Brick-model Gaussian packet at spacings ``level * h`` against the reference integrator.

    The reference grid spacing is ``h / refine``; steps per level are ``T / eps^2``.
    """
    center = length / 2 - 2.0 if center is None else center
    mass = params.mass

    def packet(x):
        return np.exp(-((x - center) ** 2) / (4 * width**2) + 1j * momentum * x)

    nx = int(round(length / h)) * refine
    dt = reference_dt if reference_dt is not None else (h / refine) ** 2 * 4
    nt = 2 * int(math.ceil(T / dt / 2))
    ref = oracle_pde(packet, length, mass, T, nx, nt, potential=potential)
    epsilons, errors, drift = [], [], 0.0
    for level in levels:
        eps = level * h
        l = int(round(length / eps))
        steps = int(round(T / eps**2))
        if l % 2 or abs(l * eps - length) > 1e-9 or abs(steps * eps**2 - T) > 1e-9:
            raise ValueError(f"spacing {eps} is not commensurate with the box and time")
        lat = build_lattice(1, l, eps, BRICK1D)
        field_ = None if potential is None else dyn.PotentialField(potential(lat.positions[:, 0]))
        state = st.empty_sector(lat, 1)
        state.vector[:] = packet(lat.positions[:, 0])
        st.normalize(state)
        cfg = dyn.RunConfig(lattice=lat, kinetic=params, external=field_, steps=steps)
        res = dyn.run(cfg, state)
        drift = max(drift, abs(st.norm(res.state) - 1.0))
        stride = nx // l
        errors.append(continuum_error(res.state.vector, res.elapsed_time, ref.psi[::stride], T, eps))
        epsilons.append(eps)
    return ConvergenceResult(
        epsilons=epsilons,
        errors=errors,
        order=fit_order(epsilons, errors),
        reference_error=ref.error_estimate,
        reference_norm_drift=ref.norm_drift,
        run_norm_drift=drift,
    )


# representation cross-check ----------------------------------------------------


def dense_vs_sector_check(cfg: dyn.RunConfig) -> float:
    """Run ``cfg`` in both representations; max amplitude deviation after mapping to dense."""
    import dataclasses

    sector_cfg = dataclasses.replace(cfg, representation="sector")
    dense_cfg = dataclasses.replace(cfg, representation="dense")
    s = dyn.run(sector_cfg).state
    d = dyn.run(dense_cfg).state
    return float(np.max(np.abs(st.sector_to_dense(s).vector - d.vector)))


# non-local single-step operator ------------------------------------------------


def nonlocal_M(a: complex, b: complex, l: int) -> np.ndarray:
    """Periodic tridiagonal ``M``: ``b`` on the diagonal, ``a`` on both neighbours."""
    if l < 3:
        raise ValueError("the tridiagonal operator needs l >= 3")
    col = np.zeros(l, dtype=np.complex128)
    col[0], col[1], col[-1] = b, a, a
    return scipy.linalg.circulant(col)


@dataclass(eq=False)
class InverseDensity:
    l: int
    density: float
    unitary: bool
    unitarity_defect: float
    max_method_gap: float
    histogram: list
    bin_edges: list


def nonlocal_M_density(a: complex, b: complex, l: int, threshold: float = NONZERO_THRESHOLD) -> InverseDensity:
    """Fraction of entries of ``M^-1`` above ``threshold`` in magnitude.

    The inverse is computed by dense inversion and cross-checked against a
    circulant solve. The histogram bins ``log10 |entry|`` (zeros in the lowest bin).
    """
    if l > 512:
        raise ValueError("l is limited to 512")
    a, b = complex(a), complex(b)
    M = nonlocal_M(a, b, l)
    spectrum = b + 2 * a * np.cos(2 * np.pi * np.arange(l) / l)
    if np.min(np.abs(spectrum)) < 1e-14:
        raise np.linalg.LinAlgError("M is singular for these parameters")
    inv = np.linalg.inv(M)
    e0 = np.zeros(l)
    e0[0] = 1
    col = scipy.linalg.solve_circulant(M[:, 0], e0)
    gap = float(np.max(np.abs(scipy.linalg.circulant(col) - inv)))
    mags = np.abs(inv).ravel()
    density = float(np.count_nonzero(mags > threshold)) / mags.size
    logs = np.log10(np.maximum(mags, 1e-300))
    hist, edges = np.histogram(np.clip(logs, -20, 1), bins=np.arange(-20, 2))
    defect = float(np.max(np.abs(M.conj().T @ M - np.eye(l))))
    return InverseDensity(
        l=l,
        density=density,
        unitary=defect < 1e-12,
        unitarity_defect=defect,
        max_method_gap=gap,
        histogram=hist.tolist(),
        bin_edges=edges.tolist(),
    )


def nonlocal_params(theta: float, phase: float = 0.0) -> tuple[complex, complex]:
    """``(a, b)`` with ``|b|^2 + 2|a|^2 = 1`` and ``a conj(b) + conj(a) b = 0``."""
    g = cmath.exp(1j * phase)
    return 1j * math.sin(theta) / math.sqrt(2) * g, math.cos(theta) * g
