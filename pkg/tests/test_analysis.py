import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as hst

from qlga import analysis as an, dynamics as dyn, state as st
from qlga.gates import CollisionSpec, KineticParams, build_collision_matrix
from qlga.lattice import BRICK1D, QLGA, build_lattice

angles = hst.floats(0.05, math.pi / 2 - 0.05)
phases = hst.floats(-math.pi, math.pi)


@given(angles, phases, hst.floats(0, math.pi))
def test_closed_form_matches_diagonalization(theta, phase, t):
    p = KineticParams.from_angle(theta, phase)
    te = an.transfer_eigen(p.a, p.b, t, 1.0)
    if not te.degenerate:
        assert te.disagreement < 1e-12
    assert abs(te.closed_form) == pytest.approx(1, abs=1e-12)


def test_transfer_matrix_at_zero_momentum_has_constant_eigenvector():
    p = KineticParams.from_angle(0.4)
    m = an.transfer_matrix(p.a, p.b, 0.0, 0.1)
    np.testing.assert_allclose(m @ np.ones(2), (p.a + p.b) ** 2 * np.ones(2), atol=1e-14)


@pytest.mark.parametrize("first", [dyn.ODD, dyn.EVEN])
@pytest.mark.parametrize("k", [0, 1, 5, 16, 31])
def test_bloch_vector_is_two_step_eigenvector(first, k):
    lat = build_lattice(1, 64, 0.1, BRICK1D)
    p = KineticParams.from_angle(0.6, 0.4)
    psi = an.brick_bloch_vector(lat, p, k, first)
    s = st.empty_sector(lat, 1)
    s.vector[:] = psi
    second = dyn.EVEN if first == dyn.ODD else dyn.ODD
    dyn.step_brick(s, lat, p, first)
    dyn.step_brick(s, lat, p, second)
    lam = an.smooth_eigenvalue(p.a, p.b, an.kappa_of(k, lat) * lat.epsilon)
    np.testing.assert_allclose(s.vector, lam * psi, atol=1e-12)


def test_bloch_vector_needs_brick_lattice():
    with pytest.raises(ValueError):
        an.brick_bloch_vector(build_lattice(1, 4, 1.0, QLGA), KineticParams.from_angle(0.3), 1)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_qlga_bloch_vector_is_step_eigenvector(d):
    lat = build_lattice(d, 4 if d < 3 else 3, 0.2, QLGA)
    spec = CollisionSpec(1, 1j, cmath.exp(0.5j))
    C = build_collision_matrix(spec, d)
    psi = an.qlga_bloch_vector(lat, C, 1)
    lam, _ = an.qlga_smooth_mode(C, [an.kappa_of(1, lat)] + [0] * (d - 1), lat.epsilon)
    s = st.empty_sector(lat, 1)
    s.vector[:] = psi
    dyn.qlga_step(s, lat, dyn.collision_lift(spec, d))
    np.testing.assert_allclose(s.vector, lam * psi, atol=1e-12)


@given(angles, phases)
def test_mass_relation_reduces_in_one_dimension(theta, phase):
    p = KineticParams.from_angle(theta, phase)
    m = an.mass_consistency(p.a + p.b, p.a - p.b, 1)
    assert m.real
    assert abs(m.mass - 1j * p.b / p.a) < 1e-12 * max(1, abs(m.mass))


def test_mass_relation_examples():
    assert an.mass_consistency(1, 1j, 3).mass == pytest.approx(3, abs=1e-12)
    assert an.mass_consistency(1, -1, 2).mass == math.inf
    with pytest.raises(ValueError, match="mu = nu"):
        an.mass_consistency(1j, 1j, 1)


def test_mass_relation_flags_complex_mass():
    m = an.mass_consistency(1, 0.5 + 0.1j, 1)
    assert not m.real


def test_rescale_phase():
    p = KineticParams.from_angle(0.3)
    g = p.a + p.b
    snaps = [np.ones(3) * g**t for t in range(4)]
    for s in an.rescale_phase(snaps, p.a, p.b):
        np.testing.assert_allclose(s, np.ones(3))
    with pytest.raises(ValueError):
        an.rescale_phase(snaps, 0.5, -0.5)


def test_brick_dispersion_small_lattice():
    lat = build_lattice(1, 128, 0.05, BRICK1D)
    p = KineticParams.from_angle(math.pi / 4)
    res = an.measure_dispersion(p, lat, [1, 2], 20)
    assert res.rel_error < 0.01
    rows = list(res.rows())
    assert set(rows[0]) == {"k", "kappa", "omega_measured", "omega_model", "residual"}
    with pytest.raises(ValueError, match="even"):
        an.measure_dispersion(p, lat, [1], 3)
    with pytest.raises(TypeError):
        an.measure_dispersion("free", lat, [1], 2)


def test_oracle_pde_plane_wave_and_norm():
    L, m, T = 2 * math.pi, 1.0, 0.5
    res = an.oracle_pde(lambda x: np.exp(2j * x), L, m, T, 128, 400)
    assert res.norm_drift < 1e-10
    # exact free evolution of a plane wave up to the scheme's small phase error
    expect = np.exp(2j * res.x - 1j * 2.0 * T) / math.sqrt(L)
    assert np.max(np.abs(res.psi - expect)) < 2e-3
    assert res.error_estimate is not None and res.error_estimate < 1e-2
    with pytest.raises(ValueError):
        an.oracle_pde(lambda x: x, L, m, T, 127, 10)


def test_oracle_pde_two_particles_separable():
    L = 8.0
    f = lambda x: np.exp(-((x - 4) ** 2))
    one = an.oracle_pde(f, L, 1.0, 0.2, 32, 20, potential=lambda x: 0.5 * (x - 4) ** 2, estimate=False)
    two = an.oracle_pde(lambda x, y: f(x) * f(y), L, 1.0, 0.2, 32, 20, potential=lambda x: 0.5 * (x - 4) ** 2,
                        n=2, estimate=False)
    # the implicit scheme splits over particles only up to O(dt^2) cross terms
    np.testing.assert_allclose(two.psi, np.outer(one.psi, one.psi), atol=1e-4)
    with pytest.raises(ValueError):
        an.oracle_pde(f, L, 1.0, 0.2, 32, 20, n=3)


def test_continuum_error_ignores_global_phase():
    u = np.array([0.6, 0.8j])
    assert an.continuum_error(u * cmath.exp(1.3j), 1.0, u, 1.0, 1.0) < 1e-12
    assert an.continuum_error(u, 1.0, u / math.sqrt(4.0), 1.0, 4.0) < 1e-12
    with pytest.raises(ValueError, match="times"):
        an.continuum_error(u, 1.0, u, 2.0, 1.0)


def test_fit_order():
    eps = np.array([0.4, 0.2, 0.1])
    assert an.fit_order(eps, 3 * eps**2) == pytest.approx(2)


def test_dense_vs_sector_small():
    lat = build_lattice(1, 6, 0.2, BRICK1D)
    cfg = dyn.RunConfig(lat, kinetic=KineticParams.from_angle(0.5), statistics="fermion", steps=8,
                        initial=dyn.InitialState(occupied=(0, 3)))
    assert an.dense_vs_sector_check(cfg) < 1e-12


def test_nonlocal_identity_density():
    res = an.nonlocal_M_density(0, 1, 16)
    assert res.density == 1 / 16
    assert res.unitary


def test_nonlocal_small_case_cross_check():
    a, b = an.nonlocal_params(0.8)
    res = an.nonlocal_M_density(a, b, 4)
    assert res.max_method_gap < 1e-12
    M = an.nonlocal_M(a, b, 4)
    np.testing.assert_allclose(M @ np.linalg.inv(M), np.eye(4), atol=1e-12)
    assert sum(res.histogram) == 16


def test_nonlocal_params_satisfy_constraints():
    for theta in (0.3, 1.0, 1.4):
        a, b = an.nonlocal_params(theta, 0.2)
        assert abs(b) ** 2 + 2 * abs(a) ** 2 == pytest.approx(1)
        assert abs(a * b.conjugate() + a.conjugate() * b) < 1e-15


def test_nonlocal_errors():
    with pytest.raises(ValueError):
        an.nonlocal_M_density(0.1, 0.9, 513)
    with pytest.raises(np.linalg.LinAlgError):
        an.nonlocal_M_density(0.5, 1.0, 4)  # b + 2a cos(pi) = 0
    with pytest.raises(ValueError):
        an.nonlocal_M(0.1, 0.9, 2)
