import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as hst

from qlga import state as st
from qlga.gates import FERMION, HARD_BOSON, build_exchange_gate
from qlga.lattice import QLGA, build_lattice
from oracles import embed, mode_operator

stats = hst.sampled_from([HARD_BOSON, FERMION])


def random_dense(N, statistics, rng):
    s = st.empty_dense(N, statistics)
    s.vector[:] = rng.normal(size=1 << N) + 1j * rng.normal(size=1 << N)
    return st.normalize(s)


def test_sector_basis_ranks_are_colex():
    b = st.sector_basis(6, 3)
    assert b.size == 20
    np.testing.assert_array_equal(b.ranks(b.configs), np.arange(20))
    assert tuple(b.configs[0]) == (0, 1, 2)
    assert tuple(b.configs[1]) == (0, 1, 3)
    for q in range(6):
        rows = b.occ_idx[b.occ_ptr[q]:b.occ_ptr[q + 1]]
        assert all(q in b.configs[r] for r in rows)
        assert len(rows) == math.comb(5, 2)


def test_sector_basis_edge_cases():
    assert st.sector_basis(5, 0).size == 1
    with pytest.raises(ValueError):
        st.SectorBasis(3, 4)


def test_init_basis():
    s = st.init_basis(8, [2, 5])
    assert s.amplitude([5, 2]) == 1
    d = st.init_basis(8, [2, 5], representation="dense")
    assert d.amplitude("00100100") == 1
    with pytest.raises(ValueError, match="duplicate"):
        st.init_basis(8, [1, 1])
    with pytest.raises(ValueError, match="out of range"):
        st.init_basis(8, [8])
    with pytest.raises(ValueError, match="dense limit"):
        st.init_basis(30, [0], representation="dense")


@given(stats, hst.integers(0, 2**31), hst.integers(0, 4), hst.integers(0, 4))
def test_apply_gate_matches_ladder_operator_oracle(statistics, seed, i, j):
    if i == j:
        j = (i + 1) % 5
    rng = np.random.default_rng(seed)
    N = 5
    g = st.random_number_conserving_gate(rng)
    fermion = statistics == FERMION
    ref = mode_operator(N, g.matrix, i, j, fermion)
    dense = random_dense(N, statistics, rng)
    expect = ref @ dense.vector
    st.apply_gate(dense, g, i, j)
    np.testing.assert_allclose(dense.vector, expect, atol=1e-13)
    for n in range(N + 1):
        sec = st.random_sector_state(N, n, statistics, rng)
        expect = ref @ st.sector_to_dense(sec).vector
        st.apply_gate(sec, g, i, j)
        np.testing.assert_allclose(st.sector_to_dense(sec).vector, expect, atol=1e-13)


def test_non_conserving_gate_on_hard_boson_dense(rng):
    z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    q, _ = np.linalg.qr(z)
    dense = random_dense(4, HARD_BOSON, rng)
    expect = embed(4, q, 3, 1) @ dense.vector
    st.apply_gate(dense, q, 3, 1)
    np.testing.assert_allclose(dense.vector, expect, atol=1e-13)
    with pytest.raises(ValueError, match="number-conserving"):
        st.apply_gate(st.init_basis(4, [0]), q, 0, 1)
    with pytest.raises(ValueError, match="number-conserving"):
        st.apply_gate(st.init_basis(4, [0], FERMION, "dense"), q, 0, 1)


def test_gate_argument_checks():
    s = st.init_basis(4, [0])
    g = build_exchange_gate()
    with pytest.raises(ValueError):
        st.apply_gate(s, g, 1, 1)
    with pytest.raises(IndexError):
        st.apply_gate(s, g, 0, 4)
    with pytest.raises(ValueError, match="disjoint"):
        st.apply_gate_layer(s, g, [(0, 1), (1, 2)])


@pytest.mark.parametrize("statistics", [HARD_BOSON, FERMION])
def test_gate_layer_equals_sequential_gates(statistics, rng):
    g = st.random_number_conserving_gate(rng)
    pairs = [(0, 5), (3, 1), (2, 4)]
    a = st.random_sector_state(6, 3, statistics, rng)
    b = a.copy()
    st.apply_gate_layer(a, g, pairs)
    for i, j in pairs:
        st.apply_gate(b, g, i, j)
    np.testing.assert_allclose(a.vector, b.vector, atol=1e-14)


@pytest.mark.parametrize("statistics", [HARD_BOSON, FERMION])
def test_site_blocks_match_kron(statistics, rng):
    from qlga.gates import CollisionSpec, build_collision_matrix, lift_collision

    spec = CollisionSpec(1, 1j, np.exp(0.5j), phi_onsite=0.4, statistics=statistics)
    U = lift_collision(build_collision_matrix(spec, 1), spec)  # 4x4 block on 2 channels
    N = 6
    bases = [0, 2, 4]
    ref = np.eye(1)
    for _ in bases:
        ref = np.kron(U, ref)
    for n in range(N + 1):
        sec = st.random_sector_state(N, n, statistics, rng)
        expect = ref @ st.sector_to_dense(sec).vector
        st.apply_site_blocks(sec, U, bases)
        np.testing.assert_allclose(st.sector_to_dense(sec).vector, expect, atol=1e-13)
    dense = random_dense(N, statistics, rng)
    expect = ref @ dense.vector
    st.apply_site_blocks(dense, U, bases)
    np.testing.assert_allclose(dense.vector, expect, atol=1e-13)


def test_site_block_validation():
    s = st.init_basis(4, [0])
    with pytest.raises(ValueError):
        st.apply_site_blocks(s, np.eye(3), [0])
    with pytest.raises(ValueError, match="conserve"):
        st.apply_site_blocks(s, np.ones((4, 4)) / 2, [0])


@pytest.mark.parametrize("rep", ["sector", "dense"])
def test_phases(rep, rng):
    N = 5
    angles = rng.normal(size=N)
    pair = rng.normal(size=(N, N))
    pair = pair + pair.T
    sec = st.random_sector_state(N, 2, HARD_BOSON, rng)
    s = sec if rep == "sector" else st.sector_to_dense(sec)
    ref = s.copy()
    st.apply_qbit_phases(s, angles)
    for (p, q), amp in sec.items():
        expect = ref.vector[sec.basis.rank([p, q])] if rep == "sector" else ref.vector[(1 << p) | (1 << q)]
        got = s.vector[sec.basis.rank([p, q])] if rep == "sector" else s.vector[(1 << p) | (1 << q)]
        assert got == pytest.approx(expect * np.exp(-1j * (angles[p] + angles[q])), abs=1e-14)
    if rep == "sector":
        t = sec.copy()
        st.apply_pair_phases(t, pair)
        for (p, q), amp in sec.items():
            assert t.amplitude([p, q]) == pytest.approx(amp * np.exp(-1j * pair[p, q]), abs=1e-14)
    else:
        with pytest.raises(TypeError):
            st.apply_pair_phases(s, pair)


def test_apply_phase_table_and_callable(rng):
    s = st.random_sector_state(4, 2, FERMION, rng)
    a, b = s.copy(), s.copy()
    st.apply_phase(a, [1, 3], lambda pat: np.exp(1j * (pat[0] + 2 * pat[1])))
    st.apply_phase(b, [1, 3], [1, np.exp(1j), np.exp(2j), np.exp(3j)])
    np.testing.assert_allclose(a.vector, b.vector)
    with pytest.raises(ValueError, match="unimodular"):
        st.apply_phase(a, [0], [1, 2])
    with pytest.raises(ValueError, match="entries"):
        st.apply_phase(a, [0], [1, 1, 1])


def test_density_and_number(rng):
    sec = st.random_sector_state(7, 3, FERMION, rng)
    dense = st.sector_to_dense(sec)
    np.testing.assert_allclose(st.density_profile(sec), st.density_profile(dense), atol=1e-14)
    assert st.particle_number(sec) == pytest.approx(3)
    assert st.particle_number(st.empty_sector(4, 0)) == 0


def test_dense_sector_roundtrip(rng):
    sec = st.random_sector_state(6, 2, FERMION, rng)
    back = st.dense_to_sector(st.sector_to_dense(sec), 2)
    np.testing.assert_array_equal(back.vector, sec.vector)
    mixed = st.sector_to_dense(sec)
    mixed.vector[0] = 0.5
    with pytest.raises(ValueError, match="outside"):
        st.dense_to_sector(mixed, 2)


def test_inner_product_and_norm(rng):
    a = st.random_sector_state(5, 2, HARD_BOSON, rng)
    b = st.random_sector_state(5, 2, HARD_BOSON, rng)
    assert st.inner_product(a, b) == pytest.approx(np.vdot(a.vector, b.vector))
    assert st.norm(a) == pytest.approx(1)
    with pytest.raises(ValueError):
        st.inner_product(a, st.random_sector_state(5, 1, HARD_BOSON, rng))
    with pytest.raises(ValueError):
        st.normalize(st.empty_sector(3, 1))


@pytest.mark.parametrize("statistics", [HARD_BOSON, FERMION])
def test_permute_qbits_agrees_between_representations(statistics, rng):
    N = 6
    perm = rng.permutation(N)
    sec = st.random_sector_state(N, 3, statistics, rng)
    a = st.sector_to_dense(st.permute_qbits(sec, perm))
    b = st.permute_qbits(st.sector_to_dense(sec), perm)
    np.testing.assert_allclose(a.vector, b.vector, atol=1e-15)


def test_permute_qbits_fermion_sign():
    s = st.init_basis(3, [0, 1], FERMION)
    out = st.permute_qbits(s, [1, 0, 2])
    assert out.amplitude([0, 1]) == -1


def test_swap_layer_sign_matches_permutation(rng):
    # fermionic exchange gates implement the relabelling with its reordering sign
    lat = build_lattice(1, 4, 1.0, QLGA)
    sec = st.random_sector_state(lat, 2, FERMION, rng)
    expect = st.permute_qbits(sec, [2, 1, 0, 3, 4, 5, 6, 7])
    st.apply_gate(sec, build_exchange_gate(FERMION), 0, 2)
    np.testing.assert_allclose(sec.vector, expect.vector, atol=1e-15)


def test_sampling_bitstrings_and_determinism():
    s = st.init_basis(4, [2])
    assert st.sample_measurement(s, 1) == "0100"
    d = st.sector_to_dense(s)
    assert st.sample_measurement(d, 1) == "0100"
    e = st.empty_sector(3, 1)
    e.vector[:] = np.sqrt([0.25, 0.25, 0.5])
    a = st.sample_measurement(e, 42, 1000)
    assert a == st.sample_measurement(e, 42, 1000)
    assert a != st.sample_measurement(e, 43, 1000)
    counts = Counter(a)
    assert set(counts) == {"001", "010", "100"}
    assert abs(counts["100"] - 500) < 80


def test_sampling_rejects_unnormalized():
    s = st.init_basis(3, [0])
    s.vector *= 2
    with pytest.raises(ValueError, match="normalized"):
        st.sample_measurement(s, 0)


def test_random_gate_is_valid(rng):
    for _ in range(5):
        g = st.random_number_conserving_gate(rng)
        assert g.number_conserving


def test_sector_state_items():
    s = st.init_basis(4, [1, 3])
    assert s.as_dict(1e-12) == {(1, 3): 1}
    assert len(list(s.items())) == math.comb(4, 2)
    assert list(itertools.islice(s.items(), 1))[0][0] == (0, 1)
