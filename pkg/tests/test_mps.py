"""MPS core vs dense linear algebra on small chains."""

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from spinbath import ed, model
from spinbath.model import ModelParams, N_UP
from spinbath.mps import MpsState, entropy_from_schmidt, inner_product, _truncation_cut

UP = np.array([1.0, 0.0])
DOWN = np.array([0.0, 1.0])
PLUS = np.array([1.0, 1.0]) / np.sqrt(2)


def dense_gate(gate, bond, n_sites, d=2):
    return np.kron(np.eye(d**bond), np.kron(gate, np.eye(d ** (n_sites - bond - 2))))


def xxz_gate(delta, t):
    ham = model.two_site_xxz(delta)
    return sla.expm(-1j * ham * t)


def random_state(n_sites, seed, chi_max=64):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(2**n_sites) + 1j * rng.standard_normal(2**n_sites)
    psi /= np.linalg.norm(psi)
    return psi, MpsState.from_dense(psi, n_sites, chi_max=chi_max)


class TestConstruction:
    def test_product_state_dense_and_charges(self):
        state = MpsState.product_state([UP, DOWN, UP], chi_max=8)
        dense = state.to_dense()
        expected = np.zeros(8)
        expected[0b010] = 1.0
        assert np.allclose(dense, expected)
        assert state.total_charge() == 1  # 2*Sz = 2*(1/2)
        assert [c.tolist() for c in state.bond_charges] == [[0], [1], [0], [1]]

    def test_product_state_superposed_ket_drops_charges(self):
        state = MpsState.product_state([UP, PLUS], chi_max=8)
        assert state.bond_charges is None

    def test_product_state_entropies_vanish(self):
        state = MpsState.product_state([UP, DOWN, DOWN, UP], chi_max=8)
        for bond in range(3):
            assert state.entanglement_entropy(bond) == pytest.approx(0.0, abs=1e-14)

    def test_from_dense_round_trip(self):
        psi, state = random_state(5, seed=3)
        assert np.allclose(state.to_dense(), psi, atol=1e-12)
        assert state.norm() == pytest.approx(1.0, abs=1e-12)
        state.assert_canonical()

    def test_rejects_unnormalized_ket(self):
        with pytest.raises(ValueError):
            MpsState.product_state([2.0 * UP, DOWN], chi_max=4)


class TestGaugeMoves:
    def test_move_center_preserves_state(self):
        psi, state = random_state(6, seed=11)
        for target in (5, 2, 0, 3):
            state.move_center(target)
            state.assert_canonical()
            assert np.allclose(state.to_dense(), psi, atol=1e-12)

    def test_canonicalize_bond_matches_dense_schmidt(self):
        psi, state = random_state(6, seed=12)
        for bond in (0, 2, 4):
            schmidt = state.canonicalize_bond(bond)
            dense_s = sla.svdvals(psi.reshape(2 ** (bond + 1), -1))
            k = min(len(schmidt), len(dense_s))
            assert np.allclose(np.sort(schmidt)[::-1][:k], dense_s[:k], atol=1e-10)

    def test_entropy_matches_dense(self):
        psi, state = random_state(6, seed=13)
        for bond in range(5):
            expected = ed.entanglement_entropy_dense(psi, bond + 1)
            assert state.entanglement_entropy(bond) == pytest.approx(expected, abs=1e-10)


class TestEntropyKernel:
    def test_bell_state_entropy(self):
        bell = np.zeros(4, dtype=complex)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        state = MpsState.from_dense(bell, 2, chi_max=4)
        assert state.entanglement_entropy(0) == pytest.approx(np.log(2), abs=1e-12)

    def test_floor_drops_tiny_weights(self):
        s = np.array([1.0, 1e-9])
        assert entropy_from_schmidt(s) == pytest.approx(
            -(1e-18) * np.log(1e-18) - 0.0, abs=1e-15
        )
        assert entropy_from_schmidt(np.array([1.0, 1e-16])) == pytest.approx(0.0, abs=1e-20)


class TestTruncationRule:
    def test_cut_keeps_weight_within_cutoff(self):
        s = np.sqrt(np.array([0.5, 0.3, 0.15, 0.05]))
        assert _truncation_cut(s, chi_max=10, svd_cutoff=0.05) == 3
        assert _truncation_cut(s, chi_max=10, svd_cutoff=0.04) == 4
        assert _truncation_cut(s, chi_max=10, svd_cutoff=0.21) == 2
        assert _truncation_cut(s, chi_max=2, svd_cutoff=0.0) == 2
        assert _truncation_cut(s, chi_max=10, svd_cutoff=0.0) == 4

    def test_always_keeps_one(self):
        s = np.array([1.0])
        assert _truncation_cut(s, chi_max=1, svd_cutoff=1e-12) == 1

    def test_gate_truncation_reports_discard_and_renormalizes(self):
        psi, state = random_state(6, seed=21)
        state.chi_max = 2
        gate = xxz_gate(1.0, 0.7)
        report = state.apply_two_site_gate(2, gate)
        assert report.bond_index == 2
        assert report.new_bond_dim <= 2
        assert report.discarded_weight > 0.0
        assert state.norm() == pytest.approx(1.0, abs=1e-12)
        assert np.sum(state.schmidt[2] ** 2) == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(state.schmidt[2]) <= 1e-15)


class TestGatesAgainstDense:
    @pytest.mark.parametrize("start_kets", [[UP, DOWN, UP, DOWN], [UP, UP, DOWN, DOWN]])
    def test_charge_conserving_gates_match_dense(self, start_kets):
        state = MpsState.product_state(start_kets, chi_max=16)
        assert state.bond_charges is not None
        psi = state.to_dense()
        for bond, (delta, t) in zip([0, 2, 1, 2, 0], [(1.0, 0.3), (0.5, 0.8), (0.9, 1.1), (1.0, 0.4), (0.2, 0.9)]):
            gate = xxz_gate(delta, t)
            state.apply_two_site_gate(bond, gate)
            psi = dense_gate(gate, bond, 4) @ psi
            assert np.allclose(state.to_dense(), psi, atol=1e-12)
        assert state.bond_charges is not None
        assert state.charge_pattern_error() == 0.0
        state.assert_canonical()

    def test_blocked_and_dense_paths_agree(self):
        kets = [UP, DOWN, UP, DOWN, UP, DOWN]
        charged = MpsState.product_state(kets, chi_max=64)
        plain = MpsState.product_state(kets, chi_max=64)
        plain.drop_charges()
        for step in range(8):
            for bond in range(5):
                gate = xxz_gate(0.8, 0.31 + 0.07 * step)
                charged.apply_two_site_gate(bond, gate)
                plain.apply_two_site_gate(bond, gate)
        assert np.allclose(charged.to_dense(), plain.to_dense(), atol=1e-11)
        for bond in range(5):
            s_charged = charged.canonicalize_bond(bond)
            s_plain = plain.canonicalize_bond(bond)
            k = min(len(s_charged), len(s_plain))
            assert np.allclose(np.sort(s_charged)[::-1][:k], np.sort(s_plain)[::-1][:k], atol=1e-11)

    def test_non_conserving_gate_drops_charges_and_stays_correct(self):
        state = MpsState.product_state([UP, DOWN, UP], chi_max=8)
        psi = state.to_dense()
        rng = np.random.default_rng(5)
        mat = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        gate, _ = np.linalg.qr(mat)
        assert not state.gate_conserves_charge(gate)
        state.apply_two_site_gate(1, gate)
        assert state.bond_charges is None
        assert np.allclose(state.to_dense(), dense_gate(gate, 1, 3) @ psi, atol=1e-12)

    def test_rejects_non_unitary_gate(self):
        state = MpsState.product_state([UP, DOWN], chi_max=4)
        with pytest.raises(ValueError):
            state.apply_two_site_gate(0, np.eye(4) * 1.5)

    def test_leave_center_left(self):
        state = MpsState.product_state([UP, DOWN, UP, DOWN], chi_max=16)
        psi = state.to_dense()
        gate = xxz_gate(1.0, 0.6)
        state.apply_two_site_gate(2, gate, leave_center="left")
        assert state.center == 2
        state.assert_canonical()
        assert np.allclose(state.to_dense(), dense_gate(gate, 2, 4) @ psi, atol=1e-12)


class TestExpectations:
    def test_local_and_bond_expectations_match_dense(self):
        psi, state = random_state(5, seed=31)
        sz_full = ed.dense_sz_total(5)
        total = sum(state.expect_local(i, model.SZ) for i in range(5))
        assert total == pytest.approx(float(np.real(psi.conj() @ (sz_full * psi))), abs=1e-10)
        ham_bond = model.two_site_xxz(0.7)
        for bond in range(4):
            dense_op = dense_gate(ham_bond, bond, 5)
            expected = float(np.real(psi.conj() @ (dense_op @ psi)))
            assert state.expect_bond(bond, ham_bond) == pytest.approx(expected, abs=1e-10)

    def test_site_expectations_profile(self):
        psi, state = random_state(5, seed=32)
        profile = state.site_expectations(N_UP)
        assert np.allclose(profile, ed.site_density_profile(psi, 5), atol=1e-10)

    def test_correlation_matrix_matches_dense(self):
        psi, state = random_state(6, seed=33)
        sites = [1, 3, 4]
        corr = state.correlation_matrix(sites, N_UP)
        basis = np.arange(64)
        probs = np.abs(psi) ** 2
        for a, i in enumerate(sites):
            for b, j in enumerate(sites):
                n_i = 1 - ((basis >> (5 - i)) & 1)
                n_j = 1 - ((basis >> (5 - j)) & 1)
                assert corr[a, b] == pytest.approx(float(probs @ (n_i * n_j)), abs=1e-10)

    def test_block_sum_moments_match_dense_and_pairwise(self):
        psi, state = random_state(6, seed=34)
        block = range(2, 6)
        mean, var = state.block_sum_moments(block, N_UP)
        d_mean, d_var = ed.block_number_moments(psi, 6, np.arange(2, 6))
        assert mean == pytest.approx(d_mean, abs=1e-10)
        assert var == pytest.approx(d_var, abs=1e-10)
        sites = list(block)
        corr = state.correlation_matrix(sites, N_UP)
        means = np.array([state.expect_local(i, N_UP) for i in sites])
        assert var == pytest.approx(corr.sum() - means.sum() ** 2, abs=1e-9)

    def test_block_sum_moments_leading_block(self):
        psi, state = random_state(6, seed=35)
        mean, var = state.block_sum_moments(range(0, 3), N_UP)
        d_mean, d_var = ed.block_number_moments(psi, 6, np.arange(0, 3))
        assert mean == pytest.approx(d_mean, abs=1e-10)
        assert var == pytest.approx(d_var, abs=1e-10)


class TestInnerProduct:
    def test_matches_dense_dot(self):
        psi_a, state_a = random_state(5, seed=41)
        psi_b, state_b = random_state(5, seed=42)
        expected = complex(psi_a.conj() @ psi_b)
        assert inner_product(state_a, state_b) == pytest.approx(expected, abs=1e-11)

    def test_self_overlap_is_one(self):
        _, state = random_state(4, seed=43)
        assert inner_product(state, state) == pytest.approx(1.0, abs=1e-12)


class TestFolding:
    def test_fold_preserves_dense_vector(self):
        psi, state = random_state(6, seed=51)
        folded = state.fold_pairs()
        assert folded.n_sites == 3
        assert folded.local_dim == 4
        assert np.allclose(folded.to_dense(), psi, atol=1e-12)
        folded.assert_canonical()

    def test_fold_carries_schmidt_and_charges(self):
        state = MpsState.product_state([UP, DOWN, DOWN, UP], chi_max=8)
        gate = xxz_gate(1.0, 0.5)
        state.apply_two_site_gate(1, gate)  # odd chain bond -> ladder bond 0
        folded = state.fold_pairs()
        assert folded.bond_charges is not None
        assert folded.schmidt_fresh[0]
        assert np.allclose(folded.schmidt[0], state.schmidt[1])
        assert folded.entanglement_entropy(0) == pytest.approx(
            state.entanglement_entropy(1), abs=1e-12
        )
        assert folded.charge_pattern_error() == 0.0

    def test_fold_rejects_odd_length(self):
        state = MpsState.product_state([UP, DOWN, UP], chi_max=4)
        with pytest.raises(ValueError):
            state.fold_pairs()


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        _, state = random_state(5, seed=61)
        state.apply_two_site_gate(2, xxz_gate(1.0, 0.3))
        path = str(tmp_path / "state.h5")
        state.save(path, attrs={"sim_time": 1.5, "seed": 7})
        loaded, extra = MpsState.load(path)
        assert extra["sim_time"] == 1.5
        assert extra["seed"] == 7
        assert loaded.chi_max == state.chi_max
        assert loaded.svd_cutoff == state.svd_cutoff
        assert loaded.center == state.center
        for a, b in zip(loaded.tensors, state.tensors):
            assert np.array_equal(a, b)
        assert abs(inner_product(loaded, state) - 1.0) < 1e-12

    def test_save_load_keeps_charges(self, tmp_path):
        state = MpsState.product_state([UP, DOWN, UP, DOWN], chi_max=8)
        state.apply_two_site_gate(1, xxz_gate(0.8, 0.4))
        path = str(tmp_path / "charged.h5")
        state.save(path)
        loaded, _ = MpsState.load(path)
        assert loaded.bond_charges is not None
        for a, b in zip(loaded.bond_charges, state.bond_charges):
            assert np.array_equal(a, b)
        assert loaded.charge_pattern_error() == 0.0


@settings(max_examples=20, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=10_000),
    bonds=st.lists(st.integers(min_value=0, max_value=3), min_size=1, max_size=6),
)
def test_gate_sequences_preserve_norm_and_charge(seed, bonds):
    rng = np.random.default_rng(seed)
    kets = [UP if rng.integers(2) else DOWN for _ in range(5)]
    state = MpsState.product_state(kets, chi_max=32)
    charge0 = state.total_charge()
    psi = state.to_dense()
    for bond in bonds:
        t = float(rng.uniform(0.1, 1.0))
        gate = xxz_gate(1.0, t)
        state.apply_two_site_gate(bond, gate)
        psi = dense_gate(gate, bond, 5) @ psi
    assert state.norm() == pytest.approx(1.0, abs=1e-10)
    assert state.total_charge() == charge0
    assert np.allclose(state.to_dense(), psi, atol=1e-10)
    sz = ed.dense_sz_total(5)
    mps_sz = sum(state.expect_local(i, model.SZ) for i in range(5))
    assert mps_sz == pytest.approx(float(np.real(psi.conj() @ (sz * psi))), abs=1e-10)
