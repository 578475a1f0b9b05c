"""State preparation: Haar statistics, circuit exactness, encodings."""

import warnings

import numpy as np
import pytest

from spinbath.ed import filled_state_dense
from spinbath.model import ModelParams, N_UP, SX, SY, SZ, embed_two_factor
from spinbath.prep import (
    InitialStateSpec,
    check_filling_balance,
    haar_unitary,
    prepare,
)

RNG = np.random.default_rng


def test_spec_validation():
    with pytest.raises(ValueError):
        InitialStateSpec(kind="thermal")
    with pytest.raises(ValueError):
        InitialStateSpec(kind="filled", circuit_depth=-1)


def test_haar_unitary_is_unitary():
    rng = RNG(5)
    for dim in (2, 4, 7):
        u = haar_unitary(dim, rng)
        assert np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-12)


def test_haar_first_moment():
    # |U_00|^2 ~ Beta(1, dim-1): mean 1/dim, var (dim-1)/(dim^2 (dim+1)).
    # For dim=4 and 10^4 draws the 3-sigma band around 0.25 is +-0.0058.
    rng = RNG(123)
    draws = 10_000
    samples = np.array([abs(haar_unitary(4, rng)[0, 0]) ** 2 for _ in range(draws)])
    assert abs(samples.mean() - 0.25) < 3 * np.sqrt(3 / 80 / draws)


def test_haar_phase_correction_changes_distribution():
    # raw QR without the phase fix biases the diagonal toward positive reals;
    # corrected columns have uniformly distributed phases
    rng = RNG(7)
    phases = np.array([np.angle(haar_unitary(4, rng)[0, 0]) for _ in range(2000)])
    assert abs(phases.mean()) < 0.1
    assert abs(np.cos(phases).mean()) < 0.07


def test_filled_matches_dense():
    params = ModelParams(l_sys=3, l_bath=4, delta_sys=0.8, delta_bath=0.8)
    state = prepare(InitialStateSpec(kind="filled"), params, chi_max=16)
    assert state.bond_charges is not None
    np.testing.assert_allclose(
        state.to_dense(), filled_state_dense(params), atol=1e-14
    )
    assert state.entanglement_entropy(params.sys_bath_bond) == pytest.approx(0.0)


def test_high_entropy_deterministic():
    params = ModelParams(l_sys=4, l_bath=3, delta_sys=1.0, delta_bath=1.0)
    spec = InitialStateSpec(kind="high_entropy", seed=11)
    a = prepare(spec, params, chi_max=8)
    b = prepare(spec, params, chi_max=8)
    for ta, tb in zip(a.tensors, b.tensors):
        np.testing.assert_array_equal(ta, tb)
    c = prepare(InitialStateSpec(kind="high_entropy", seed=12), params, chi_max=8)
    assert not np.allclose(a.to_dense(), c.to_dense())


def test_high_entropy_matches_dense_circuit():
    params = ModelParams(l_sys=6, l_bath=2, delta_sys=0.5, delta_bath=1.0)
    spec = InitialStateSpec(kind="high_entropy", seed=3)
    state = prepare(spec, params, chi_max=8)

    n = params.l_total
    kets = []
    for i in range(params.l_sys):
        kets.append([1.0, 0.0] if i % 2 == 0 else [0.0, 1.0])
    kets.extend([[0.0, 1.0]] * params.l_bath)
    psi = np.array([1.0 + 0j])
    for ket in kets:
        psi = np.kron(psi, ket)
    rng = RNG(3)
    for layer in range(params.l_sys):
        for bond in range(layer % 2, params.l_sys - 1, 2):
            gate = embed_two_factor(haar_unitary(4, rng), bond, bond + 1, n)
            psi = gate @ psi

    np.testing.assert_allclose(state.to_dense(), psi, atol=1e-10)
    assert state.norm() == pytest.approx(1.0, abs=1e-12)
    # the circuit touches only the system half
    density = state.site_expectations(N_UP)
    np.testing.assert_allclose(density[params.l_sys :], 0.0, atol=1e-12)
    assert state.entanglement_entropy(2) > 0.1
    # Haar gates do not conserve total Sz, so charge tracking must be off
    assert state.bond_charges is None


def test_circuit_needs_room():
    params = ModelParams(l_sys=6, l_bath=2, delta_sys=1.0, delta_bath=1.0)
    with pytest.raises(ValueError, match="chi_max"):
        prepare(InitialStateSpec(kind="high_entropy"), params, chi_max=4)


def test_depth_zero_keeps_product_state():
    params = ModelParams(l_sys=4, l_bath=2, delta_sys=1.0, delta_bath=1.0)
    spec = InitialStateSpec(kind="high_entropy", seed=0, circuit_depth=0)
    state = prepare(spec, params, chi_max=4)
    density = state.site_expectations(N_UP)
    np.testing.assert_allclose(density, [1, 0, 1, 0, 0, 0], atol=1e-14)


def test_seed_averaged_site_is_maximally_mixed():
    # depth-l_sys brickwork on 10 sites: the seed-averaged one-site reduced
    # density matrix should sit within trace distance 0.05 of I/2
    params = ModelParams(l_sys=10, l_bath=1, delta_sys=1.0, delta_bath=1.0)
    site = 5
    bloch = np.zeros(3)
    n_seeds = 100
    for seed in range(n_seeds):
        state = prepare(
            InitialStateSpec(kind="high_entropy", seed=seed), params, chi_max=32
        )
        bloch += [
            2 * state.expect_local(site, SX),
            2 * state.expect_local(site, SY),
            2 * state.expect_local(site, SZ),
        ]
    trace_distance = 0.5 * np.linalg.norm(bloch / n_seeds)
    assert trace_distance < 0.05


def test_filling_balance_warns_when_polarized():
    params = ModelParams(l_sys=4, l_bath=4, delta_sys=1.0, delta_bath=1.0)
    state = prepare(InitialStateSpec(kind="filled"), params, chi_max=4)
    with pytest.warns(UserWarning, match="filling"):
        n_sys = check_filling_balance(state, params)
    assert n_sys == pytest.approx(4.0)


def test_high_entropy_balanced_seed_is_quiet():
    params = ModelParams(l_sys=6, l_bath=2, delta_sys=1.0, delta_bath=1.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prepare(InitialStateSpec(kind="high_entropy", seed=0), params, chi_max=8)
    assert not [w for w in caught if issubclass(w.category, UserWarning)]


def test_ladder_folding_preserves_vector():
    chain = ModelParams(l_sys=4, l_bath=4, delta_sys=0.7, delta_bath=1.0)
    ladder = ModelParams(
        l_sys=4, l_bath=4, delta_sys=0.7, delta_bath=1.0, j_prime=0.5
    )
    spec = InitialStateSpec(kind="high_entropy", seed=9)
    flat = prepare(spec, chain, chi_max=16)
    folded = prepare(spec, ladder, chi_max=16)
    assert folded.local_dim == 4
    assert folded.n_sites == ladder.n_rungs
    np.testing.assert_allclose(folded.to_dense(), flat.to_dense(), atol=1e-12)


def test_ladder_filled_keeps_charges():
    params = ModelParams(l_sys=2, l_bath=4, delta_sys=1.0, delta_bath=1.0, j_prime=1.0)
    state = prepare(InitialStateSpec(kind="filled"), params, chi_max=8)
    assert state.local_dim == 4
    assert state.bond_charges is not None
    np.testing.assert_allclose(state.to_dense(), filled_state_dense(params), atol=1e-14)
