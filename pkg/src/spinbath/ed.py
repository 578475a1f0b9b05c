"""Exact-diagonalization oracle: dense and total-Sz-sector Hamiltonians.

Basis convention matches the tensor-product (kron) ordering used everywhere
else: the full basis index of a configuration ``(j_0, ..., j_{L-1})`` is
``sum_i j_i 2**(L-1-i)`` with local index 0 = up, 1 = down.  Site ``i``
therefore occupies bit ``L-1-i``, a set bit means spin down, and total-Sz
sectors are labelled by the number of up spins ``n_up`` (states with
``popcount == L - n_up``).

The Hamiltonian here is assembled directly from the spin couplings by bit
arithmetic, independently of the bond-operator builders, so the two paths
cross-check each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .model import ModelParams

_DENSE_SITE_CAP = 14


def _site_bit(basis: np.ndarray, site: int, l_total: int) -> np.ndarray:
    return (basis >> (l_total - 1 - site)) & 1


def _chain_terms(params: ModelParams):
    """(i, j, coupling_xy, coupling_zz) for every two-site term of the model."""
    terms = []
    for b in range(params.l_total - 1):
        delta = params.delta_sys if b <= params.l_sys - 2 else params.delta_bath
        terms.append((b, b + 1, params.j, params.j * delta))
    for i in range(params.l_sys - 2):
        terms.append((i, i + 2, 0.0, params.j_prime))
    return terms


def terms_on_basis(
    l_total: int, terms: list[tuple[int, int, float, float]], basis: np.ndarray
) -> np.ndarray:
    """Assemble ``sum (xy/2)(S+S- + h.c.) + zz SzSz`` terms on a basis subset.

    The basis must be closed under the flip-flop terms, which holds for full
    bases and for total-Sz sectors.
    """
    dim = len(basis)
    ham = np.zeros((dim, dim))
    diag = np.zeros(dim)
    for i, j, xy, zz in terms:
        bits_i = _site_bit(basis, i, l_total)
        bits_j = _site_bit(basis, j, l_total)
        sz_i = 0.5 - bits_i
        sz_j = 0.5 - bits_j
        if zz != 0.0:
            diag += zz * sz_i * sz_j
        if xy != 0.0:
            differ = bits_i != bits_j
            mask = (1 << (l_total - 1 - i)) | (1 << (l_total - 1 - j))
            rows = np.nonzero(differ)[0]
            partners = basis[rows] ^ mask
            cols = np.searchsorted(basis, partners)
            if not np.array_equal(basis[cols], partners):
                raise ValueError("basis is not closed under the flip-flop terms")
            ham[rows, cols] += 0.5 * xy
    ham[np.diag_indices(dim)] += diag
    return ham


def hamiltonian_on_basis(params: ModelParams, basis: np.ndarray) -> np.ndarray:
    """Dense Hamiltonian of the full chain model on a basis subset."""
    return terms_on_basis(params.l_total, _chain_terms(params), basis)


def dense_hamiltonian(params: ModelParams) -> np.ndarray:
    """Full-space Hamiltonian as a real symmetric matrix (up to 14 sites)."""
    l_total = params.l_total
    if l_total > _DENSE_SITE_CAP:
        raise ValueError(
            f"dense Hamiltonian capped at {_DENSE_SITE_CAP} sites, got {l_total}; "
            "use sector_hamiltonian"
        )
    basis = np.arange(2**l_total, dtype=np.int64)
    return hamiltonian_on_basis(params, basis)


def sector_basis(l_total: int, n_up: int) -> np.ndarray:
    """Sorted basis integers of the total-Sz sector with ``n_up`` up spins."""
    if not 0 <= n_up <= l_total:
        raise ValueError(f"n_up={n_up} out of range for {l_total} sites")
    if l_total > 24:
        raise ValueError("sector enumeration capped at 24 sites")
    all_states = np.arange(2**l_total, dtype=np.int64)
    downs = np.bitwise_count(all_states)
    return all_states[downs == l_total - n_up]


def sector_hamiltonian(params: ModelParams, n_up: int) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian block of one total-Sz sector, plus its basis integers."""
    basis = sector_basis(params.l_total, n_up)
    return hamiltonian_on_basis(params, basis), basis


def dense_sz_total(l_total: int) -> np.ndarray:
    """Diagonal of the total-Sz operator over the full basis."""
    basis = np.arange(2**l_total, dtype=np.int64)
    return l_total / 2.0 - np.bitwise_count(basis).astype(float)


class Propagator:
    """Exact time evolution of one Hamiltonian, diagonalized once."""

    def __init__(self, ham: np.ndarray):
        self.eigenvalues, self.eigenvectors = sla.eigh(
            ham, driver="evd", check_finite=False
        )

    def evolve(self, psi0: np.ndarray, t: float) -> np.ndarray:
        coeffs = self.eigenvectors.conj().T @ psi0
        coeffs = coeffs * np.exp(-1j * self.eigenvalues * t)
        return self.eigenvectors @ coeffs


def entanglement_entropy_dense(psi: np.ndarray, n_left: int, local_dim: int = 2) -> float:
    """Von Neumann entropy across the cut after the first ``n_left`` sites."""
    dim_left = local_dim**n_left
    block = psi.reshape(dim_left, -1)
    svals = sla.svdvals(block, check_finite=False)
    probs = svals**2
    probs = probs[probs > 1e-16]
    return float(-np.sum(probs * np.log(probs)))


def reduced_density_matrix(psi: np.ndarray, l_total: int, keep: range) -> np.ndarray:
    """RDM of a contiguous leading block of sites ``keep = range(0, k)``."""
    if keep.start != 0 or keep.step != 1:
        raise ValueError("only contiguous leading blocks are supported")
    dim_keep = 2 ** len(keep)
    block = psi.reshape(dim_keep, -1)
    return block @ block.conj().T


def site_density_profile(psi: np.ndarray, l_total: int) -> np.ndarray:
    """Up-spin occupation <n_i> per site."""
    probs = np.abs(psi) ** 2
    basis = np.arange(len(psi), dtype=np.int64)
    dens = np.empty(l_total)
    for i in range(l_total):
        bits = _site_bit(basis, i, l_total)
        dens[i] = probs[bits == 0].sum()
    return dens


def block_number_moments(
    psi: np.ndarray, l_total: int, sites: np.ndarray
) -> tuple[float, float]:
    """Mean and variance of the up-spin number summed over ``sites``."""
    probs = np.abs(psi) ** 2
    basis = np.arange(len(psi), dtype=np.int64)
    mask = 0
    for i in sites:
        mask |= 1 << (l_total - 1 - int(i))
    downs = np.bitwise_count(basis & mask).astype(float)
    counts = len(sites) - downs
    mean = float(probs @ counts)
    var = float(probs @ counts**2) - mean**2
    return mean, var


def filled_state_dense(params: ModelParams) -> np.ndarray:
    """All-up system, all-down bath, as a full-space vector."""
    index = (1 << params.l_bath) - 1
    psi = np.zeros(2**params.l_total, dtype=complex)
    psi[index] = 1.0
    return psi


def random_sector_state(params: ModelParams, seed: int) -> np.ndarray:
    """Random-coefficient state in the system's half-filled sector, bath all down.

    Coefficients have independent real and imaginary parts of variance 1/2
    and the state is scaled to unit norm.
    """
    rng = np.random.default_rng(seed)
    n_up_sys = params.l_sys // 2
    sys_states = sector_basis(params.l_sys, n_up_sys)
    coeffs = rng.standard_normal(len(sys_states)) + 1j * rng.standard_normal(
        len(sys_states)
    )
    coeffs *= np.sqrt(0.5)
    coeffs /= np.linalg.norm(coeffs)
    bath_bits = (1 << params.l_bath) - 1
    psi = np.zeros(2**params.l_total, dtype=complex)
    psi[(sys_states << params.l_bath) | bath_bits] = coeffs
    return psi


@dataclass(frozen=True)
class OverlapHistogram:
    """Weights of an initial state over the eigenstates of one Sz sector."""

    energies: np.ndarray
    weights: np.ndarray
    n_up: int
    max_weight: float
    participation_ratio: float

    def __post_init__(self) -> None:
        if len(self.energies) != len(self.weights):
            raise ValueError("energies and weights must have matching lengths")
        if np.any(np.diff(self.energies) < -1e-12):
            raise ValueError("energies must be ascending")


def state_sector(psi: np.ndarray, l_total: int, tol: float = 1e-12) -> int:
    """The unique n_up sector supporting ``psi``; error if sectors mix."""
    support = np.nonzero(np.abs(psi) ** 2 > tol)[0]
    if len(support) == 0:
        raise ValueError("state has no support")
    downs = np.unique(np.bitwise_count(support.astype(np.int64)))
    if len(downs) != 1:
        raise ValueError("state is spread over several total-Sz sectors")
    return l_total - int(downs[0])


def overlap_histogram(psi: np.ndarray, params: ModelParams) -> OverlapHistogram:
    """Eigenbasis decomposition of a sector-definite state.

    Diagonalizes only the sector hosting the state, so chains up to 16 sites
    stay tractable.
    """
    n_up = state_sector(psi, params.l_total)
    ham, basis = sector_hamiltonian(params, n_up)
    coeffs = psi[basis]
    norm = np.linalg.norm(coeffs)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"state not normalized within its sector (norm {norm})")
    energies, vecs = sla.eigh(ham, driver="evd", check_finite=False, overwrite_a=True)
    weights = np.abs(vecs.conj().T @ coeffs) ** 2
    return OverlapHistogram(
        energies=energies,
        weights=weights,
        n_up=n_up,
        max_weight=float(weights.max()),
        participation_ratio=float(1.0 / np.sum(weights**2)),
    )
