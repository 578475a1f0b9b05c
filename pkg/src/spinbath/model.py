"""Spin-1/2 XXZ chain and ladder couplings, bond operators, dense embeddings.

Site layout (0-based): sites ``0 .. l_sys-1`` form the system, sites
``l_sys .. l_total-1`` the bath.  Chain bond ``b`` couples sites ``(b, b+1)``;
bonds ``0 .. l_sys-2`` are system-internal, bond ``l_sys-1`` is the
system-bath junction, the remainder are bath bonds.  The junction and the
bath bonds share the bath anisotropy ``delta_bath``.

Local basis: index 0 = spin up, 1 = spin down, so ``Sz = diag(+1/2, -1/2)``.

A nonzero ``j_prime`` adds a next-nearest-neighbour ``Sz.Sz`` coupling acting
inside the system only (pairs ``(i, i+2)`` with ``i+2 <= l_sys-1``).  Such
interactions are beyond nearest-neighbour for a chain of single sites, so the
chain is re-encoded as a ladder of two-site rungs: rung ``r`` holds chain
sites ``(2r, 2r+1)``, the local dimension becomes 4 with basis index
``2*j_upper + j_lower``, and every interaction is nearest-neighbour at the
rung level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SX = np.array([[0.0, 0.5], [0.5, 0.0]])
SY = np.array([[0.0, -0.5j], [0.5j, 0.0]])
SZ = np.array([[0.5, 0.0], [0.0, -0.5]])
SPLUS = np.array([[0.0, 1.0], [0.0, 0.0]])
SMINUS = np.array([[0.0, 0.0], [1.0, 0.0]])
ID2 = np.eye(2)

#: occupation (particle = spin up) of each local basis state
N_UP = np.array([[1.0, 0.0], [0.0, 0.0]])


def local_charges(local_dim: int) -> np.ndarray:
    """Twice the Sz eigenvalue of each local basis state, as integers.

    Integer charges keep total-Sz bookkeeping exact; dividing by two recovers
    physical magnetization.
    """
    if local_dim == 2:
        return np.array([1, -1], dtype=np.int64)
    if local_dim == 4:
        return np.array([2, 0, 0, -2], dtype=np.int64)
    raise ValueError(f"unsupported local dimension {local_dim}")


@dataclass(frozen=True)
class ModelParams:
    """Couplings and geometry of the chain.

    The overall exchange ``j`` is the unit of energy and defaults to 1; all
    times are reported in units of ``1/j``.
    """

    l_sys: int
    l_bath: int
    delta_sys: float
    delta_bath: float
    j_prime: float = 0.0
    j: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.l_sys, (int, np.integer)) or not isinstance(
            self.l_bath, (int, np.integer)
        ):
            raise ValueError("l_sys and l_bath must be integers")
        if self.l_sys < 1 or self.l_bath < 1:
            raise ValueError("l_sys and l_bath must be at least 1")
        for name in ("delta_sys", "delta_bath", "j_prime", "j"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.j_prime != 0.0 and (self.l_sys % 2 or self.l_bath % 2):
            raise ValueError(
                "nonzero j_prime requires even l_sys and l_bath "
                "(the ladder re-encoding pairs sites into rungs)"
            )

    @property
    def l_total(self) -> int:
        return self.l_sys + self.l_bath

    @property
    def n_rungs(self) -> int:
        if self.l_total % 2:
            raise ValueError("ladder encoding needs an even total site count")
        return self.l_total // 2

    @property
    def sys_bath_bond(self) -> int:
        """Chain bond index of the system-bath junction."""
        return self.l_sys - 1

    @property
    def needs_ladder(self) -> bool:
        return self.j_prime != 0.0


@dataclass(frozen=True)
class BondOperator:
    """A Hermitian two-site coupling attached to one bond of the encoded chain."""

    bond_index: int
    matrix: np.ndarray
    local_dim: int

    def __post_init__(self) -> None:
        if self.local_dim not in (2, 4):
            raise ValueError(f"unsupported local dimension {self.local_dim}")
        d2 = self.local_dim**2
        mat = np.asarray(self.matrix)
        if mat.shape != (d2, d2):
            raise ValueError(f"bond matrix must be {d2}x{d2}, got {mat.shape}")
        if not np.allclose(mat, mat.conj().T, atol=1e-12):
            raise ValueError("bond matrix must be Hermitian to 1e-12")
        if self.bond_index < 0:
            raise ValueError("bond_index must be non-negative")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)


def two_site_xxz(delta: float, j: float = 1.0) -> np.ndarray:
    """J (Sx.Sx + Sy.Sy + delta Sz.Sz) on two sites, as a real 4x4 matrix."""
    mat = j * (np.kron(SX, SX) + np.kron(SY, SY) + delta * np.kron(SZ, SZ))
    return np.ascontiguousarray(mat.real)


def two_site_zz(coupling: float) -> np.ndarray:
    """coupling * Sz.Sz on two sites."""
    return coupling * np.kron(SZ, SZ)


def chain_bond_delta(params: ModelParams, bond: int) -> float:
    """Anisotropy of chain bond ``bond``: system bonds use delta_sys, the
    junction and bath bonds delta_bath."""
    if not 0 <= bond <= params.l_total - 2:
        raise ValueError(f"chain bond {bond} out of range for {params.l_total} sites")
    return params.delta_sys if bond <= params.l_sys - 2 else params.delta_bath


def build_chain_bonds(params: ModelParams) -> list[BondOperator]:
    """Nearest-neighbour bond operators of the single-site chain encoding.

    Valid only for ``j_prime == 0``; next-nearest-neighbour couplings need
    the ladder encoding.
    """
    if params.j_prime != 0.0:
        raise ValueError("chain encoding cannot hold j_prime != 0; build ladder bonds")
    return [
        BondOperator(b, two_site_xxz(chain_bond_delta(params, b), params.j), 2)
        for b in range(params.l_total - 1)
    ]


def embed_two_factor(
    op: np.ndarray, f1: int, f2: int, n_factors: int, local_dim: int = 2
) -> np.ndarray:
    """Embed a two-factor operator onto factors ``(f1, f2)`` of a small product space.

    Intended for assembling few-site composite operators (rung matrices,
    oracle cross-checks); memory grows as ``local_dim**(2*n_factors)``.
    """
    if not 0 <= f1 < f2 < n_factors:
        raise ValueError(f"need 0 <= f1 < f2 < n_factors, got {(f1, f2, n_factors)}")
    d = local_dim
    rest = n_factors - 2
    full = np.kron(op, np.eye(d**rest))
    tensor = full.reshape([d] * (2 * n_factors))
    # kron position p currently holds the factor order[p]; permute so that
    # axis s holds factor s on both the row and column side
    order = [f1, f2] + [k for k in range(n_factors) if k not in (f1, f2)]
    inv = np.argsort(order)
    perm = list(inv) + [n_factors + int(x) for x in inv]
    return np.ascontiguousarray(tensor.transpose(perm).reshape(d**n_factors, d**n_factors))


def build_ladder_bonds(params: ModelParams) -> list[BondOperator]:
    """Bond operators of the rung-pair ladder encoding (local dimension 4).

    Ladder bond ``b`` couples rungs ``(b, b+1)``, i.e. chain sites
    ``(2b, 2b+1, 2b+2, 2b+3)``, and carries:

    * the intra-rung chain bond ``(2b, 2b+1)``,
    * the inter-rung chain bond ``(2b+1, 2b+2)``,
    * the system NNN couplings ``(2b, 2b+2)`` and ``(2b+1, 2b+3)`` where both
      partners lie in the system,
    * and, on the final ladder bond only, the last rung's intra-rung chain
      bond ``(2b+2, 2b+3)``, so that every chain term appears exactly once.
    """
    n_rungs = params.n_rungs
    if n_rungs < 2:
        raise ValueError("ladder encoding needs at least two rungs")
    zz = two_site_zz(params.j_prime)
    bonds = []
    for b in range(n_rungs - 1):
        mat = np.zeros((16, 16))
        mat += embed_two_factor(
            two_site_xxz(chain_bond_delta(params, 2 * b), params.j), 0, 1, 4
        )
        mat += embed_two_factor(
            two_site_xxz(chain_bond_delta(params, 2 * b + 1), params.j), 1, 2, 4
        )
        if params.j_prime != 0.0:
            if 2 * b <= params.l_sys - 3:
                mat += embed_two_factor(zz, 0, 2, 4)
            if 2 * b + 1 <= params.l_sys - 3:
                mat += embed_two_factor(zz, 1, 3, 4)
        if b == n_rungs - 2:
            mat += embed_two_factor(
                two_site_xxz(chain_bond_delta(params, 2 * b + 2), params.j), 2, 3, 4
            )
        bonds.append(BondOperator(b, mat, 4))
    return bonds


def build_bonds(params: ModelParams) -> list[BondOperator]:
    """Bond operators in the encoding the couplings demand."""
    if params.needs_ladder:
        return build_ladder_bonds(params)
    return build_chain_bonds(params)


def embed_bond_dense(bond: BondOperator, n_sites: int) -> np.ndarray:
    """Lift a bond operator to the full Hilbert space of ``n_sites`` encoded sites.

    The result is dense with dimension ``local_dim**n_sites``; capped at
    2**16 basis states.
    """
    d = bond.local_dim
    if not 2 <= n_sites:
        raise ValueError("need at least two sites")
    if d**n_sites > 2**16:
        raise ValueError(f"dense embedding of {d}**{n_sites} states refused")
    b = bond.bond_index
    if b + 2 > n_sites:
        raise ValueError(f"bond {b} does not fit into {n_sites} sites")
    left = np.eye(d**b)
    right = np.eye(d ** (n_sites - b - 2))
    return np.kron(left, np.kron(bond.matrix, right))


def filled_state_energy(params: ModelParams) -> float:
    """Energy of the all-up-system / all-down-bath product state.

    Bonds joining parallel spins contribute ``+j delta_b / 4``, the junction
    bond joins anti-parallel spins and contributes ``-j delta_bath / 4``, and
    each of the ``l_sys - 2`` system NNN pairs adds ``+j_prime / 4``.
    """
    e = params.j * params.delta_sys * (params.l_sys - 1) / 4.0
    e += params.j * params.delta_bath * (params.l_bath - 1) / 4.0
    e -= params.j * params.delta_bath / 4.0
    e += params.j_prime * max(params.l_sys - 2, 0) / 4.0
    return e
