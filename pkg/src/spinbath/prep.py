"""Initial states: the filled product state and Haar-random brickwork circuits.

Both preparations start from a product state in the single-site chain
encoding (the bath always fully polarized down) and, when the couplings need
the ladder encoding, fold site pairs into rungs afterwards.  The high-entropy
preparation scrambles the system half with a brickwork circuit of independent
Haar two-site unitaries applied exactly (no truncation), which a bond
dimension of ``2**(l_sys//2)`` always suffices for.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, N_UP
from .mps import MpsState

_UP = np.array([1.0, 0.0])
_DOWN = np.array([0.0, 1.0])


@dataclass(frozen=True)
class InitialStateSpec:
    """Which initial state to build.

    ``circuit_depth`` applies to the high-entropy kind only and defaults to
    ``l_sys`` (enough layers for the circuit's light cone to cross the system).
    """

    kind: str
    seed: int = 0
    circuit_depth: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("filled", "high_entropy"):
            raise ValueError(f"unknown initial state kind {self.kind!r}")
        if self.circuit_depth is not None and self.circuit_depth < 0:
            raise ValueError("circuit_depth must be non-negative")


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The R-diagonal phase correction removes the QR gauge so the distribution
    is exactly Haar.
    """
    ginibre = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    ginibre *= np.sqrt(0.5)
    q, r = np.linalg.qr(ginibre)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))[None, :]


def _base_kets(params: ModelParams, kind: str) -> list[np.ndarray]:
    if kind == "filled":
        system = [_UP] * params.l_sys
    else:
        # alternating up/down: half filling for even system sizes
        system = [_UP if i % 2 == 0 else _DOWN for i in range(params.l_sys)]
    return system + [_DOWN] * params.l_bath


def check_filling_balance(state: MpsState, params: ModelParams) -> float:
    """Warn when the scrambled system strays far from half filling.

    Returns the system particle number.  A deviation beyond 0.15 * l_sys is
    legitimate for an unlucky seed, so it is reported, not raised.
    """
    if state.local_dim == 4:
        op = np.diag([2.0, 1.0, 1.0, 0.0])
        block = range(0, params.l_sys // 2)
    else:
        op = N_UP
        block = range(0, params.l_sys)
    n_sys, _ = state.block_sum_moments(block, op)
    if abs(n_sys - params.l_sys / 2.0) > 0.15 * params.l_sys:
        warnings.warn(
            f"system filling {n_sys:.3f} deviates from {params.l_sys / 2} "
            "by more than 15% of l_sys",
            stacklevel=2,
        )
    return n_sys


def prepare(
    spec: InitialStateSpec,
    params: ModelParams,
    chi_max: int,
    svd_cutoff: float = 1e-12,
) -> MpsState:
    """Build the initial state in the encoding the couplings require.

    The brickwork circuit is applied exactly; ``chi_max`` must be able to
    hold it (``2**(l_sys//2)``), otherwise the preparation refuses rather
    than silently truncating the initial condition.
    """
    kets = _base_kets(params, spec.kind)
    if spec.kind == "filled":
        state = MpsState.product_state(kets, chi_max=chi_max, svd_cutoff=svd_cutoff)
    else:
        needed = 2 ** (params.l_sys // 2)
        if chi_max < needed:
            raise ValueError(
                f"chi_max={chi_max} cannot hold the depth-{params.l_sys} circuit "
                f"exactly (needs {needed})"
            )
        state = MpsState.product_state(kets, chi_max=chi_max, svd_cutoff=0.0)
        depth = spec.circuit_depth if spec.circuit_depth is not None else params.l_sys
        rng = np.random.default_rng(spec.seed)
        for layer in range(depth):
            for bond in range(layer % 2, params.l_sys - 1, 2):
                state.apply_two_site_gate(bond, haar_unitary(4, rng))
        state.svd_cutoff = svd_cutoff
        check_filling_balance(state, params)
    if params.needs_ladder:
        state = state.fold_pairs()
    return state
