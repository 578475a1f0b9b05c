"""Fourth-order Trotter decomposition and the TEBD sweep engine.

One time step factorizes as five second-order steps
``U2(tau1) U2(tau1) U2(tau2) U2(tau1) U2(tau1)`` with
``tau1 = dt / (4 - 4**(1/3))`` and ``tau2 = dt - 4 tau1`` (negative), where
``U2(tau) = A(tau/2) B(tau) A(tau/2)`` splits the bonds into the even-index
sublattice A (outer half-layers) and the odd-index sublattice B.  Merging
adjacent A half-layers leaves eleven sublattice layers per step drawing on
four distinct gate durations: ``tau1/2``, ``tau1``, ``(tau1+tau2)/2`` and
``tau2``.

Within a layer the gates commute (disjoint bonds), so a layer is swept in
either direction; sweeping alternately left-to-right and right-to-left keeps
the orthogonality center adjacent to the next gate and avoids full-chain
gauge moves.  All gates are diagonalized once per plan and cached.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .model import BondOperator, local_charges
from .mps import MpsState, TruncationReport

# (sublattice parity, duration slot) for the eleven merged layers
_T_HALF1, _T_FULL1, _T_MID, _T_FULL2 = range(4)
_LAYERS = (
    (0, _T_HALF1),
    (1, _T_FULL1),
    (0, _T_FULL1),
    (1, _T_FULL1),
    (0, _T_MID),
    (1, _T_FULL2),
    (0, _T_MID),
    (1, _T_FULL1),
    (0, _T_FULL1),
    (1, _T_FULL1),
    (0, _T_HALF1),
)


def fourth_order_taus(dt: float) -> tuple[float, float]:
    """The two substep durations; ``4*tau1 + tau2 == dt`` exactly in floats."""
    tau1 = dt / (4.0 - 4.0 ** (1.0 / 3.0))
    tau2 = dt - 4.0 * tau1
    return tau1, tau2


def _duration_table(dt: float) -> tuple[float, float, float, float]:
    tau1, tau2 = fourth_order_taus(dt)
    return (tau1 / 2.0, tau1, (tau1 + tau2) / 2.0, tau2)


def _charge_blocks(matrix: np.ndarray, local_dim: int):
    """Index groups of equal two-site charge, or None if the matrix mixes them."""
    phys = local_charges(local_dim)
    pair = (phys[:, None] + phys[None, :]).reshape(-1)
    off = np.abs(matrix)[pair[:, None] != pair[None, :]]
    if off.size and off.max() >= 1e-14:
        return None
    return [np.nonzero(pair == q)[0] for q in np.unique(pair)]


def _gates_for_bond(matrix: np.ndarray, taus, local_dim: int) -> list[np.ndarray]:
    """exp(-i H tau) for each duration, assembled blockwise when H conserves Sz.

    Blockwise assembly keeps the gate exactly charge-diagonal (entries between
    charge sectors are written as true zeros), which the blocked SVD relies on.
    """
    blocks = _charge_blocks(matrix, local_dim)
    gates = [np.zeros(matrix.shape, dtype=complex) for _ in taus]
    if blocks is None:
        evals, evecs = sla.eigh(matrix, check_finite=False)
        for gate, tau in zip(gates, taus):
            gate[:] = (evecs * np.exp(-1j * evals * tau)) @ evecs.conj().T
        return gates
    for idx in blocks:
        sub = matrix[np.ix_(idx, idx)]
        evals, evecs = sla.eigh(sub, check_finite=False)
        for gate, tau in zip(gates, taus):
            gate[np.ix_(idx, idx)] = (evecs * np.exp(-1j * evals * tau)) @ evecs.conj().T
    return gates


@dataclass(frozen=True)
class TrotterPlan:
    """Cached gates and layer schedule for one time-step size."""

    dt: float
    local_dim: int
    n_bonds: int
    gates: list[list[np.ndarray]]  # [bond][duration slot]
    conserves_charge: bool

    @property
    def layers(self):
        return _LAYERS

    def layer_bonds(self, parity: int) -> range:
        return range(parity, self.n_bonds, 2)


def make_plan(bonds: list[BondOperator], dt: float) -> TrotterPlan:
    """Diagonalize every bond once and cache the four gate durations.

    Every cached gate is verified unitary to 1e-12; the plan records whether
    all bonds conserve total Sz so sweeps can skip per-gate checks.
    """
    if not bonds:
        raise ValueError("need at least one bond")
    if not np.isfinite(dt) or dt <= 0:
        raise ValueError("dt must be positive and finite")
    indices = [b.bond_index for b in bonds]
    if indices != list(range(len(bonds))):
        raise ValueError("bonds must be listed contiguously from index 0")
    local_dim = bonds[0].local_dim
    if any(b.local_dim != local_dim for b in bonds):
        raise ValueError("bonds mix local dimensions")
    taus = _duration_table(dt)
    gates = []
    conserves = True
    eye = np.eye(local_dim**2)
    for bond in bonds:
        bond_gates = _gates_for_bond(np.asarray(bond.matrix), taus, local_dim)
        for gate in bond_gates:
            if np.max(np.abs(gate.conj().T @ gate - eye)) > 1e-12:
                raise ValueError(f"cached gate at bond {bond.bond_index} is not unitary")
        gates.append(bond_gates)
        if _charge_blocks(np.asarray(bond.matrix), local_dim) is None:
            conserves = False
    return TrotterPlan(
        dt=float(dt),
        local_dim=local_dim,
        n_bonds=len(bonds),
        gates=gates,
        conserves_charge=conserves,
    )


@dataclass(frozen=True)
class StepSummary:
    """Truncation accounting for one full time step."""

    discarded_weight: float
    max_bond_dim: int
    max_gate_discard: float


def step(state: MpsState, plan: TrotterPlan, forward: bool = True) -> StepSummary:
    """Advance the state by one time step (eleven alternating sublattice layers).

    ``forward`` picks the zigzag origin: the first layer sweeps left-to-right
    when true, right-to-left when false, and subsequent layers alternate, so
    consecutive steps with flipped ``forward`` chain without long gauge moves.
    """
    if state.n_sites - 1 != plan.n_bonds:
        raise ValueError("plan and state disagree on the number of bonds")
    if state.bond_charges is not None and not plan.conserves_charge:
        state.drop_charges()
    discarded = 0.0
    worst = 0.0
    max_dim = state.max_bond_dim()
    direction_right = forward
    for parity, slot in _LAYERS:
        bonds = plan.layer_bonds(parity)
        ordered = bonds if direction_right else reversed(bonds)
        leave = "right" if direction_right else "left"
        for bond in ordered:
            report: TruncationReport = state.apply_two_site_gate(
                bond,
                plan.gates[bond][slot],
                leave_center=leave,
                check_unitary=False,
            )
            discarded += report.discarded_weight
            worst = max(worst, report.discarded_weight)
            if report.new_bond_dim > max_dim:
                max_dim = report.new_bond_dim
        direction_right = not direction_right
    return StepSummary(discarded, max_dim, worst)


def evolve(
    state: MpsState,
    plan: TrotterPlan,
    n_steps: int,
    measure_cadence: int,
    measure_fn: Callable[[MpsState, int, float, float], object],
    sink: Callable[[object], None] | None = None,
) -> list:
    """Run ``n_steps`` steps, measuring at step 0 and every ``measure_cadence`` steps.

    ``measure_fn(state, step_index, time, cumulative_discarded)`` builds each
    record; records are returned as a list and optionally streamed to ``sink``
    as they are produced.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    if measure_cadence < 1:
        raise ValueError("measure_cadence must be at least 1")
    records = []

    def emit(step_index: int, cum: float) -> None:
        record = measure_fn(state, step_index, step_index * plan.dt, cum)
        records.append(record)
        if sink is not None:
            sink(record)

    cumulative = 0.0
    emit(0, cumulative)
    for k in range(1, n_steps + 1):
        summary = step(state, plan, forward=(k % 2 == 1))
        cumulative += summary.discarded_weight
        if k % measure_cadence == 0:
            emit(k, cumulative)
    return records
