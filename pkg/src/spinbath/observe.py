"""Measurement layer: one Observer turns an evolving state into records.

The observer is built once per run from the model parameters.  It knows the
encoding (single sites or folded rungs), precomputes every operator and term
list it needs, and measures a fixed set of quantities:

* half-chain entanglement entropy at the system-bath cut,
* per-site density profile in chain-site order,
* escaped-particle moments (mean always, variance at its own cadence),
* system-cell and bath-bin energies and magnetizations,
* the matching grand-canonical Boltzmann entropies (at their own cadence),
* truncation and bond-dimension diagnostics.

Energies are grouped by coarse-graining cell: the system block and bath bins
of ``bin_size`` chain sites, counting only bonds internal to each cell, so
the junction and bin-boundary bonds belong to no cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gcfit import GcFit, bath_entropy, cell_spectrum, fit_gc
from .model import ModelParams, N_UP, two_site_xxz, two_site_zz, embed_two_factor
from .mps import MpsState

_N_UPPER = np.diag([1.0, 1.0, 0.0, 0.0])
_N_LOWER = np.diag([1.0, 0.0, 1.0, 0.0])
_N_RUNG = np.diag([2.0, 1.0, 1.0, 0.0])


@dataclass(frozen=True)
class TimeSeriesRecord:
    """Everything measured at one time point.

    Fields measured only at a sparser cadence hold nan (or None for the
    per-cell fit list) on the steps in between.
    """

    time: float
    s_vn: float
    n_bath_mean: float
    n_bath_var: float
    density: np.ndarray
    e_sys: float
    m_sys: float
    e_bins: np.ndarray
    m_bins: np.ndarray
    s_b_sys: float
    s_b_bath: float
    disc_weight: float
    chi_used: int
    norm_error: float
    gc_fits: list[tuple[str, GcFit]] | None


@dataclass(frozen=True)
class _CellTerms:
    """Operator terms of one coarse-graining cell, in encoding coordinates."""

    label: str
    n_sites: int
    sites: range
    local_terms: list[tuple[int, np.ndarray]]
    bond_terms: list[tuple[int, np.ndarray]]


def _chain_cell(label: str, sites: range, delta: float, j: float) -> _CellTerms:
    gate = two_site_xxz(delta, j)
    bonds = [(b, gate) for b in range(sites.start, sites.stop - 1)]
    return _CellTerms(label, len(sites), sites, [], bonds)


def _ladder_cell(
    label: str, rungs: range, delta: float, j: float, j_prime: float
) -> _CellTerms:
    """Cell terms for a block of whole rungs.

    Chain bond 2r is internal to rung r; chain bond 2r+1 couples rungs r and
    r+1; next-nearest chain pairs (i, i+2) live on the same ladder bond as
    the nearest-neighbor pair starting one site earlier.
    """
    intra = two_site_xxz(delta, j)
    inter = embed_two_factor(two_site_xxz(delta, j), 1, 2, 4)
    if j_prime != 0.0:
        inter = inter + embed_two_factor(two_site_zz(j_prime), 0, 2, 4)
        inter = inter + embed_two_factor(two_site_zz(j_prime), 1, 3, 4)
    local_terms = [(r, intra) for r in rungs]
    bond_terms = [(r, inter) for r in range(rungs.start, rungs.stop - 1)]
    return _CellTerms(label, 2 * len(rungs), rungs, local_terms, bond_terms)


class Observer:
    """Measures a fixed record layout on states of one model geometry."""

    def __init__(
        self,
        params: ModelParams,
        bin_size: int | None = None,
        variance_cadence: int = 1,
        boltzmann_cadence: int = 1,
        with_boltzmann: bool = True,
    ):
        if variance_cadence < 1 or boltzmann_cadence < 1:
            raise ValueError("cadences are positive integers")
        self.params = params
        self.bin_size = params.l_sys if bin_size is None else bin_size
        self.with_boltzmann = with_boltzmann
        self.variance_cadence = variance_cadence
        self.boltzmann_cadence = boltzmann_cadence
        if with_boltzmann:
            if self.bin_size < 2:
                raise ValueError("bin_size must be at least 2 for cell entropies")
            if params.l_bath % self.bin_size != 0:
                raise ValueError(
                    f"l_bath={params.l_bath} is not divisible by "
                    f"bin_size={self.bin_size}"
                )
            if params.needs_ladder and self.bin_size % 2 != 0:
                raise ValueError("bin_size must be even in the ladder encoding")
        self._event = 0

        p = params
        self.ladder = p.needs_ladder
        self.cut_bond = (p.l_sys // 2 - 1) if self.ladder else p.sys_bath_bond
        if self.ladder:
            self.bath_block = range(p.l_sys // 2, p.n_rungs)
            self.bath_block_op = _N_RUNG
            sys_cell = _ladder_cell(
                "sys", range(0, p.l_sys // 2), p.delta_sys, p.j, p.j_prime
            )
            bath_cells = []
            if with_boltzmann:
                half = self.bin_size // 2
                for k in range(p.l_bath // self.bin_size):
                    rungs = range(p.l_sys // 2 + k * half, p.l_sys // 2 + (k + 1) * half)
                    bath_cells.append(
                        _ladder_cell(f"bath{k}", rungs, p.delta_bath, p.j, 0.0)
                    )
        else:
            self.bath_block = range(p.l_sys, p.l_total)
            self.bath_block_op = N_UP
            sys_cell = _chain_cell("sys", range(0, p.l_sys), p.delta_sys, p.j)
            bath_cells = []
            if with_boltzmann:
                for k in range(p.l_bath // self.bin_size):
                    sites = range(
                        p.l_sys + k * self.bin_size, p.l_sys + (k + 1) * self.bin_size
                    )
                    bath_cells.append(_chain_cell(f"bath{k}", sites, p.delta_bath, p.j))
        self.sys_cell = sys_cell
        self.bath_cells = bath_cells
        if with_boltzmann:
            self.sys_spectrum = cell_spectrum(p.l_sys, p.delta_sys, p.j, p.j_prime)
            self.bath_spectrum = cell_spectrum(self.bin_size, p.delta_bath, p.j)

    def density_profile(self, state: MpsState) -> np.ndarray:
        """Up-spin occupation per chain site, also in the ladder encoding."""
        if not self.ladder:
            return state.site_expectations(N_UP)
        profile = np.empty(self.params.l_total)
        profile[0::2] = state.site_expectations(_N_UPPER)
        profile[1::2] = state.site_expectations(_N_LOWER)
        return profile

    def cell_energy(self, state: MpsState, cell: _CellTerms) -> float:
        terms: list[tuple[int, np.ndarray, bool]] = [
            (site, op, True) for site, op in cell.local_terms
        ] + [(bond, op, False) for bond, op in cell.bond_terms]
        terms.sort(key=lambda t: t[0])
        total = 0.0
        for pos, op, is_local in terms:
            if is_local:
                total += state.expect_local(pos, op)
            else:
                total += state.expect_bond(pos, op)
        return total

    def _cell_magnetizations(self, profile: np.ndarray) -> tuple[float, np.ndarray]:
        p = self.params
        m_sys = float(profile[: p.l_sys].sum() - p.l_sys / 2.0)
        m_bins = np.empty(len(self.bath_cells))
        for k in range(len(self.bath_cells)):
            lo = p.l_sys + k * self.bin_size
            seg = profile[lo : lo + self.bin_size]
            m_bins[k] = seg.sum() - self.bin_size / 2.0
        return m_sys, m_bins

    def measure(
        self,
        state: MpsState,
        step_index: int,
        time: float,
        cumulative_discarded: float,
    ) -> TimeSeriesRecord:
        event = self._event
        self._event += 1
        p = self.params

        profile = self.density_profile(state)
        n_bath_mean = float(profile[p.l_sys :].sum())
        m_sys, m_bins = self._cell_magnetizations(profile)

        if event % self.variance_cadence == 0:
            _, n_bath_var = state.block_sum_moments(self.bath_block, self.bath_block_op)
        else:
            n_bath_var = float("nan")

        e_sys = self.cell_energy(state, self.sys_cell)
        e_bins = np.array(
            [self.cell_energy(state, cell) for cell in self.bath_cells]
        )

        s_b_sys = float("nan")
        s_b_bath = float("nan")
        gc_fits: list[tuple[str, GcFit]] | None = None
        if self.with_boltzmann and event % self.boltzmann_cadence == 0:
            sys_fit = fit_gc(self.sys_spectrum, e_sys, m_sys)
            gc_fits = [("sys", sys_fit)]
            for k, cell in enumerate(self.bath_cells):
                gc_fits.append(
                    (cell.label, fit_gc(self.bath_spectrum, e_bins[k], m_bins[k]))
                )
            s_b_sys = sys_fit.entropy
            s_b_bath = bath_entropy([fit for label, fit in gc_fits[1:]])

        s_vn = state.entanglement_entropy(self.cut_bond)
        chi_used = max(
            max(t.shape[0], t.shape[2]) for t in state.tensors
        )
        norm_error = abs(state.norm() - 1.0)

        return TimeSeriesRecord(
            time=time,
            s_vn=s_vn,
            n_bath_mean=n_bath_mean,
            n_bath_var=n_bath_var,
            density=profile,
            e_sys=e_sys,
            m_sys=m_sys,
            e_bins=e_bins,
            m_bins=m_bins,
            s_b_sys=s_b_sys,
            s_b_bath=s_b_bath,
            disc_weight=cumulative_discarded,
            chi_used=chi_used,
            norm_error=norm_error,
            gc_fits=gc_fits,
        )

    __call__ = measure
