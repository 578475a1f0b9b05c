"""Coarse-grained Boltzmann entropy from grand-canonical cell ensembles.

A cell is a short uniform XXZ subchain (with optional next-nearest-neighbor
z couplings).  Its macrostate is the pair (energy, magnetization) of the
reduced state; the cell's Boltzmann entropy is the entropy of the
grand-canonical ensemble exp(-beta (H - mu Sz)) / Z whose first moments match
that pair.  Summing over cells gives the coarse-grained entropy of the chain.

The moment map (beta, mu) -> (E, M) covers the interior of the convex hull
of the joint spectrum {(m_i, eps_i)}; targets on or outside the hull have no
finite-parameter ensemble and are reported as zero-entropy extremal
macrostates rather than raised.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .ed import sector_basis, terms_on_basis

_BOX = 20.0
_CLIP = 50.0
_EXACT_ZERO = 1e-12


@dataclass(frozen=True)
class CellSpectrum:
    """Joint (energy, magnetization) spectrum of one cell Hamiltonian."""

    n_sites: int
    energies: np.ndarray
    mags: np.ndarray
    lower_hull: tuple[np.ndarray, np.ndarray]
    upper_hull: tuple[np.ndarray, np.ndarray]

    @property
    def m_bounds(self) -> tuple[float, float]:
        return -self.n_sites / 2.0, self.n_sites / 2.0

    @property
    def energy_span(self) -> float:
        return float(self.energies.max() - self.energies.min())


def _lower_hull(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lower convex hull of points with strictly increasing x."""
    hull: list[tuple[float, float]] = []
    for x, y in zip(xs, ys):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0.0:
                hull.pop()
            else:
                break
        hull.append((float(x), float(y)))
    arr = np.array(hull)
    return arr[:, 0], arr[:, 1]


@functools.lru_cache(maxsize=64)
def cell_spectrum(
    n_sites: int, delta: float, j: float = 1.0, j_prime: float = 0.0
) -> CellSpectrum:
    """Diagonalize one cell sector by sector and cache the joint spectrum."""
    if n_sites < 1:
        raise ValueError("cell needs at least one site")
    if n_sites > 16:
        raise ValueError("cell spectra capped at 16 sites")
    terms = [(i, i + 1, j, j * delta) for i in range(n_sites - 1)]
    if j_prime != 0.0:
        terms += [(i, i + 2, 0.0, j_prime) for i in range(n_sites - 2)]
    energies, mags = [], []
    sector_m, sector_min, sector_max = [], [], []
    for n_up in range(n_sites + 1):
        basis = sector_basis(n_sites, n_up)
        if len(terms) == 0:
            evals = np.zeros(len(basis))
        else:
            evals = np.linalg.eigvalsh(terms_on_basis(n_sites, terms, basis))
        m = n_up - n_sites / 2.0
        energies.append(evals)
        mags.append(np.full(len(evals), m))
        sector_m.append(m)
        sector_min.append(evals.min())
        sector_max.append(evals.max())
    energies = np.concatenate(energies)
    mags = np.concatenate(mags)
    energies.flags.writeable = False
    mags.flags.writeable = False
    sector_m = np.array(sector_m)
    lower = _lower_hull(sector_m, np.array(sector_min))
    neg_x, neg_y = _lower_hull(sector_m, -np.array(sector_max))
    return CellSpectrum(
        n_sites=n_sites,
        energies=energies,
        mags=mags,
        lower_hull=lower,
        upper_hull=(neg_x, -neg_y),
    )


@dataclass(frozen=True)
class GcMoments:
    """First and second moments of one grand-canonical ensemble."""

    beta: float
    mu: float
    energy: float
    magnetization: float
    log_z: float
    var_e: float
    cov_em: float
    var_m: float


def gc_expectations(spec: CellSpectrum, beta: float, mu: float) -> GcMoments:
    """Moments of exp(-beta (H - mu Sz)) / Z, overflow-safe via max shift."""
    weights = -beta * (spec.energies - mu * spec.mags)
    shift = weights.max()
    p = np.exp(weights - shift)
    total = p.sum()
    p /= total
    energy = float(p @ spec.energies)
    mag = float(p @ spec.mags)
    de = spec.energies - energy
    dm = spec.mags - mag
    return GcMoments(
        beta=beta,
        mu=mu,
        energy=energy,
        magnetization=mag,
        log_z=float(shift + np.log(total)),
        var_e=float(p @ (de * de)),
        cov_em=float(p @ (de * dm)),
        var_m=float(p @ (dm * dm)),
    )


def entropy_value(spec: CellSpectrum, beta: float, mu: float) -> float:
    """Gibbs entropy S = beta (E - mu M) + ln Z of the fitted ensemble."""
    mom = gc_expectations(spec, beta, mu)
    return beta * (mom.energy - mu * mom.magnetization) + mom.log_z


@dataclass(frozen=True)
class GcFit:
    """Result of matching one cell's (energy, magnetization) macrostate."""

    beta: float
    mu: float
    entropy: float
    residual_e: float
    residual_m: float
    method: str
    iterations: int
    converged: bool


def _residual(
    spec: CellSpectrum, beta: float, mu: float, e_target: float, m_target: float
) -> tuple[np.ndarray, GcMoments]:
    mom = gc_expectations(spec, beta, mu)
    return np.array([mom.energy - e_target, mom.magnetization - m_target]), mom


def _newton(
    spec: CellSpectrum,
    e_target: float,
    m_target: float,
    beta0: float,
    mu0: float,
    tol: float,
    max_iter: int = 80,
) -> tuple[float, float, int, bool]:
    beta, mu = beta0, mu0
    res, mom = _residual(spec, beta, mu, e_target, m_target)
    for iteration in range(max_iter):
        if np.max(np.abs(res)) <= tol:
            return beta, mu, iteration, True
        jac = np.array(
            [
                [-mom.var_e + mu * mom.cov_em, mom.beta * mom.cov_em],
                [-mom.cov_em + mu * mom.var_m, mom.beta * mom.var_m],
            ]
        )
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            return beta, mu, iteration, False
        if not np.all(np.isfinite(step)):
            return beta, mu, iteration, False
        scale = 1.0
        old_norm = np.max(np.abs(res))
        for _ in range(30):
            new_beta = float(np.clip(beta + scale * step[0], -_CLIP, _CLIP))
            new_mu = float(np.clip(mu + scale * step[1], -_CLIP, _CLIP))
            new_res, new_mom = _residual(spec, new_beta, new_mu, e_target, m_target)
            if np.max(np.abs(new_res)) < old_norm:
                beta, mu, res, mom = new_beta, new_mu, new_res, new_mom
                break
            scale *= 0.5
        else:
            return beta, mu, iteration, False
    return beta, mu, max_iter, bool(np.max(np.abs(res)) <= tol)


def _hull_bounds(spec: CellSpectrum, m: float) -> tuple[float, float]:
    lx, ly = spec.lower_hull
    ux, uy = spec.upper_hull
    return float(np.interp(m, lx, ly)), float(np.interp(m, ux, uy))


def _grid_seed(
    spec: CellSpectrum, e_target: float, m_target: float
) -> tuple[float, float]:
    """Multi-resolution scan of the (beta, mu) box for a Newton seed."""
    center = np.array([0.0, 0.0])
    half = _BOX
    best = (np.inf, 0.0, 0.0)
    for _ in range(4):
        betas = np.linspace(center[0] - half, center[0] + half, 17)
        mus = np.linspace(center[1] - half, center[1] + half, 17)
        for b in betas:
            for u in mus:
                res, _ = _residual(spec, b, u, e_target, m_target)
                norm = float(np.max(np.abs(res)))
                if norm < best[0]:
                    best = (norm, float(b), float(u))
        center = np.array([best[1], best[2]])
        half /= 6.0
    return best[1], best[2]


def fit_gc(
    spec: CellSpectrum, e_target: float, m_target: float, tol: float = 1e-8
) -> GcFit:
    """Solve (E, M)(beta, mu) = targets and return the matched entropy.

    Exact (0, 0) targets are the infinite-temperature ensemble, where mu is
    not identifiable; they short-circuit to (beta, mu) = (0, 0) with the
    maximal entropy ``n ln 2``.  Targets on or outside the spectral hull come
    back as zero-entropy extremal macrostates with ``method='extremal'``,
    converged only if they sit on the hull within tolerance.
    """
    if abs(e_target) <= _EXACT_ZERO and abs(m_target) <= _EXACT_ZERO:
        return GcFit(
            beta=0.0,
            mu=0.0,
            entropy=spec.n_sites * np.log(2.0),
            residual_e=abs(e_target),
            residual_m=abs(m_target),
            method="newton",
            iterations=0,
            converged=True,
        )

    m_lo, m_hi = spec.m_bounds
    edge = 1e-9 * max(1.0, spec.energy_span)
    m_in = float(np.clip(m_target, m_lo, m_hi))
    e_lo, e_hi = _hull_bounds(spec, m_in)
    dist_m = max(0.0, m_lo - m_target, m_target - m_hi)
    dist_e = max(0.0, e_lo - e_target, e_target - e_hi)
    if dist_m > 0.0 or e_target <= e_lo + edge or e_target >= e_hi - edge:
        ok = dist_e <= max(tol, edge) and dist_m <= max(tol, edge)
        return GcFit(
            beta=float("nan"),
            mu=float("nan"),
            entropy=0.0,
            residual_e=dist_e,
            residual_m=dist_m,
            method="extremal",
            iterations=0,
            converged=ok,
        )

    seeds = [(b, u) for b in (-2.0, -0.5, 0.5, 2.0) for u in (-2.0, 0.0, 2.0)]
    seeds += [(1e-2, 0.0), (-1e-2, 0.0)]
    ranked = sorted(
        seeds,
        key=lambda s: np.max(np.abs(_residual(spec, s[0], s[1], e_target, m_target)[0])),
    )
    for beta0, mu0 in ranked[:3]:
        beta, mu, iters, ok = _newton(spec, e_target, m_target, beta0, mu0, tol)
        if ok:
            res, _ = _residual(spec, beta, mu, e_target, m_target)
            return GcFit(
                beta=beta,
                mu=mu,
                entropy=entropy_value(spec, beta, mu),
                residual_e=abs(float(res[0])),
                residual_m=abs(float(res[1])),
                method="newton",
                iterations=iters,
                converged=True,
            )

    beta0, mu0 = _grid_seed(spec, e_target, m_target)
    beta, mu, iters, ok = _newton(spec, e_target, m_target, beta0, mu0, tol)
    res, _ = _residual(spec, beta, mu, e_target, m_target)
    return GcFit(
        beta=beta,
        mu=mu,
        entropy=entropy_value(spec, beta, mu),
        residual_e=abs(float(res[0])),
        residual_m=abs(float(res[1])),
        method="grid",
        iterations=iters,
        converged=ok,
    )


def bath_entropy(fits: list[GcFit]) -> float:
    """Total coarse-grained entropy of a list of cell fits."""
    return float(sum(fit.entropy for fit in fits))
