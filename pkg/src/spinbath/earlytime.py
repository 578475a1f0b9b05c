"""Closed-form early-time validation curves.

For times up to O(1/J) the junction bond dominates and the leading behavior
of the cut entropy and the escaped-particle moments is coupling-independent:

* filled start:        S_vN = -(t^2/2) ln(t/2) + t^2/4,
                       <N_bath> = var(N_bath) = t^2/4;
* high-entropy start:  <N_bath> = var(N_bath) = t^2/8,
                       S_vN ~ t^2/8 - (t^2/4) ln t  (empirical fit only).

None of the formulas depend on the anisotropies or on the next-nearest
coupling, which is why ``predict`` takes no model parameters at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .observe import TimeSeriesRecord

KINDS = ("filled", "high_entropy")


@dataclass(frozen=True)
class EarlyTimePrediction:
    """Validation curves on a time grid.

    ``s_vn_is_fit`` marks the high-entropy entropy curve, which is an
    empirical fit rather than a derived result; comparisons against it
    should use loose tolerances or skip it.
    """

    kind: str
    t_grid: np.ndarray
    s_vn_pred: np.ndarray
    n_bath_pred: np.ndarray
    var_pred: np.ndarray
    s_vn_is_fit: bool
    validity_horizon: float = 1.0


def _t2_log_term(t: np.ndarray, prefactor: float, log_arg_scale: float) -> np.ndarray:
    """prefactor * t^2 * ln(t * log_arg_scale), with the t -> 0 limit of 0."""
    out = np.zeros_like(t)
    positive = t > 0
    tp = t[positive]
    out[positive] = prefactor * tp**2 * np.log(tp * log_arg_scale)
    return out


def predict(kind: str, t_grid: Iterable[float]) -> EarlyTimePrediction:
    """Evaluate the early-time curves for one initial-state kind."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    t = np.asarray(list(t_grid), dtype=float)
    if np.any(t < 0):
        raise ValueError("early-time grid must be non-negative")
    if kind == "filled":
        s_vn = -_t2_log_term(t, 0.5, 0.5) + t**2 / 4
        n_bath = t**2 / 4
        var = t**2 / 4
        is_fit = False
    else:
        s_vn = t**2 / 8 - _t2_log_term(t, 0.25, 1.0)
        n_bath = t**2 / 8
        var = t**2 / 8
        is_fit = True
    return EarlyTimePrediction(
        kind=kind,
        t_grid=t,
        s_vn_pred=s_vn,
        n_bath_pred=n_bath,
        var_pred=var,
        s_vn_is_fit=is_fit,
    )


@dataclass(frozen=True)
class DeviationReport:
    """Max relative deviation per quantity over a comparison window.

    Quantities with no valid comparison points (all skipped or nan) come
    back as nan.
    """

    kind: str
    window: tuple[float, float]
    n_points: int
    s_vn: float
    n_bath: float
    var_n_bath: float
    s_vn_is_fit: bool

    def worst_rigorous(self) -> float:
        """Largest deviation among the derived (non-fit) quantities."""
        values = [self.n_bath, self.var_n_bath]
        if not self.s_vn_is_fit:
            values.append(self.s_vn)
        values = [v for v in values if not np.isnan(v)]
        return max(values) if values else float("nan")


def _max_rel_dev(measured: np.ndarray, predicted: np.ndarray) -> float:
    good = ~np.isnan(measured)
    if not np.any(good):
        return float("nan")
    return float(np.max(np.abs(measured[good] - predicted[good]) / predicted[good]))


def compare(
    prediction: EarlyTimePrediction,
    records: list[TimeSeriesRecord],
    window: tuple[float, float] = (0.05, 0.5),
) -> DeviationReport:
    """Match records to the prediction grid and report relative deviations.

    Records are paired with grid times to 1e-9; only pairs inside the window
    count.  nan record fields (sparser measurement cadences) are skipped.
    """
    lo, hi = window
    times = np.array([rec.time for rec in records])
    pairs: list[tuple[int, int]] = []
    for i, t in enumerate(prediction.t_grid):
        if not lo <= t <= hi:
            continue
        hits = np.nonzero(np.abs(times - t) < 1e-9)[0]
        if len(hits):
            pairs.append((i, int(hits[0])))
    if not pairs:
        return DeviationReport(
            kind=prediction.kind,
            window=window,
            n_points=0,
            s_vn=float("nan"),
            n_bath=float("nan"),
            var_n_bath=float("nan"),
            s_vn_is_fit=prediction.s_vn_is_fit,
        )
    grid_idx = np.array([p[0] for p in pairs])
    rec_idx = [p[1] for p in pairs]
    s_vn = np.array([records[i].s_vn for i in rec_idx])
    n_bath = np.array([records[i].n_bath_mean for i in rec_idx])
    var = np.array([records[i].n_bath_var for i in rec_idx])
    return DeviationReport(
        kind=prediction.kind,
        window=window,
        n_points=len(pairs),
        s_vn=_max_rel_dev(s_vn, prediction.s_vn_pred[grid_idx]),
        n_bath=_max_rel_dev(n_bath, prediction.n_bath_pred[grid_idx]),
        var_n_bath=_max_rel_dev(var, prediction.var_pred[grid_idx]),
        s_vn_is_fit=prediction.s_vn_is_fit,
    )
