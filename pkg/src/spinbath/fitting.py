"""Post-processing: power-law exponents, Page-time detection, fit summaries.

All fits are ordinary least squares on (ln t, ln y); the reported stderr is
the OLS slope uncertainty from the residual covariance, with no bootstrap.
Fit windows are explicit everywhere so exponents stay auditable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_HALF_WIDTH = 5


@dataclass(frozen=True)
class PowerLawFit:
    """y ~ prefactor * t^exponent on a time window."""

    quantity: str
    exponent: float
    stderr: float
    prefactor: float
    window: tuple[float, float]
    r2: float
    n_points: int


def fit_power_law(
    t: np.ndarray,
    y: np.ndarray,
    window: tuple[float, float],
    quantity: str = "y",
) -> PowerLawFit:
    """Least-squares line on (ln t, ln y) over t in [t_lo, t_hi]."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValueError("window must satisfy t_lo < t_hi")
    if t_lo <= 0:
        raise ValueError("power-law windows must start at positive time")
    keep = (t >= t_lo) & (t <= t_hi) & ~np.isnan(y)
    if keep.sum() < 3:
        raise ValueError(f"window {window} holds {int(keep.sum())} points, need >= 3")
    if np.any(y[keep] <= 0):
        raise ValueError("power-law fit needs positive values on the window")
    lx = np.log(t[keep])
    ly = np.log(y[keep])
    n = len(lx)
    design = np.column_stack([np.ones(n), lx])
    coeffs, residuals, _, _ = np.linalg.lstsq(design, ly, rcond=None)
    intercept, slope = coeffs
    fitted = design @ coeffs
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    if n > 2:
        sigma2 = ss_res / (n - 2)
        cov = sigma2 * np.linalg.inv(design.T @ design)
        stderr = float(np.sqrt(cov[1, 1]))
    else:
        stderr = 0.0
    return PowerLawFit(
        quantity=quantity,
        exponent=float(slope),
        stderr=stderr,
        prefactor=float(np.exp(intercept)),
        window=(float(t_lo), float(t_hi)),
        r2=r2,
        n_points=n,
    )


def moving_average(y: np.ndarray, half_width: int = DEFAULT_HALF_WIDTH) -> np.ndarray:
    """Centered moving average; edge windows shrink instead of zero-padding."""
    y = np.asarray(y, dtype=float)
    if half_width < 0:
        raise ValueError("half_width must be non-negative")
    if half_width == 0 or len(y) == 0:
        return y.copy()
    n = len(y)
    cums = np.concatenate([[0.0], np.cumsum(y)])
    idx = np.arange(n)
    lo = np.maximum(idx - half_width, 0)
    hi = np.minimum(idx + half_width + 1, n)
    return (cums[hi] - cums[lo]) / (hi - lo)


@dataclass(frozen=True)
class PageReport:
    """Peak analysis of one entropy curve.

    ``found`` is False for curves still rising at the end of the horizon
    (frozen dynamics); the other fields are nan then.
    """

    found: bool
    t_page: float
    s_vn_max: float
    escaped_fraction: float
    decay: PowerLawFit | None
    half_width: int


def detect_page(
    t: np.ndarray,
    s_vn: np.ndarray,
    n_bath: np.ndarray | None = None,
    n_initial: float | None = None,
    half_width: int = DEFAULT_HALF_WIDTH,
) -> PageReport:
    """Locate the entropy peak on a smoothed curve and fit the decay tail.

    The peak must sit clear of the trailing smoothing edge, otherwise the
    curve counts as still rising.  The escaped fraction is the bath particle
    number at the peak over ``n_initial``; the decay exponent is fitted on
    (1.5 t_page, t_end] when at least four samples land there.
    """
    t = np.asarray(t, dtype=float)
    s_vn = np.asarray(s_vn, dtype=float)
    if len(t) != len(s_vn):
        raise ValueError("time and entropy series must have equal lengths")
    if len(t) < 2 * half_width + 3:
        raise ValueError("series too short for the smoothing window")
    smooth = moving_average(s_vn, half_width)
    idx = int(np.argmax(smooth))
    if idx >= len(t) - 1 - half_width:
        return PageReport(
            found=False,
            t_page=float("nan"),
            s_vn_max=float("nan"),
            escaped_fraction=float("nan"),
            decay=None,
            half_width=half_width,
        )
    t_page = float(t[idx])
    escaped = float("nan")
    if n_bath is not None and n_initial:
        escaped = float(np.asarray(n_bath, dtype=float)[idx] / n_initial)
    decay = None
    tail = t > 1.5 * t_page
    if tail.sum() >= 4 and np.all(s_vn[tail] > 0):
        decay = fit_power_law(
            t, s_vn, (1.5 * t_page, float(t[-1])), quantity="s_vn_decay"
        )
    return PageReport(
        found=True,
        t_page=t_page,
        # smoothing only locates the peak; report the raw value there
        s_vn_max=float(s_vn[idx]),
        escaped_fraction=escaped,
        decay=decay,
        half_width=half_width,
    )


def format_fit_summary(
    fits: list[PowerLawFit], pages: list[tuple[str, PageReport]] | None = None
) -> str:
    """Fixed-width growth-exponent table plus optional peak summaries."""
    lines = [
        f"{'quantity':<22} {'exponent':>10} {'stderr':>9} "
        f"{'window':>16} {'r2':>8} {'points':>7}"
    ]
    for fit in fits:
        window = f"[{fit.window[0]:g}, {fit.window[1]:g}]"
        lines.append(
            f"{fit.quantity:<22} {fit.exponent:>10.4f} {fit.stderr:>9.4f} "
            f"{window:>16} {fit.r2:>8.5f} {fit.n_points:>7d}"
        )
    if pages:
        lines.append("")
        for label, page in pages:
            if not page.found:
                lines.append(f"{label}: no entropy peak inside the horizon")
                continue
            decay = (
                f", decay exponent {page.decay.exponent:.3f} +- {page.decay.stderr:.3f}"
                if page.decay is not None
                else ""
            )
            escaped = (
                f", escaped fraction {page.escaped_fraction:.3f}"
                if not math.isnan(page.escaped_fraction)
                else ""
            )
            lines.append(
                f"{label}: t_page = {page.t_page:g}, "
                f"S_vN max = {page.s_vn_max:.4f}{escaped}{decay}"
            )
    return "\n".join(lines) + "\n"
