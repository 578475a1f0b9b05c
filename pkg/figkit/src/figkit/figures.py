"""Panel specifications and the renderer that turns them into image files."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .overlays import OVERLAYS
from .schema import SCHEMAS, load_table

# panel kind -> table kind it reads
PANEL_TABLES = {
    "growth": "timeseries",
    "entropy_compare": "timeseries",
    "profiles": "profiles",
    "overlap": "overlap",
}

_COMPARE_DEFAULT = ("s_vn", "s_b_sys", "s_b_bath")


@dataclass(frozen=True)
class PanelSpec:
    """One axes' worth of content.

    kinds: 'growth' (timeseries columns vs t, optional closed-form
    overlays), 'profiles' (density vs site at snapshot times),
    'entropy_compare' (entanglement vs coarse-grained entropies),
    'overlap' (eigenstate weight histogram).
    """

    kind: str
    csv_path: str
    columns: tuple[str, ...] = ()
    overlays: tuple[str, ...] = ()
    log_x: bool = False
    log_y: bool = False
    window: tuple[float, float] | None = None
    snapshot_times: tuple[float, ...] | None = None
    title: str = ""

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "overlays", tuple(self.overlays))
        if self.snapshot_times is not None:
            object.__setattr__(
                self, "snapshot_times", tuple(float(x) for x in self.snapshot_times)
            )
        if self.kind not in PANEL_TABLES:
            raise ValueError(f"unknown panel kind {self.kind!r}")
        table = SCHEMAS[PANEL_TABLES[self.kind]]
        if self.kind == "growth" and not self.columns:
            raise ValueError("growth panels need at least one column")
        if self.kind == "entropy_compare" and not self.columns:
            object.__setattr__(self, "columns", _COMPARE_DEFAULT)
        for column in self.columns:
            if column not in table or column == "t":
                raise ValueError(
                    f"column {column!r} is not a plottable "
                    f"{PANEL_TABLES[self.kind]} column"
                )
        for name in self.overlays:
            if self.kind != "growth":
                raise ValueError("overlays apply to growth panels only")
            if name not in OVERLAYS:
                raise ValueError(
                    f"unknown overlay {name!r}; known: {sorted(OVERLAYS)}"
                )
        if self.window is not None and not self.window[0] < self.window[1]:
            raise ValueError("window must be (lo, hi) with lo < hi")


@dataclass(frozen=True)
class FigureSpec:
    panels: tuple[PanelSpec, ...]
    output_path: str
    layout: tuple[int, int] | None = None  # (rows, cols); default single row

    def __post_init__(self):
        object.__setattr__(self, "panels", tuple(self.panels))
        if not self.panels:
            raise ValueError("a figure needs at least one panel")
        if self.layout is not None:
            rows, cols = self.layout
            if rows * cols < len(self.panels):
                raise ValueError(
                    f"layout {self.layout} holds fewer axes than "
                    f"{len(self.panels)} panels"
                )


def _windowed(t: np.ndarray, window) -> np.ndarray:
    if window is None:
        return np.ones_like(t, dtype=bool)
    return (t >= window[0]) & (t <= window[1])


def _draw_growth(ax, panel: PanelSpec) -> None:
    data = load_table(panel.csv_path, "timeseries")
    t = data["t"]
    keep = _windowed(t, panel.window)
    for column in panel.columns:
        ax.plot(t[keep], data[column][keep], "o-", ms=3.0, lw=1.0, label=column)
    drawn = t[keep]
    positive = drawn[drawn > 0]
    if len(positive) and panel.overlays:
        if panel.log_x:
            grid = np.geomspace(positive.min(), positive.max(), 200)
        else:
            grid = np.linspace(positive.min(), positive.max(), 200)
        for name in panel.overlays:
            fn, label = OVERLAYS[name]
            ax.plot(grid, fn(grid), "--", lw=1.4, label=label)
    ax.set_xlabel("t J")
    if panel.log_x:
        ax.set_xscale("log")
    if panel.log_y:
        ax.set_yscale("log")
    ax.legend(fontsize=8)


def _draw_profiles(ax, panel: PanelSpec) -> None:
    data = load_table(panel.csv_path, "profiles")
    t = data["t"]
    available = np.unique(t)
    if panel.snapshot_times is None:
        step = max(1, len(available) // 6)
        times = available[::step]
    else:
        times = []
        for wanted in panel.snapshot_times:
            hits = available[np.isclose(available, wanted, rtol=0.0, atol=1e-9)]
            if len(hits) == 0:
                raise ValueError(
                    f"no profile snapshot at t={wanted:g} in {panel.csv_path}"
                )
            times.append(hits[0])
    for when in times:
        rows = np.isclose(t, when, rtol=0.0, atol=1e-9)
        order = np.argsort(data["site"][rows])
        ax.plot(
            data["site"][rows][order],
            data["density"][rows][order],
            "o-",
            ms=3.0,
            lw=1.0,
            label=f"t = {when:g}",
        )
    ax.set_xlabel("site")
    ax.set_ylabel("density")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(fontsize=8)


def _draw_entropy_compare(ax, panel: PanelSpec) -> None:
    data = load_table(panel.csv_path, "timeseries")
    t = data["t"]
    keep = _windowed(t, panel.window)
    for column in panel.columns:
        ax.plot(t[keep], data[column][keep], "o-", ms=3.0, lw=1.0, label=column)
    ax.set_xlabel("t J")
    ax.set_ylabel("entropy")
    if panel.log_x:
        ax.set_xscale("log")
    if panel.log_y:
        ax.set_yscale("log")
    ax.legend(fontsize=8)


def _draw_overlap(ax, panel: PanelSpec) -> None:
    data = load_table(panel.csv_path, "overlap")
    weights = data["weight"]
    floor = max(weights.max() * 1e-12, 1e-300)
    shown = np.maximum(weights, floor) if panel.log_y else weights
    ax.vlines(data["energy"], floor if panel.log_y else 0.0, shown, lw=1.0)
    participation = 1.0 / float(np.sum(weights**2))
    ax.set_xlabel("eigenstate energy")
    ax.set_ylabel("overlap weight")
    if panel.log_y:
        ax.set_yscale("log")
        ax.set_ylim(bottom=max(weights[weights > 0].min() * 0.5, floor))
    ax.text(
        0.02,
        0.95,
        f"PR = {participation:.1f}",
        transform=ax.transAxes,
        va="top",
        fontsize=9,
    )


_DRAWERS = {
    "growth": _draw_growth,
    "profiles": _draw_profiles,
    "entropy_compare": _draw_entropy_compare,
    "overlap": _draw_overlap,
}

# keep emitted files free of timestamps so identical inputs give identical bytes
_METADATA = {
    ".png": {"Software": "figkit"},
    ".svg": {"Date": None},
    ".pdf": {"CreationDate": None},
}


def render(spec: FigureSpec) -> Path:
    """Draw every panel and write the image file; returns the output path."""
    rows, cols = spec.layout if spec.layout is not None else (1, len(spec.panels))
    with matplotlib.rc_context({"svg.hashsalt": "figkit"}):
        fig, axes = plt.subplots(
            rows, cols, figsize=(4.4 * cols, 3.4 * rows), squeeze=False
        )
        try:
            flat = list(axes.flat)
            for panel, ax in zip(spec.panels, flat):
                _DRAWERS[panel.kind](ax, panel)
                if panel.title:
                    ax.set_title(panel.title, fontsize=10)
            for ax in flat[len(spec.panels) :]:
                ax.set_visible(False)
            fig.tight_layout()
            out = Path(spec.output_path)
            suffix = out.suffix.lower()
            if suffix not in _METADATA:
                raise ValueError(
                    f"unsupported image format {suffix!r}; use .png, .svg or .pdf"
                )
            out.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(out, dpi=150, metadata=_METADATA[suffix])
        finally:
            plt.close(fig)
    return out
