"""Offline figure rendering for the spin-bath simulator's CSV artifacts."""

from .figures import FigureSpec, PanelSpec, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "PanelSpec", "render", "__version__"]
