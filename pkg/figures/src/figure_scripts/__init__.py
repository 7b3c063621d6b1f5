"""Figure rendering for experiment CSV outputs."""

__version__ = "0.1.0"

from .render import FigureKind, FigureSpec, SchemaError, build_figure, render

__all__ = ["FigureKind", "FigureSpec", "SchemaError", "build_figure", "render"]
