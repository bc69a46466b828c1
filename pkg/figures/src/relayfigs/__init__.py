from .plots import FIGURE_IDS, PlotSpec, SchemaError, build_figure, render

__all__ = ["FIGURE_IDS", "PlotSpec", "SchemaError", "build_figure", "render"]
