from .render import Curve, PlotInputError, PlotSpec, RenderResult, main, render

__version__ = "0.1.0"
