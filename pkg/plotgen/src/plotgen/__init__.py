"""Convergence figure generation for lpsflow result CSVs."""

from .core import PlotSpec, PlotgenError, collect_series, fitted_slope, read_rows, render

__version__ = "0.1.0"
