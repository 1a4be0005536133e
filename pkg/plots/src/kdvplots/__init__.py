"""Static figures from kdvscatter run exports.

Four figure kinds, each fed by the documented plot_data CSV schema of
a completed run directory: band configuration diagrams, reflection
coefficient plots, residual heat strips, and background profile
overlays.  See kdvplots.render for the drawing contracts and
kdvplots.cli for the command line front end.
"""

from kdvplots.data import SpecError, Table, read_table
from kdvplots.render import (KINDS, PlotSpec, Style, build_figure,
                             plot_spec, render, segment_layout)

__all__ = [
    "KINDS",
    "PlotSpec",
    "SpecError",
    "Style",
    "Table",
    "build_figure",
    "plot_spec",
    "read_table",
    "render",
    "segment_layout",
]
