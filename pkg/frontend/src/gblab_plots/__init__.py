"""Static figures from gblab aggregate CSV results."""

from .render import AGGREGATE_COLUMNS, KINDS, PlotError, PlotJob, plot

__all__ = ["AGGREGATE_COLUMNS", "KINDS", "PlotError", "PlotJob", "plot"]
