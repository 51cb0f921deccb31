"""Ordering-rule operator algebra, short-time classical actions, and
time-sliced propagator experiments on one-dimensional grids."""

__version__ = "0.1.0"

from . import catalog, classical, exact, kernels, propagator, report  # noqa: F401
