"""Offline figure and table rendering for macpolar CSV reports."""

__version__ = "0.1.0"

from .render import FigureSpec, render_region, render_table
