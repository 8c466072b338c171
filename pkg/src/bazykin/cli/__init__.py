"""Command-line front end: scenario files in, CSV/SVG/JSON artifacts out."""

from .main import main, run_scenario

__all__ = ["main", "run_scenario"]
