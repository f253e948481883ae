"""Figure renderer for experiment metric CSVs and run manifests."""

from .figure import PlotSpec, build_figure, render
from .reader import RunData, SchemaError, load_runs, read_manifest, read_metrics

__version__ = "0.1.0"

__all__ = [
    "PlotSpec",
    "RunData",
    "SchemaError",
    "build_figure",
    "load_runs",
    "read_manifest",
    "read_metrics",
    "render",
]
