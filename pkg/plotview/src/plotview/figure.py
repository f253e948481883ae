"""Figure assembly: one subplot per metric panel, one line per run.

Rendering is read-only over its inputs and deterministic for fixed inputs:
a fixed style cycle, a fixed layout rule (2x2 for four panels, one row
otherwise), and image metadata stripped of anything environment-dependent.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reader import METRICS, X_AXES, RunData, load_runs

PANEL_TITLES = {
    "f_gap": "objective gap",
    "grad_norm": "gradient norm",
    "consensus": "consensus error",
    "ds": "distance to optimum",
}
X_LABELS = {
    "iteration": "iteration",
    "samples_cum": "samples consumed",
    "comm_rounds_cum": "communication rounds",
}
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_STYLES = ("-", "--", "-.", ":")


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: panels, the x quantity, which runs, and the y scale."""

    panels: tuple = ("f_gap", "grad_norm", "consensus", "ds")
    x_axis: str = "iteration"
    run_ids: tuple | None = None  # None -> every successful run in the manifest
    log_y: bool = True
    band_by_label: bool = True  # aggregate same-label runs into mean +/- std

    def __post_init__(self):
        if not self.panels:
            raise ValueError("panel list is empty; nothing to plot")
        unknown = [p for p in self.panels if p not in METRICS]
        if unknown:
            raise ValueError(f"unknown panels {unknown}; valid panels are {list(METRICS)}")
        if self.x_axis not in X_AXES:
            raise ValueError(f"unknown x axis {self.x_axis!r}; valid: {sorted(X_AXES)}")


def _grouped(runs: list[RunData], band: bool):
    """Yield (label, [runs]) preserving first-appearance order."""
    if not band:
        for run in runs:
            yield run.label if sum(r.label == run.label for r in runs) == 1 else run.run_id, [run]
        return
    order: list[str] = []
    groups: dict[str, list[RunData]] = {}
    for run in runs:
        if run.label not in groups:
            order.append(run.label)
            groups[run.label] = []
        groups[run.label].append(run)
    for label in order:
        yield label, groups[label]


def build_figure(manifest_path, spec: PlotSpec) -> plt.Figure:
    """Assemble the figure for a manifest without writing anything."""
    runs = load_runs(manifest_path, list(spec.run_ids) if spec.run_ids else None)

    n_panels = len(spec.panels)
    if n_panels == 4:
        n_rows, n_cols = 2, 2
    else:
        n_rows, n_cols = 1, n_panels
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(4.0 * n_cols, 3.2 * n_rows), squeeze=False
    )

    groups = list(_grouped(runs, spec.band_by_label))
    for idx, panel in enumerate(spec.panels):
        ax = axes[idx // n_cols][idx % n_cols]
        for g, (label, members) in enumerate(groups):
            color = _COLORS[g % len(_COLORS)]
            style = _STYLES[g % len(_STYLES)]
            x = members[0].x(spec.x_axis)
            if len(members) == 1:
                ax.plot(x, members[0].metric(panel), style, color=color, label=label, lw=1.5)
            else:
                stack = np.stack([m.metric(panel) for m in members])
                mean, std = stack.mean(axis=0), stack.std(axis=0)
                ax.plot(x, mean, style, color=color, label=f"{label} (n={len(members)})", lw=1.5)
                ax.fill_between(x, np.maximum(mean - std, 1e-300), mean + std,
                                color=color, alpha=0.2, linewidth=0)
        if spec.log_y:
            ax.set_yscale("log")
        ax.set_xlabel(X_LABELS[spec.x_axis])
        ax.set_title(PANEL_TITLES[panel])
        ax.grid(True, which="both", alpha=0.3)
        if idx == 0:
            ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render(manifest_path, spec: PlotSpec, out_path) -> Path:
    """Render a manifest to an image file (format chosen by extension).

    Output bytes are deterministic for fixed inputs: environment-dependent
    metadata (writer version, creation date) is stripped.
    """
    out_path = Path(out_path)
    fig = build_figure(manifest_path, spec)
    metadata = None
    suffix = out_path.suffix.lower()
    if suffix == ".png":
        metadata = {"Software": None}
    elif suffix == ".svg":
        metadata = {"Creator": None, "Date": None}
    try:
        fig.savefig(out_path, dpi=120, metadata=metadata)
    finally:
        plt.close(fig)
    return out_path
