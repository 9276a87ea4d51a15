"""Matplotlib figure rendering for study results and mesh layouts.

All functions write PNG (or whatever the path's suffix selects) to disk and
never open interactive windows; the Agg backend is forced before pyplot is
imported so headless runs work.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .meshes import Mesh
from .study import ConvergenceTable

__all__ = ["convergence_figure", "mesh_figure"]

_MARKERS = ("o", "s", "^", "d", "v", "x")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def convergence_figure(table: ConvergenceTable, path) -> Path:
    """Log-log energy error vs N, one panel per degree, one line per family.

    A dashed N^-p guide line anchored at each panel's first finite error
    shows the expected optimal order.
    """
    plt = _pyplot()
    degrees = list(table.config.degrees)
    fig, axes = plt.subplots(
        1, len(degrees), figsize=(4.0 * len(degrees), 3.4), squeeze=False, sharex=True
    )
    for ax, degree in zip(axes[0], degrees):
        anchor = None
        for marker, family in zip(_MARKERS, table.config.families):
            ns, errors = [], []
            for n in table.config.n_values:
                row = table.cell(family, degree, n)
                if row is not None and row.error is not None:
                    ns.append(n)
                    errors.append(row.error)
            if not ns:
                continue
            ax.loglog(ns, errors, marker=marker, ms=4, lw=1, label=family)
            if anchor is None:
                anchor = (ns[0], errors[0])
        if anchor is not None:
            ns = np.asarray(table.config.n_values, dtype=float)
            guide = anchor[1] * (anchor[0] / ns) ** degree
            ax.loglog(ns, guide, "k--", lw=0.8, label=f"$N^{{-{degree}}}$")
        ax.set_title(f"p = {degree}")
        ax.set_xlabel("N")
        ax.grid(True, which="both", alpha=0.3)
    axes[0][0].set_ylabel("energy-norm error")
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def mesh_figure(mesh: Mesh, path) -> Path:
    """Node distribution and cell widths of one mesh, with the transition marked."""
    plt = _pyplot()
    fig, (ax_nodes, ax_widths) = plt.subplots(
        2, 1, figsize=(7.0, 4.2), height_ratios=[1, 2]
    )
    ax_nodes.eventplot(mesh.nodes, orientation="horizontal", colors="C0", lw=0.6)
    ax_nodes.axvline(mesh.transition, color="C3", lw=1.0, ls="--")
    ax_nodes.set_xscale("symlog", linthresh=max(mesh.nodes[1], 1e-300))
    ax_nodes.set_yticks([])
    ax_nodes.set_xlabel("x (symlog)")
    ax_nodes.set_title(
        f"{mesh.family_label}: N = {mesh.n_cells}, "
        f"lambda = {mesh.transition:.3e}, {mesh.layer_cells} layer cells"
    )
    widths = mesh.cell_widths
    ax_widths.semilogy(np.arange(widths.size), widths, drawstyle="steps-mid", lw=1.0)
    ax_widths.axvline(mesh.layer_cells - 0.5, color="C3", lw=1.0, ls="--")
    ax_widths.set_xlabel("cell index")
    ax_widths.set_ylabel("cell width")
    ax_widths.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
