"""Optional SVG overlays; needs matplotlib (``pip install artifact[plot]``)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "legpress"  # stable element ids
    return plt


def trial_overlay(path, result, encoder=None, plate=None) -> Path:
    """Displacement and force estimates over their measured counterparts."""
    plt = _pyplot()
    est = result.estimate
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    if encoder is not None:
        ax1.plot(encoder.timestamps, encoder.values, color="0.6", label="encoder")
    ax1.plot(est.displacement.timestamps, est.displacement.values, color="tab:red", label="camera")
    ax1.set_ylabel("displacement [m]")
    ax1.legend(loc="upper right")
    if plate is not None:
        ax2.plot(plate.timestamps, plate.values, color="0.6", label="force plate")
    ax2.plot(est.force.timestamps, est.force.values, color="tab:blue", label="camera")
    ax2.set_ylabel("force [N]")
    ax2.set_xlabel("time [s]")
    ax2.legend(loc="upper right")
    fig.suptitle(result.record.trial_id)
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def progress_plot(path, table) -> Path:
    """Normalised weekly values with their trend lines."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, trend in table.trends.items():
        vals = table.columns[name]
        ok = np.isfinite(vals)
        line = ax.plot(table.weeks[ok], vals[ok], "o", label=name)[0]
        if trend is not None:
            x = np.asarray(trend.sessions, dtype=float)
            ax.plot(x, trend.intercept + trend.slope * (x - x[0]), ":", color=line.get_color())
    ax.set_xlabel("week")
    ax.set_ylabel("normalised value")
    ax.legend(loc="lower right", fontsize="small")
    ax.set_title(table.subject_id)
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
