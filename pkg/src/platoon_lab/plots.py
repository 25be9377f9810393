"""Static SVG plot emission for simulation traces (optional extra).

Matplotlib is imported lazily so the rest of the package works without it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .domain import SimulationTrace


def _mpl():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_trace(trace: SimulationTrace, out_dir, stem: str = "trace") -> list[Path]:
    """Write speed, time-gap, SSTE, and SSSE panels as SVG files."""
    plt = _mpl()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t = trace.times
    written = []

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, trace.v[:, 0], "k--", lw=1.2, label="leader")
    for j in range(1, trace.v.shape[1]):
        ax.plot(t, trace.v[:, j], lw=0.9, label=f"truck {j}")
    ax.set_xlabel("Time (sec)")
    ax.set_ylabel("Speed (m/sec)")
    ax.legend(loc="lower right", fontsize=8, ncol=2)
    path = out_dir / f"{stem}_speed.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(8, 4))
    tg = trace.time_gaps()
    for j in range(tg.shape[1]):
        ax.plot(t, tg[:, j], lw=0.9, label=f"truck {j + 1}")
    ax.set_xlabel("Time (sec)")
    ax.set_ylabel("Time gap (sec)")
    ax.legend(loc="upper right", fontsize=8, ncol=2)
    path = out_dir / f"{stem}_time_gap.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    t_full = np.arange(len(trace.sste)) * trace.h
    for name, series, unit in (("sste", trace.sste, "SSTE (sec$^2$)"),
                               ("ssse", trace.ssse, "SSSE ((m/sec)$^2$)")):
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(t_full, series, lw=0.8)
        ax.set_xlabel("Time (sec)")
        ax.set_ylabel(unit)
        ax.set_yscale("symlog", linthresh=1e-6)
        path = out_dir / f"{stem}_{name}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
