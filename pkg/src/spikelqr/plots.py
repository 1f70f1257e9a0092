"""Vector-graphics renderings of run and sweep artifacts.

Output is deterministic for identical inputs: the SVG hash salt is pinned
and date metadata is stripped.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "spikelqr"

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


class MissingArtifactError(FileNotFoundError):
    pass


def _load_trace(run_dir: Path):
    path = run_dir / "trace.csv"
    if not path.exists():
        raise MissingArtifactError(f"{path} not found")
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    return header, data


def _load_raster(run_dir: Path):
    path = run_dir / "raster.csv"
    if not path.exists():
        raise MissingArtifactError(f"{path} not found")
    with path.open() as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [(float(t), int(n)) for t, n in reader]
    if rows:
        times, ids = zip(*rows)
        return np.asarray(times), np.asarray(ids)
    return np.empty(0), np.empty(0, dtype=int)


def render_run_plots(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """States, control + raster, and phase portrait for one seed directory."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    header, data = _load_trace(run_dir)
    spike_t, spike_id = _load_raster(run_dir)
    t = data[:, 0]
    theta_cols = [i for i, h in enumerate(header) if h.startswith("theta_") and "dot" not in h]
    outputs = []

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for i in theta_cols:
        ax1.plot(t, data[:, i], label=header[i])
    ax1.set_ylabel("link angle (rad)")
    ax1.legend(loc="upper right", fontsize=8)
    ax2.plot(t, data[:, 1], color="tab:gray")
    ax2.set_ylabel("cart position (m)")
    ax2.set_xlabel("time (s)")
    fig.tight_layout()
    path = out_dir / "states.svg"
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    outputs.append(path)

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True,
                                   gridspec_kw={"height_ratios": [2, 1]})
    ax1.plot(t, data[:, -1], color="tab:red", lw=0.8)
    ax1.set_ylabel("control force (N)")
    if spike_t.size:
        ax2.scatter(spike_t, spike_id, s=0.3, marker="|", color="tab:blue")
    ax2.set_ylabel("neuron")
    ax2.set_xlabel("time (s)")
    fig.tight_layout()
    path = out_dir / "control_raster.svg"
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    outputs.append(path)

    fig, ax = plt.subplots(figsize=(5, 5))
    for i in theta_cols:
        ax.plot(data[:, 1], data[:, i], lw=0.8, label=header[i])
    ax.set_xlabel("cart position (m)")
    ax.set_ylabel("link angle (rad)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "phase.svg"
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    outputs.append(path)
    return outputs


def render_sweep_plots(sweep_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Metric-vs-value curves (log x) from an aggregated sweep report."""
    sweep_dir = Path(sweep_dir)
    out_dir = Path(out_dir) if out_dir is not None else sweep_dir
    path = sweep_dir / "sweep.json"
    if not path.exists():
        raise MissingArtifactError(f"{path} not found")
    rows = json.loads(path.read_text())
    values = []
    for row in rows:
        try:
            values.append(float(row["value"]))
        except ValueError:
            values.append(float(row["value"].split(":")[0]))
    panels = [("po_pct_mean", "peak overshoot (%)"),
              ("ts_s_mean", "settling time (s)"),
              ("iae_rad_s_mean", "IAE (rad s)"),
              ("isc_n2_s_mean", "ISC (N^2 s)")]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    for ax, (key, label) in zip(axes.ravel(), panels):
        ys = [row.get(key) for row in rows]
        ax.plot(values, [np.nan if y is None else y for y in ys], marker="o")
        if len(values) > 1 and min(values) > 0 and max(values) / min(values) > 20:
            ax.set_xscale("log", base=2)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel("swept value")
    fig.tight_layout()
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "sweep_metrics.svg"
    fig.savefig(out, **_SAVE_KW)
    plt.close(fig)
    return [out]


def render_plots(artifact_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Dispatch on the artifact set found in the directory."""
    artifact_dir = Path(artifact_dir)
    if (artifact_dir / "trace.csv").exists():
        return render_run_plots(artifact_dir, out_dir)
    if (artifact_dir / "sweep.json").exists():
        return render_sweep_plots(artifact_dir, out_dir)
    seed_dirs = sorted(artifact_dir.glob("seed*"))
    if seed_dirs:
        outputs = []
        for seed_dir in seed_dirs:
            outputs.extend(render_run_plots(seed_dir, None if out_dir is None
                                            else Path(out_dir) / seed_dir.name))
        return outputs
    raise MissingArtifactError(f"no trace.csv or sweep.json under {artifact_dir}")
