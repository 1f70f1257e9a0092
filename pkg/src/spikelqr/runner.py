"""Experiment execution: single runs, parameter sweeps, controller comparison.

Artifacts are deterministic: numeric CSV fields are printed with 9
significant digits in a fixed column order, and every file is written
atomically (temp file + rename). Sweep cells run in a process pool; the
aggregation stays single-threaded.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from spikelqr import control as ctl
from spikelqr import dynamics as dyn
from spikelqr import metrics as met
from spikelqr.config import ExperimentConfig, parse_config_dict, resolved_dict

SWEEP_AXES = ("neurons", "intercepts", "max_rates", "ki")
COMPARE_KINDS = ("lqr", "pid", "smc", "spiking-lqr-ensemble", "spiking-pid")

METRIC_FIELDS = ("peak_overshoot", "rise_time", "settling_time",
                 "steady_state_error", "iae", "itae", "isc")


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.9g" % value


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def trace_csv(trace: ctl.SimTrace) -> str:
    n = trace.n_links
    header = (["t", "x", "xdot"]
              + [f"theta_{i + 1}" for i in range(n)]
              + [f"thetadot_{i + 1}" for i in range(n)]
              + ["u"])
    lines = [",".join(header)]
    order = dyn.report_order_indices(n)
    for i in range(len(trace.times)):
        row = [trace.times[i], *trace.states[i][order], trace.controls[i]]
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def raster_csv(trace: ctl.SimTrace) -> str:
    lines = ["t,neuron_id"]
    for t, nid in zip(trace.spike_times, trace.spike_ids):
        lines.append(f"{_fmt(t)},{int(nid)}")
    return "\n".join(lines) + "\n"


def trace_report(trace: ctl.SimTrace, runtime: dict | None = None) -> dict:
    """Per-channel control metrics plus neuromorphic figures for one trace."""
    report = {
        "outcome": trace.outcome,
        "seed": trace.seed,
        "duration_s": trace.duration,
        "channels": {},
    }
    for link in range(trace.n_links):
        m = met.control_metrics(trace, channel=1 + link)
        report["channels"][f"theta_{link + 1}"] = m.as_dict()
    if trace.n_neurons > 0:
        report["neuromorphic"] = met.neuromorphic_metrics(trace).as_dict()
        report["control_noise_std_n"] = met.control_noise_std(trace)
    if runtime:
        report["runtime"] = runtime
    return report


def run(config: ExperimentConfig, out_dir: str | Path, seeds=None) -> dict:
    """Execute the experiment once per seed, writing one artifact set each.

    Returns the summary dict (also written as runs.json). Any seed ending in
    ``pole_fell`` marks the whole run as failed.
    """
    out = Path(out_dir)
    seeds = list(seeds) if seeds is not None else list(config.seeds)
    atomic_write(out / "resolved_config.json",
                 json.dumps(resolved_dict(config), indent=2, sort_keys=True) + "\n")
    summary = {"name": config.name, "seeds": {}, "failed": False}
    for seed in seeds:
        with met.RuntimeInstrumentation() as instr:
            trace = ctl.closed_loop_sim(config.plant, config.controller,
                                        config.x0, config.duration, config.dt,
                                        seed=seed)
        seed_dir = out / f"seed{seed}"
        atomic_write(seed_dir / "trace.csv", trace_csv(trace))
        atomic_write(seed_dir / "raster.csv", raster_csv(trace))
        report = trace_report(trace, instr.report(trace.duration))
        atomic_write(seed_dir / "metrics.json",
                     json.dumps(report, indent=2, sort_keys=True) + "\n")
        summary["seeds"][str(seed)] = {"outcome": trace.outcome,
                                       "dir": str(seed_dir)}
        if trace.outcome != "ok":
            summary["failed"] = True
    atomic_write(out / "runs.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def apply_axis(config: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    """New config with one swept parameter replaced."""
    c = config.controller
    if axis == "neurons":
        if c.ensemble is None:
            raise ValueError("neurons axis needs an ensemble controller")
        controller = replace(c, ensemble=replace(c.ensemble, n_neurons=int(value)))
    elif axis == "intercepts":
        if c.ensemble is None:
            raise ValueError("intercepts axis needs an ensemble controller")
        kind = c.ensemble.intercepts.kind
        if kind == "normal":
            spec = replace(c.ensemble.intercepts, std=float(value))
        else:
            spec = replace(c.ensemble.intercepts, lo=-float(value), hi=float(value))
        controller = replace(c, ensemble=replace(c.ensemble, intercepts=spec))
    elif axis == "max_rates":
        if c.ensemble is None:
            raise ValueError("max_rates axis needs an ensemble controller")
        lo, hi = value
        controller = replace(c, ensemble=replace(c.ensemble, max_rates=(float(lo), float(hi))))
    elif axis == "ki":
        if c.pid is None:
            raise ValueError("ki axis needs a PID controller")
        controller = replace(c, pid=replace(c.pid, ki=float(value)))
    else:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    return replace(config, controller=controller)


def parse_axis_values(axis: str, text: str):
    """Parse --values: comma-separated floats/ints, 'lo:hi' pairs for rates."""
    items = [v.strip() for v in text.split(",") if v.strip()]
    if not items:
        raise ValueError("no sweep values given")
    if axis == "neurons":
        return [int(v) for v in items]
    if axis == "max_rates":
        out = []
        for item in items:
            lo, _, hi = item.partition(":")
            if not hi:
                raise ValueError(f"max_rates value {item!r} must look like lo:hi")
            out.append((float(lo), float(hi)))
        return out
    return [float(v) for v in items]


def _value_label(axis, value):
    if axis == "max_rates":
        return f"{_fmt(value[0])}:{_fmt(value[1])}"
    return _fmt(value)


def _sweep_cell(raw_config: dict, axis: str, value, seed: int) -> dict:
    """One (value, seed) run; executed in a worker process."""
    config = apply_axis(parse_config_dict(raw_config), axis, value)
    trace = ctl.closed_loop_sim(config.plant, config.controller, config.x0,
                                config.duration, config.dt, seed=seed)
    cell = {"value": _value_label(axis, value), "seed": seed,
            "outcome": trace.outcome}
    if trace.outcome == "ok":
        m = met.control_metrics(trace, channel=1)
        cell["control"] = m.as_dict()
        cell["metrics"] = {f: getattr(m, f) for f in METRIC_FIELDS}
        if trace.n_neurons > 0:
            cell["neuromorphic"] = met.neuromorphic_metrics(trace).as_dict()
            cell["control_noise_std_n"] = met.control_noise_std(trace)
    return cell


SWEEP_COLUMNS = (["value", "n_seeds", "n_failed"]
                 + [f"{name}_{stat}" for name in
                    ("po_pct", "tr_s", "ts_s", "sse_rad", "iae_rad_s",
                     "itae_rad_s2", "isc_n2_s", "noise_std_n")
                    for stat in ("mean", "std")]
                 + ["spikes_per_neuron", "core_utilization_pct", "n_cores",
                    "area_theoretical_mm2", "area_experimental_mm2",
                    "energy_loihi_uj_per_inf"])

_CELL_KEYS = ("peak_overshoot", "rise_time", "settling_time",
              "steady_state_error", "iae", "itae", "isc")


def aggregate_cells(cells: list[dict]) -> dict:
    """Seed-mean/std row from one sweep value's cells."""
    ok = [c for c in cells if c["outcome"] == "ok"]
    row = {"value": cells[0]["value"], "n_seeds": len(cells),
           "n_failed": len(cells) - len(ok)}
    for key, col in zip(_CELL_KEYS, ("po_pct", "tr_s", "ts_s", "sse_rad",
                                     "iae_rad_s", "itae_rad_s2", "isc_n2_s")):
        vals = [c["metrics"][key] for c in ok
                if c.get("metrics", {}).get(key) is not None]
        row[f"{col}_mean"] = float(np.mean(vals)) if vals else None
        row[f"{col}_std"] = float(np.std(vals)) if vals else None
    noise = [c["control_noise_std_n"] for c in ok if "control_noise_std_n" in c]
    row["noise_std_n_mean"] = float(np.mean(noise)) if noise else None
    row["noise_std_n_std"] = float(np.std(noise)) if noise else None
    neuro = [c["neuromorphic"] for c in ok if "neuromorphic" in c]
    for key, col in (("spikes_per_neuron", "spikes_per_neuron"),
                     ("core_utilization_pct", "core_utilization_pct"),
                     ("n_cores", "n_cores"),
                     ("area_theoretical_mm2", "area_theoretical_mm2"),
                     ("area_experimental_mm2", "area_experimental_mm2"),
                     ("energy_loihi_uj_per_inf", "energy_loihi_uj_per_inf")):
        vals = [n[key] for n in neuro]
        row[col] = float(np.mean(vals)) if vals else None
    return row


def sweep(config: ExperimentConfig, axis: str, values, out_dir: str | Path,
          seeds=None, workers: int = 1) -> list[dict]:
    """Run each sweep value across the seed list and aggregate per value.

    Per-cell failures are recorded in the row (n_failed) and the sweep
    continues. Returns the aggregated rows, also written to sweep.csv.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    out = Path(out_dir)
    seeds = list(seeds) if seeds is not None else list(config.seeds)
    raw = resolved_dict(config)
    atomic_write(out / "resolved_config.json",
                 json.dumps(raw, indent=2, sort_keys=True) + "\n")

    jobs = [(value, seed) for value in values for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, [raw] * len(jobs),
                                    [axis] * len(jobs),
                                    [v for v, _ in jobs],
                                    [s for _, s in jobs]))
    else:
        results = [_sweep_cell(raw, axis, v, s) for v, s in jobs]

    for cell in results:
        cell_path = out / "cells" / f"{axis}_{cell['value']}_seed{cell['seed']}.json"
        atomic_write(cell_path, json.dumps(cell, indent=2, sort_keys=True) + "\n")

    rows = []
    for value in values:
        label = _value_label(axis, value)
        rows.append(aggregate_cells([c for c in results if c["value"] == label]))
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) if col != "value" else str(row["value"])
                              for col in SWEEP_COLUMNS))
    atomic_write(out / "sweep.csv", "\n".join(lines) + "\n")
    atomic_write(out / "sweep.json", json.dumps(rows, indent=2, sort_keys=True) + "\n")
    return rows


def compare(config: ExperimentConfig, out_dir: str | Path, seeds=None) -> list[dict]:
    """Controller-comparison table on the configured plant.

    Deterministic controllers run once; spiking controllers are averaged
    over the seed list. PID gains default to the angle entries of the LQR
    gain so the comparison is apples-to-apples.
    """
    out = Path(out_dir)
    seeds = list(seeds) if seeds is not None else list(config.seeds)
    base = config.controller
    if base.weights is None:
        raise ValueError("compare needs LQR weights in the base config")
    model = dyn.linearize(config.plant)
    from spikelqr import lqr as _lqr
    K = _lqr.lqr_gain(model, base.weights)
    n = config.plant.n_links
    pid = base.pid if base.pid is not None else ctl.PidParams(
        kp=-K[1], ki=0.0, kd=-K[n + 2])  # angle and angular-velocity entries
    smc = base.smc if base.smc is not None else ctl.SmcParams()
    ensemble = base.ensemble
    if ensemble is None:
        from spikelqr import nef as _nef
        ensemble = _nef.EnsembleSpec(n_neurons=100)

    rows = []
    for kind in COMPARE_KINDS:
        cfg = ctl.ControllerConfig(kind=kind, weights=base.weights, pid=pid,
                                   smc=smc, ensemble=ensemble,
                                   control_period=base.control_period,
                                   radius_factor=base.radius_factor)
        kind_seeds = seeds if kind.startswith("spiking") else [seeds[0]]
        cells = []
        for seed in kind_seeds:
            trace = ctl.closed_loop_sim(config.plant, cfg, config.x0,
                                        config.duration, config.dt, seed=seed)
            cell = {"outcome": trace.outcome}
            if trace.outcome == "ok":
                m = met.control_metrics(trace, channel=1)
                cell["metrics"] = {f: getattr(m, f) for f in METRIC_FIELDS}
            cells.append(cell)
        ok = [c for c in cells if c["outcome"] == "ok"]
        row = {"controller": kind, "n_failed": len(cells) - len(ok)}
        for f in METRIC_FIELDS:
            vals = [c["metrics"][f] for c in ok if c["metrics"][f] is not None]
            row[f] = float(np.mean(vals)) if vals else None
        rows.append(row)

    cols = ["controller", "n_failed", *METRIC_FIELDS]
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(str(row["controller"]) if c == "controller"
                              else _fmt(row.get(c)) for c in cols))
    atomic_write(out / "compare.csv", "\n".join(lines) + "\n")
    atomic_write(out / "compare.json", json.dumps(rows, indent=2, sort_keys=True) + "\n")
    return rows
