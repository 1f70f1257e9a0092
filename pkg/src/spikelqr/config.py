"""Experiment configuration: JSON schema, validation, shipped profiles.

Configs are flat JSON documents with a versioned ``schema`` key. Validation
is strict: unknown keys are rejected with their path, and every range is
checked before a run starts. Q is given by semantic entries (position,
angle, velocity, angular velocity) so multi-link plants share one rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from spikelqr import control as ctl
from spikelqr import dynamics as dyn
from spikelqr import lif, lqr, nef

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Schema or range violation, carrying the offending field path."""


def _require(mapping, key, path, kind):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: missing required field")
    value = mapping[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if not isinstance(value, kind):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _optional(mapping, key, path, kind, default):
    if key not in mapping or mapping[key] is None:
        return default
    return _require(mapping, key, path, kind)


def _reject_unknown(mapping, allowed, path):
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown key")


def _positive(value, path):
    if value <= 0:
        raise ConfigError(f"{path}: must be > 0, got {value}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    plant: dyn.SystemParams
    controller: ctl.ControllerConfig
    x0: np.ndarray
    duration: float
    dt: float
    seeds: tuple[int, ...]
    out_dir: str | None
    raw: dict = field(repr=False, default_factory=dict)


def _parse_plant(d, path="plant"):
    _reject_unknown(d, {"n_links", "cart_mass", "link_masses", "link_lengths", "gravity"}, path)
    n = _require(d, "n_links", path, int)
    if n < 1:
        raise ConfigError(f"{path}.n_links: must be >= 1")
    masses = _require(d, "link_masses", path, list)
    lengths = _require(d, "link_lengths", path, list)
    if len(masses) != n or len(lengths) != n:
        raise ConfigError(f"{path}.link_masses/link_lengths: need {n} entries")
    for i, m in enumerate(masses):
        if not isinstance(m, (int, float)) or m <= 0:
            raise ConfigError(f"{path}.link_masses[{i}]: must be > 0, got {m}")
    for i, l in enumerate(lengths):
        if not isinstance(l, (int, float)) or l <= 0:
            raise ConfigError(f"{path}.link_lengths[{i}]: must be > 0, got {l}")
    cart = _positive(_require(d, "cart_mass", path, float), f"{path}.cart_mass")
    gravity = _positive(_optional(d, "gravity", path, float, dyn.DEFAULT_GRAVITY), f"{path}.gravity")
    return dyn.SystemParams(n_links=n, cart_mass=cart,
                            link_masses=np.asarray(masses, dtype=float),
                            link_lengths=np.asarray(lengths, dtype=float),
                            gravity=gravity)


def _parse_weights(d, n_links, path="weights"):
    _reject_unknown(d, {"q_position", "q_angle", "q_velocity", "q_angular_velocity", "r"}, path)
    qx = _require(d, "q_position", path, float)
    qth = _require(d, "q_angle", path, float)
    qv = _require(d, "q_velocity", path, float)
    qw = _require(d, "q_angular_velocity", path, float)
    for name, v in (("q_position", qx), ("q_angle", qth),
                    ("q_velocity", qv), ("q_angular_velocity", qw)):
        if v < 0:
            raise ConfigError(f"{path}.{name}: must be >= 0, got {v}")
    r = _positive(_require(d, "r", path, float), f"{path}.r")
    diag = np.concatenate(([qx], np.full(n_links, qth), [qv], np.full(n_links, qw)))
    return lqr.LqrWeights.from_diag(diag, r)


def _parse_intercepts(d, path):
    _reject_unknown(d, {"kind", "lo", "hi", "std"}, path)
    kind = _require(d, "kind", path, str)
    try:
        return nef.InterceptSpec(kind=kind,
                                 lo=_optional(d, "lo", path, float, -1.0),
                                 hi=_optional(d, "hi", path, float, 1.0),
                                 std=_optional(d, "std", path, float, 0.0))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_ensemble(d, path="controller.ensemble"):
    allowed = {"n_neurons", "intercepts", "max_rates", "tau_rc", "tau_ref",
               "synapse_tau", "seed"}
    _reject_unknown(d, allowed, path)
    rates = _optional(d, "max_rates", path, list, [200.0, 400.0])
    if len(rates) != 2:
        raise ConfigError(f"{path}.max_rates: expected [lo, hi]")
    intercepts = d.get("intercepts")
    try:
        return nef.EnsembleSpec(
            n_neurons=_require(d, "n_neurons", path, int),
            intercepts=_parse_intercepts(intercepts, f"{path}.intercepts")
            if intercepts is not None else nef.InterceptSpec(),
            max_rates=(float(rates[0]), float(rates[1])),
            tau_rc=_optional(d, "tau_rc", path, float, 0.02),
            tau_ref=_optional(d, "tau_ref", path, float, 0.002),
            synapse_tau=_optional(d, "synapse_tau", path, float, 0.005),
            seed=_optional(d, "seed", path, int, 0),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_neuron(d, path="controller.neuron"):
    allowed = {"c_mem", "g_leak", "v_leak", "v_th", "tau_syn", "refractory", "i_mag"}
    _reject_unknown(d, allowed, path)
    try:
        return lif.LifParams(
            c_mem=_optional(d, "c_mem", path, float, 1.0),
            g_leak=_optional(d, "g_leak", path, float, 0.01),
            v_leak=_optional(d, "v_leak", path, float, 0.0),
            v_th=_optional(d, "v_th", path, float, 1.0),
            tau_syn=_optional(d, "tau_syn", path, float, 0.005),
            refractory=_optional(d, "refractory", path, float, 0.0),
            i_mag=_optional(d, "i_mag", path, float, 1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_controller(d, weights, path="controller"):
    allowed = {"kind", "control_period", "radius_factor", "ensemble", "pid",
               "smc", "encode_scale", "decode_window", "dendrites", "lui_mode",
               "neuron", "neuron_dt"}
    _reject_unknown(d, allowed, path)
    kind = _require(d, "kind", path, str)
    if kind not in ctl.CONTROLLER_KINDS:
        raise ConfigError(f"{path}.kind: unknown controller {kind!r}")
    pid = None
    if "pid" in d and d["pid"] is not None:
        _reject_unknown(d["pid"], {"kp", "ki", "kd"}, f"{path}.pid")
        pid = ctl.PidParams(kp=_require(d["pid"], "kp", f"{path}.pid", float),
                            ki=_optional(d["pid"], "ki", f"{path}.pid", float, 0.0),
                            kd=_optional(d["pid"], "kd", f"{path}.pid", float, 0.0))
    smc = None
    if "smc" in d and d["smc"] is not None:
        _reject_unknown(d["smc"], {"c", "k", "phi"}, f"{path}.smc")
        try:
            smc = ctl.SmcParams(c=_optional(d["smc"], "c", f"{path}.smc", float, 5.0),
                                k=_optional(d["smc"], "k", f"{path}.smc", float, 45.0),
                                phi=_optional(d["smc"], "phi", f"{path}.smc", float, 0.05))
        except ValueError as exc:
            raise ConfigError(f"{path}.smc: {exc}") from exc
    ensemble = None
    if "ensemble" in d and d["ensemble"] is not None:
        ensemble = _parse_ensemble(d["ensemble"])
    neuron = _parse_neuron(d.get("neuron") or {})
    try:
        return ctl.ControllerConfig(
            kind=kind,
            weights=weights,
            pid=pid,
            smc=smc,
            ensemble=ensemble,
            control_period=_optional(d, "control_period", path, float, None),
            radius_factor=_optional(d, "radius_factor", path, float, 2.0),
            encode_scale=_positive(_optional(d, "encode_scale", path, float, 1e4),
                                   f"{path}.encode_scale"),
            decode_window=_positive(_optional(d, "decode_window", path, float, 0.5),
                                    f"{path}.decode_window"),
            dendrites=_optional(d, "dendrites", path, int, None),
            lui_mode=_optional(d, "lui_mode", path, bool, False),
            neuron=neuron,
            neuron_dt=_positive(_optional(d, "neuron_dt", path, float, 1e-5),
                                f"{path}.neuron_dt"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config_dict(doc: dict, name_hint: str = "config") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: document must be a JSON object")
    allowed = {"schema", "name", "plant", "weights", "controller",
               "initial_angles", "initial_state", "duration", "dt", "seeds",
               "out_dir"}
    _reject_unknown(doc, allowed, "config")
    schema = _require(doc, "schema", "config", int)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"config.schema: unsupported version {schema}")
    name = _optional(doc, "name", "config", str, name_hint)
    plant = _parse_plant(_require(doc, "plant", "config", dict))
    weights = None
    if "weights" in doc and doc["weights"] is not None:
        weights = _parse_weights(doc["weights"], plant.n_links)
    controller = _parse_controller(_require(doc, "controller", "config", dict), weights)

    if "initial_state" in doc and doc["initial_state"] is not None:
        x0 = np.asarray(_require(doc, "initial_state", "config", list), dtype=float)
        if x0.shape != (plant.state_dim,):
            raise ConfigError(f"config.initial_state: expected {plant.state_dim} entries")
    else:
        angles = _require(doc, "initial_angles", "config", list)
        if len(angles) != plant.n_links:
            raise ConfigError(f"config.initial_angles: expected {plant.n_links} entries")
        x0 = dyn.upright_state(plant, [float(a) for a in angles])
    if not np.all(np.isfinite(x0)):
        raise ConfigError("config.initial_state: entries must be finite")

    duration = _positive(_require(doc, "duration", "config", float), "config.duration")
    dt = _positive(_require(doc, "dt", "config", float), "config.dt")
    seeds = _optional(doc, "seeds", "config", list, [0, 1, 2, 3, 4])
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("config.seeds: expected a non-empty list of integers")
    out_dir = _optional(doc, "out_dir", "config", str, None)
    return ExperimentConfig(name=name, plant=plant, controller=controller,
                            x0=x0, duration=duration, dt=dt,
                            seeds=tuple(seeds), out_dir=out_dir, raw=doc)


def parse_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a config file; profile names resolve to shipped files."""
    path = Path(resolve_profile(str(path)))
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config_dict(doc, name_hint=path.stem)


def resolved_dict(config: ExperimentConfig) -> dict:
    """Fully resolved config (defaults applied) that reproduces the run."""
    c = config.controller
    doc = {
        "schema": SCHEMA_VERSION,
        "name": config.name,
        "plant": {
            "n_links": config.plant.n_links,
            "cart_mass": config.plant.cart_mass,
            "link_masses": list(config.plant.link_masses),
            "link_lengths": list(config.plant.link_lengths),
            "gravity": config.plant.gravity,
        },
        "controller": {
            "kind": c.kind,
            "control_period": c.control_period if c.control_period is not None else config.dt,
            "radius_factor": c.radius_factor,
        },
        "initial_state": list(config.x0),
        "duration": config.duration,
        "dt": config.dt,
        "seeds": list(config.seeds),
        "out_dir": config.out_dir,
    }
    if c.weights is not None:
        n = config.plant.n_links
        diag = np.diag(c.weights.Q)
        doc["weights"] = {
            "q_position": float(diag[0]),
            "q_angle": float(diag[1]),
            "q_velocity": float(diag[n + 1]),
            "q_angular_velocity": float(diag[n + 2]),
            "r": c.weights.R,
        }
    if c.pid is not None:
        doc["controller"]["pid"] = {"kp": c.pid.kp, "ki": c.pid.ki, "kd": c.pid.kd}
    if c.smc is not None:
        doc["controller"]["smc"] = {"c": c.smc.c, "k": c.smc.k, "phi": c.smc.phi}
    if c.ensemble is not None:
        i = c.ensemble.intercepts
        doc["controller"]["ensemble"] = {
            "n_neurons": c.ensemble.n_neurons,
            "intercepts": {"kind": i.kind, "lo": i.lo, "hi": i.hi, "std": i.std},
            "max_rates": list(c.ensemble.max_rates),
            "tau_rc": c.ensemble.tau_rc,
            "tau_ref": c.ensemble.tau_ref,
            "synapse_tau": c.ensemble.synapse_tau,
            "seed": c.ensemble.seed,
        }
    if c.kind == "spiking-lqr-2":
        doc["controller"].update({
            "encode_scale": c.encode_scale,
            "decode_window": c.decode_window,
            "dendrites": c.dendrites,
            "lui_mode": c.lui_mode,
            "neuron_dt": c.neuron_dt,
            "neuron": {
                "c_mem": c.neuron.c_mem, "g_leak": c.neuron.g_leak,
                "v_leak": c.neuron.v_leak, "v_th": c.neuron.v_th,
                "tau_syn": c.neuron.tau_syn, "refractory": c.neuron.refractory,
                "i_mag": c.neuron.i_mag,
            },
        })
    return doc


def profile_names() -> list[str]:
    files = resources.files("spikelqr").joinpath("profiles")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def resolve_profile(name: str) -> str:
    """Map a shipped profile name to its file path; pass paths through."""
    if name.endswith(".json") or "/" in name or Path(name).exists():
        return name
    candidate = resources.files("spikelqr").joinpath("profiles", f"{name}.json")
    if candidate.is_file():
        return str(candidate)
    raise ConfigError(
        f"config: {name!r} is neither a file nor a shipped profile "
        f"(available: {', '.join(profile_names())})")
