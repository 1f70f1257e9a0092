"""Closed-loop harness: plants driven by spiking and non-spiking controllers.

Controller commands are held constant between updates (zero-order hold)
while the plant integrates at its own step. Spiking controllers record the
spike raster alongside the trace. A run aborts with a ``pole_fell`` outcome
as soon as any link leaves the +/- pi/2 half-plane.

Sign conventions: the state-feedback law is u = -K x with the gain rows
produced by :func:`spikelqr.lqr.lqr_gain`; PID and SMC regulate the first
link angle, with their classical formulas wired so positive angular
deviation produces a positive (rightward) force on the cart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from spikelqr import dynamics as dyn
from spikelqr import lif, lqr, nef

CONTROLLER_KINDS = ("spiking-lqr-2", "spiking-lqr-ensemble", "spiking-pid",
                    "lqr", "pid", "smc")
SPIKING_KINDS = ("spiking-lqr-2", "spiking-lqr-ensemble", "spiking-pid")


@dataclass(frozen=True)
class PidParams:
    kp: float
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.kp, self.ki, self.kd)):
            raise ValueError("PID gains must be finite")


@dataclass(frozen=True)
class SmcParams:
    """Sliding surface slope c, switching gain k, and boundary layer phi."""

    c: float = 5.0
    k: float = 45.0
    phi: float = 0.05

    def __post_init__(self):
        if self.c <= 0 or self.k <= 0 or self.phi <= 0:
            raise ValueError("SMC parameters must be > 0")


@dataclass(frozen=True)
class ControllerConfig:
    kind: str
    weights: lqr.LqrWeights | None = None
    pid: PidParams | None = None
    smc: SmcParams | None = None
    ensemble: nef.EnsembleSpec | None = None
    control_period: float | None = None
    radius_factor: float = 2.0
    encode_scale: float = 1e4
    decode_window: float = 0.5
    dendrites: int | None = None
    lui_mode: bool = False
    neuron: lif.LifParams = field(default_factory=lambda: lif.LifParams(g_leak=0.01, tau_syn=0.005))
    neuron_dt: float = 1e-5

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ValueError(f"kind must be one of {CONTROLLER_KINDS}")
        if self.kind in ("lqr", "spiking-lqr-2", "spiking-lqr-ensemble") and self.weights is None:
            raise ValueError(f"{self.kind} requires LQR weights")
        if self.kind in ("pid", "spiking-pid") and self.pid is None:
            raise ValueError(f"{self.kind} requires PID parameters")
        if self.kind == "smc" and self.smc is None:
            raise ValueError("smc requires SMC parameters")
        if self.kind in ("spiking-lqr-ensemble", "spiking-pid") and self.ensemble is None:
            raise ValueError(f"{self.kind} requires an ensemble spec")
        if self.radius_factor <= 0:
            raise ValueError("radius_factor must be > 0")


@dataclass
class SimTrace:
    """Closed-loop time series plus the spike raster and run metadata."""

    dt: float
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    spike_times: np.ndarray
    spike_ids: np.ndarray
    n_neurons: int
    n_links: int
    outcome: str
    seed: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if not (len(self.times) == len(self.states) == len(self.controls)):
            raise ValueError("times, states and controls must have equal length")

    @property
    def duration(self) -> float:
        return len(self.times) * self.dt

    def angle(self, link: int = 0) -> np.ndarray:
        return self.states[:, 1 + link]

    def cart_position(self) -> np.ndarray:
        return self.states[:, 0]


def pid_control(pid: PidParams, error: float, error_integral: float,
                error_derivative: float, spiking: bool = False,
                ensemble_state: nef.EnsembleState | None = None,
                dt: float = 1e-3) -> float:
    """PID command v = Kp e + Ki int(e) + Kd de.

    Non-spiking returns v directly. The spiking path represents -v in the
    ensemble and negates the decode, the same sign convention as the
    state-feedback pathway.
    """
    v = pid.kp * error + pid.ki * error_integral + pid.kd * error_derivative
    if not spiking:
        return v
    if ensemble_state is None:
        raise ValueError("spiking PID needs an ensemble runtime state")
    _, decoded = ensemble_state.step(-v, dt)
    return -decoded


def smc_control(smc: SmcParams, error: float, error_rate: float) -> float:
    """Boundary-layer sliding mode: u = -k sat(s / phi), s = c e + de."""
    s = smc.c * error + error_rate
    return -smc.k * float(np.clip(s / smc.phi, -1.0, 1.0))


class LqrController:
    n_neurons = 0

    def __init__(self, K):
        self.K = np.asarray(K, dtype=float)
        self.spike_times: list[float] = []
        self.spike_ids: list[int] = []

    def update(self, t, state):
        return -float(self.K @ state)


class PidController:
    """Angle-loop PID; the error is the first link's deviation from upright."""

    def __init__(self, pid: PidParams, period: float, spiking: bool = False,
                 ensemble_state: nef.EnsembleState | None = None):
        self.pid = pid
        self.period = period
        self.spiking = spiking
        self.ensemble_state = ensemble_state
        self.n_neurons = len(ensemble_state.ensemble) if ensemble_state else 0
        self.integral = 0.0
        self.prev_error: float | None = None
        self.spike_times: list[float] = []
        self.spike_ids: list[int] = []

    def update(self, t, state):
        error = float(state[1])
        if self.prev_error is None:
            derivative = 0.0
        else:
            derivative = (error - self.prev_error) / self.period
            self.integral += 0.5 * (error + self.prev_error) * self.period
        self.prev_error = error
        if not self.spiking:
            return pid_control(self.pid, error, self.integral, derivative)
        v = pid_control(self.pid, error, self.integral, derivative)
        spiked, decoded = self.ensemble_state.step(-v, self.period)
        self._record(t, spiked)
        return -decoded

    def _record(self, t, spiked):
        ids = np.nonzero(spiked)[0]
        self.spike_times.extend([t] * len(ids))
        self.spike_ids.extend(int(i) for i in ids)


class SmcController:
    n_neurons = 0

    def __init__(self, smc: SmcParams):
        self.smc = smc
        self.spike_times: list[float] = []
        self.spike_ids: list[int] = []

    def update(self, t, state):
        # regulator error of the first link (e = -theta), so positive angle
        # saturates to a positive force
        return smc_control(self.smc, -float(state[1]), -float(state[1 + (len(state) // 2)]))


class EnsembleLqrController:
    """Represents the feedback command K.x in a population and negates it."""

    def __init__(self, K, ensemble_state: nef.EnsembleState, period: float):
        self.K = np.asarray(K, dtype=float)
        self.ensemble_state = ensemble_state
        self.period = period
        self.n_neurons = len(ensemble_state.ensemble)
        self.spike_times: list[float] = []
        self.spike_ids: list[int] = []

    def update(self, t, state):
        command = float(self.K @ state)
        spiked, decoded = self.ensemble_state.step(command, self.period)
        ids = np.nonzero(spiked)[0]
        self.spike_times.extend([t] * len(ids))
        self.spike_ids.extend(int(i) for i in ids)
        return -decoded


class TwoNeuronController:
    """Rate-coded controller emulating the board-in-the-loop protocol.

    Each plant-time decision freezes the state and counts output spikes over
    ``decode_window`` seconds of neuron time (the board runs in real time
    while the simulation holds), so the decode is fine-grained while the
    plant only experiences the control period. Neuron and synapse state
    persist across decisions. Raster times are compressed so each window
    maps onto its plant-time control period.
    """

    n_neurons = 2

    def __init__(self, K, config: ControllerConfig, period: float):
        self.K = np.asarray(K, dtype=float)
        self.config = config
        self.period = period
        self.carry = lif.TwoNeuronCarry(config.neuron)
        self.spike_times: list[float] = []
        self.spike_ids: list[int] = []

    def update(self, t, state):
        window = self.config.decode_window
        u, pos, neg, self.carry = lif._two_neuron_window(
            self.config.neuron, state, self.K, self.config.encode_scale,
            window, self.config.neuron_dt, self.config.dendrites,
            self.config.lui_mode, self.carry)
        squeeze = self.period / window
        for train in (pos, neg):
            self.spike_times.extend((t + squeeze * train.times).tolist())
            self.spike_ids.extend([train.neuron_id] * len(train))
        return u


def spiking_lqr_ensemble_control(K, ensemble_state: nef.EnsembleState,
                                 state, dt: float = 1e-3) -> float:
    """One decision of the population LQR pathway: u = -decode(K.x)."""
    command = float(np.asarray(K, dtype=float) @ np.asarray(state, dtype=float))
    _, decoded = ensemble_state.step(command, dt)
    return -decoded


def reference_command_peak(params: dyn.SystemParams, command_fn, x0,
                           duration: float, dt: float) -> float:
    """Largest |command| along the non-spiking closed loop from x0."""
    state = np.asarray(x0, dtype=float).copy()
    peak = 0.0
    for _ in range(round(duration / dt)):
        u = command_fn(state)
        peak = max(peak, abs(u))
        state = dyn.rk4_step(params, state, u, dt)
        if not np.all(np.isfinite(state)):
            break
    return peak


def _gain_for(config: ControllerConfig, model: dyn.LinearModel) -> np.ndarray:
    return lqr.lqr_gain(model, config.weights)


def build_controller(config: ControllerConfig, params: dyn.SystemParams,
                     x0, duration: float, dt: float, seed: int):
    """Instantiate the controller, calibrating the ensemble radius when needed.

    The represented range of a population controller is set from a
    non-spiking reference run: radius = radius_factor * max |command|.
    """
    period = config.control_period if config.control_period is not None else dt
    if period + 1e-12 < dt:
        raise ValueError("control period must be at least the plant dt")
    model = dyn.linearize(params)

    if config.kind == "lqr":
        return LqrController(_gain_for(config, model)), period
    if config.kind == "pid":
        return PidController(config.pid, period), period
    if config.kind == "smc":
        return SmcController(config.smc), period
    if config.kind == "spiking-lqr-2":
        return TwoNeuronController(_gain_for(config, model), config, period), period

    if config.kind == "spiking-lqr-ensemble":
        K = _gain_for(config, model)
        command = lambda s: -float(K @ s)
        peak = reference_command_peak(params, command, x0, duration, dt)
        radius = config.radius_factor * max(peak, 1e-9)
        spec = replace(config.ensemble, radius=radius, seed=seed)
        state = nef.EnsembleState(nef.build_ensemble(spec))
        return EnsembleLqrController(K, state, period), period

    # spiking-pid: calibrate against the non-spiking PID loop
    probe = PidController(config.pid, period)
    state_probe = np.asarray(x0, dtype=float).copy()
    peak = 0.0
    steps_per = max(1, round(period / dt))
    u = 0.0
    for step in range(round(duration / dt)):
        if step % steps_per == 0:
            u = probe.update(step * dt, state_probe)
            peak = max(peak, abs(u))
        state_probe = dyn.rk4_step(params, state_probe, u, dt)
        if not np.all(np.isfinite(state_probe)):
            break
    radius = config.radius_factor * max(peak, 1e-9)
    spec = replace(config.ensemble, radius=radius, seed=seed)
    ens_state = nef.EnsembleState(nef.build_ensemble(spec))
    return PidController(config.pid, period, spiking=True, ensemble_state=ens_state), period


def closed_loop_sim(params: dyn.SystemParams, config: ControllerConfig, x0,
                    duration: float, dt: float, seed: int = 0,
                    metadata: dict | None = None) -> SimTrace:
    """Simulate the closed loop; deterministic for a given config and seed.

    Aborts with outcome ``pole_fell`` (truncated trace) when any link angle
    magnitude exceeds pi/2.
    """
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be > 0")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (params.state_dim,):
        raise ValueError(f"x0 must have shape ({params.state_dim},)")

    controller, period = build_controller(config, params, x0, duration, dt, seed)
    steps_per_update = max(1, round(period / dt))
    n_steps = round(duration / dt)
    n = params.n_links

    states = np.empty((n_steps, params.state_dim))
    controls = np.empty(n_steps)
    state = x0.copy()
    u = 0.0
    outcome = "ok"
    recorded = n_steps
    for step in range(n_steps):
        if step % steps_per_update == 0:
            u = controller.update(step * dt, state)
        states[step] = state
        controls[step] = u
        state = dyn.rk4_step(params, state, u, dt)
        if np.max(np.abs(state[1:n + 1])) > np.pi / 2:
            outcome = "pole_fell"
            recorded = step + 1
            break

    times = np.arange(recorded) * dt
    return SimTrace(
        dt=dt,
        times=times,
        states=states[:recorded],
        controls=controls[:recorded],
        spike_times=np.asarray(controller.spike_times, dtype=float),
        spike_ids=np.asarray(controller.spike_ids, dtype=np.int64),
        n_neurons=controller.n_neurons,
        n_links=params.n_links,
        outcome=outcome,
        seed=seed,
        metadata=dict(metadata or {}),
    )
