"""Leaky integrate-and-fire neurons, rate coding, and weighted-sum control.

Two rate-coded LIF neurons implement the state-feedback law u = -K x: state
magnitudes are encoded as regular spike trains, dendritic weights carry the
normalized gain entries, one neuron fires for positive commands and one for
negative, and the command is linearly decoded from the output frequency.
With the membrane time constant set very high, the output frequency of a
neuron approaches gain_k times the weighted sum of its input frequencies.

An analog single-neuron board with three inputs is emulated in ``lui`` mode:
the command sign is precomputed so one neuron can serve both pathways, and
at most three dendrites are allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from spikelqr import _engine


@dataclass(frozen=True)
class LifParams:
    """LIF constants. i_mag is the charge delivered per unit-weight spike."""

    c_mem: float = 1.0
    g_leak: float = 0.01
    v_leak: float = 0.0
    v_th: float = 1.0
    tau_syn: float = 0.02
    refractory: float = 0.0
    i_mag: float = 1.0
    v_floor: float | None = None

    def __post_init__(self):
        if self.c_mem <= 0:
            raise ValueError("c_mem must be > 0")
        if self.g_leak < 0 or self.tau_syn < 0 or self.refractory < 0:
            raise ValueError("g_leak, tau_syn and refractory must be >= 0")
        if self.v_th <= self.v_leak:
            raise ValueError("v_th must exceed v_leak")
        if self.v_floor is None:
            # analog boards saturate at the rail: default floor is the rest level
            object.__setattr__(self, "v_floor", self.v_leak)
        elif self.v_floor > self.v_leak:
            raise ValueError("v_floor must not exceed v_leak")

    @property
    def tau_mem(self) -> float:
        return self.c_mem / self.g_leak if self.g_leak > 0 else math.inf

    @property
    def gain_k(self) -> float:
        """Frequency gain of the weighted-sum law, i_mag / (v_th * c_mem)."""
        return self.i_mag / (self.v_th * self.c_mem)


@dataclass(frozen=True)
class LifState:
    """Membrane potential, synaptic current and refractory clock."""

    v_mem: float = 0.0
    i_syn: float = 0.0
    time_since_spike: float = math.inf


def lif_step(params: LifParams, state: LifState, input_current: float,
             dt: float) -> tuple[LifState, bool]:
    """One forward-Euler step of C dV/dt = -g_leak (V - V_leak) + I.

    Crossing v_th emits a spike and resets the membrane to v_leak; during the
    refractory hold the membrane stays at its reset level, and inhibitory
    drive cannot push it below v_floor.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if state.time_since_spike < params.refractory:
        return replace(state, time_since_spike=state.time_since_spike + dt), False
    v = state.v_mem + dt * (-params.g_leak * (state.v_mem - params.v_leak)
                            + input_current) / params.c_mem
    if v >= params.v_th:
        return LifState(v_mem=params.v_leak, i_syn=state.i_syn, time_since_spike=0.0), True
    return LifState(v_mem=max(v, params.v_floor), i_syn=state.i_syn,
                    time_since_spike=state.time_since_spike + dt), False


@dataclass(frozen=True)
class SpikeTrain:
    """Spike times of one neuron, strictly increasing seconds."""

    neuron_id: int
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.size and (np.any(np.diff(t) <= 0) or t[0] < 0):
            raise ValueError("spike times must be nonnegative and strictly increasing")

    def __len__(self) -> int:
        return int(self.times.size)


def rate_encode(value: float, scale: float, horizon: float, dt: float,
                neuron_id: int = 0) -> SpikeTrain:
    """Deterministic regular spike train at frequency value * scale.

    Spikes sit at multiples of the period, snapped to the dt grid; the grid
    caps the frequency at 1/dt (one spike per step), which models encoder
    saturation. A zero value gives an empty train.
    """
    if value < 0:
        raise ValueError("value must be >= 0 (sign handling is the caller's job)")
    if scale <= 0 or dt <= 0:
        raise ValueError("scale and dt must be > 0")
    freq = value * scale
    if freq <= 0 or horizon <= 0:
        return SpikeTrain(neuron_id, np.empty(0))
    freq = min(freq, 1.0 / dt)
    count = int(np.floor(horizon * freq + 1e-9))
    steps = np.unique(np.rint((np.arange(1, count + 1) / freq) / dt).astype(np.int64))
    times = steps * dt
    return SpikeTrain(neuron_id, times[times <= horizon + 1e-12])


def count_decode(train: SpikeTrain, window: float) -> float:
    """Spike count inside (0, window] divided by the window, in Hz."""
    if window <= 0:
        raise ValueError("window must be > 0")
    return float(np.count_nonzero(train.times <= window + 1e-12) / window)


def synaptic_current(params: LifParams, inputs: list[SpikeTrain],
                     weights, horizon: float, dt: float,
                     init: float = 0.0) -> np.ndarray:
    """Per-step synaptic current from weighted spike trains.

    Each spike deposits w * i_mag of charge, spread by the exponential
    synaptic kernel (or within a single step when tau_syn <= dt, the
    summing-junction limit). ``init`` resumes the kernel from a previous
    window's final current.
    """
    n_steps = int(round(horizon / dt))
    impulses = np.zeros(n_steps)
    for train, w in zip(inputs, weights):
        steps = np.rint(train.times / dt).astype(np.int64) - 1
        steps = steps[(steps >= 0) & (steps < n_steps)]
        np.add.at(impulses, steps, w * params.i_mag)
    if params.tau_syn <= dt:
        return impulses / dt
    alpha = math.exp(-dt / params.tau_syn)
    # gain (1-alpha)/dt makes each unit impulse integrate to unit charge
    return _engine.exp_filter(impulses, alpha, (1.0 - alpha) / dt, init)


def run_lif(params: LifParams, current: np.ndarray, dt: float,
            state: LifState | None = None) -> tuple[np.ndarray, LifState]:
    """Integrate a LIF neuron over a current array; returns spike times."""
    state = state or LifState(v_mem=params.v_leak)
    tsl = min(state.time_since_spike, 1e30)  # numba dislikes inf comparisons
    steps, v, tsl = _engine.lif_scan(
        np.asarray(current, dtype=float), params.g_leak, params.c_mem,
        params.v_leak, params.v_th, params.refractory, dt, state.v_mem, tsl,
        params.v_floor)
    return (steps + 1) * dt, LifState(v_mem=v, i_syn=0.0, time_since_spike=tsl)


def weighted_sum_neuron(params: LifParams, inputs: list[SpikeTrain], weights,
                        horizon: float, dt: float, lui_mode: bool = False,
                        neuron_id: int = 0) -> SpikeTrain:
    """Single LIF neuron computing a rate-coded weighted sum.

    In the high tau_mem regime the output frequency approaches
    gain_k * sum(w_i * f_i). ``lui_mode`` enforces the three-dendrite board
    constraint.
    """
    if len(inputs) != len(weights):
        raise ValueError("need one weight per input train")
    if lui_mode and len(inputs) > 3:
        raise ValueError("lui emulation allows at most 3 synaptic inputs")
    current = synaptic_current(params, inputs, weights, horizon, dt)
    times, _ = run_lif(params, current, dt)
    return SpikeTrain(neuron_id, times)


def _select_components(state: np.ndarray, K: np.ndarray, dendrites: int):
    # internal layout [x, theta.., xdot, thetadot..]; 3-dendrite mode drops x
    if dendrites == len(K):
        return np.asarray(state, dtype=float), np.asarray(K, dtype=float)
    if dendrites == len(K) - 1:
        return np.asarray(state[1:], dtype=float), np.asarray(K[1:], dtype=float)
    raise ValueError("dendrites must be len(K) or len(K) - 1 (cart position dropped)")


class TwoNeuronCarry:
    """Neuron and synapse state carried between control windows."""

    __slots__ = ("pos", "neg", "i_pos", "i_neg")

    def __init__(self, params: LifParams):
        self.pos = LifState(v_mem=params.v_leak)
        self.neg = LifState(v_mem=params.v_leak)
        self.i_pos = 0.0
        self.i_neg = 0.0


def _two_neuron_window(params, state, K, encode_scale, window, dt, dendrites,
                       lui_mode, carry):
    if window <= 0:
        raise ValueError("window must be > 0")
    K = np.asarray(K, dtype=float)
    dendrites = len(K) if dendrites is None else dendrites
    x_sel, k_sel = _select_components(state, K, dendrites)
    norm = np.max(np.abs(k_sel))
    if norm == 0:
        return 0.0, SpikeTrain(0, np.empty(0)), SpikeTrain(1, np.empty(0)), carry
    if lui_mode and len(k_sel) > 3:
        raise ValueError("lui emulation allows at most 3 synaptic inputs")
    trains = [rate_encode(abs(v), encode_scale, window, dt, neuron_id=i)
              for i, v in enumerate(x_sel)]
    signed = (k_sel / norm) * np.sign(x_sel)
    command = float(np.dot(k_sel, x_sel))
    decode = norm / (encode_scale * params.gain_k)

    if lui_mode:
        # single neuron: route all charge positively, reapply the sign after
        sign = 1.0 if command >= 0 else -1.0
        cur = synaptic_current(params, trains, sign * signed, window, dt, carry.i_pos)
        times, carry.pos = run_lif(params, cur, dt, carry.pos)
        carry.i_pos = float(cur[-1]) if cur.size else carry.i_pos
        u = -sign * (times.size / window) * decode
        return u, SpikeTrain(0, times), SpikeTrain(1, np.empty(0)), carry

    cur_pos = synaptic_current(params, trains, signed, window, dt, carry.i_pos)
    cur_neg = synaptic_current(params, trains, -signed, window, dt, carry.i_neg)
    t_pos, carry.pos = run_lif(params, cur_pos, dt, carry.pos)
    t_neg, carry.neg = run_lif(params, cur_neg, dt, carry.neg)
    if cur_pos.size:
        carry.i_pos = float(cur_pos[-1])
        carry.i_neg = float(cur_neg[-1])
    u = -((t_pos.size - t_neg.size) / window) * decode
    return u, SpikeTrain(0, t_pos), SpikeTrain(1, t_neg), carry


def two_neuron_step(params: LifParams, state: np.ndarray, K: np.ndarray,
                    encode_scale: float, window: float, dt: float = 1e-5,
                    dendrites: int | None = None, lui_mode: bool = False,
                    carry: TwoNeuronCarry | None = None):
    """One control decision of the rate-coded controller.

    Returns (u, positive-pathway SpikeTrain, negative-pathway SpikeTrain).
    Dendritic weights are the gain entries normalized to unit maximum; the
    decode multiplies the normalization back out, so u approximates -K x.
    In lui mode a single neuron serves both pathways with the command sign
    precomputed from the weighted sum. Passing a carry resumes neuron and
    synapse state from the previous window instead of starting at rest.
    """
    carry = carry if carry is not None else TwoNeuronCarry(params)
    u, pos, neg, _ = _two_neuron_window(params, state, K, encode_scale,
                                        window, dt, dendrites, lui_mode, carry)
    return u, pos, neg


def two_neuron_control(params: LifParams, state: np.ndarray, K: np.ndarray,
                       encode_scale: float, window: float, dt: float = 1e-5,
                       dendrites: int | None = None, lui_mode: bool = False) -> float:
    """Control force from the two-neuron (or lui single-neuron) pathway."""
    u, _, _ = two_neuron_step(params, state, K, encode_scale, window, dt,
                              dendrites=dendrites, lui_mode=lui_mode)
    return u
