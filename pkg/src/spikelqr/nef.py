"""Population representation of a scalar value by spiking LIF neurons.

Follows the representation principle of neural engineering: each neuron sees
the represented value through a +1/-1 encoder, a gain and a bias chosen so
its steady-state tuning curve leaves zero at the intercept and reaches the
sampled maximum rate at the radius edge. A regularized least-squares decode
of the filtered spike trains reconstructs the value; precision grows with
the neuron count as the tuning curves tile the input range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INTERCEPT_KINDS = ("linspace", "normal", "uniform")


@dataclass(frozen=True)
class InterceptSpec:
    """How tuning-curve intercepts are drawn: evenly spaced in [lo, hi],
    normal around zero with the given std, or uniform in [lo, hi]."""

    kind: str = "uniform"
    lo: float = -1.0
    hi: float = 1.0
    std: float = 0.0

    def __post_init__(self):
        if self.kind not in INTERCEPT_KINDS:
            raise ValueError(f"kind must be one of {INTERCEPT_KINDS}")
        if self.kind != "normal" and not (-1.0 <= self.lo < self.hi <= 1.0):
            raise ValueError("intercept bounds must satisfy -1 <= lo < hi <= 1")
        if self.kind == "normal" and self.std < 0:
            raise ValueError("std must be >= 0")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "linspace":
            if n == 1:
                return np.array([0.5 * (self.lo + self.hi)])
            values = np.linspace(self.lo, self.hi, n)
        elif self.kind == "normal":
            values = rng.normal(0.0, self.std, n) if self.std > 0 else np.zeros(n)
        else:
            values = rng.uniform(self.lo, self.hi, n)
        return np.clip(values, -0.999, 0.999)


@dataclass(frozen=True)
class EnsembleSpec:
    n_neurons: int
    radius: float = 1.0
    intercepts: InterceptSpec = field(default_factory=InterceptSpec)
    max_rates: tuple[float, float] = (200.0, 400.0)
    tau_rc: float = 0.02
    tau_ref: float = 0.002
    synapse_tau: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if self.n_neurons < 1:
            raise ValueError("n_neurons must be >= 1")
        if self.radius <= 0:
            raise ValueError("radius must be > 0")
        lo, hi = self.max_rates
        if not (0 < lo <= hi):
            raise ValueError("max rate bounds must be positive and ordered")
        if hi >= 1.0 / self.tau_ref:
            raise ValueError("max rates must stay below the refractory ceiling 1/tau_ref")
        if self.tau_rc <= 0 or self.tau_ref <= 0 or self.synapse_tau <= 0:
            raise ValueError("time constants must be > 0")


@dataclass(frozen=True)
class NeuronTuning:
    """Per-neuron encoder sign, driving gain/bias, and tuning landmarks."""

    encoder: int
    gain: float
    bias: float
    intercept: float
    max_rate: float


@dataclass(frozen=True)
class DecoderSet:
    """Output weights (value units per Hz) and the identity-decode RMSE."""

    weights: np.ndarray
    rmse: float

    def __len__(self) -> int:
        return int(self.weights.size)


def _rate_from_current(J, tau_rc, tau_ref):
    J = np.asarray(J, dtype=float)
    out = np.zeros_like(J)
    # the guard keeps intercept currents that round to 1 +/- eps silent
    active = J > 1.0 + 1e-12
    with np.errstate(divide="ignore"):
        out[active] = 1.0 / (tau_ref - tau_rc * np.log1p(-1.0 / J[active]))
    return out


def _max_current(max_rate, tau_rc, tau_ref):
    # inverse of the steady-state rate equation at the radius edge
    return 1.0 / (1.0 - math.exp((tau_ref - 1.0 / max_rate) / tau_rc))


class Ensemble:
    """Built population: tuning list plus vectorized runtime arrays."""

    def __init__(self, spec: EnsembleSpec, tunings: list[NeuronTuning]):
        self.spec = spec
        self.tunings = tunings
        self.encoders = np.array([t.encoder for t in tunings], dtype=float)
        self.gains = np.array([t.gain for t in tunings])
        self.biases = np.array([t.bias for t in tunings])

    def __len__(self):
        return len(self.tunings)

    def __iter__(self):
        return iter(self.tunings)

    def __getitem__(self, i):
        return self.tunings[i]

    def rates(self, values) -> np.ndarray:
        """Steady-state rate matrix, one row per value, one column per neuron."""
        x = np.atleast_1d(np.asarray(values, dtype=float)) / self.spec.radius
        J = self.gains * (x[:, None] * self.encoders) + self.biases
        return _rate_from_current(J, self.spec.tau_rc, self.spec.tau_ref)


def build_ensemble(spec: EnsembleSpec) -> Ensemble:
    """Sample intercepts and max rates, alternate encoders, solve gain/bias.

    The gain/bias solve pins each tuning curve to leave zero exactly at the
    intercept and to hit the sampled max rate at the radius edge.
    """
    rng = np.random.default_rng(spec.seed)
    intercepts = spec.intercepts.sample(rng, spec.n_neurons)
    max_rates = rng.uniform(spec.max_rates[0], spec.max_rates[1], spec.n_neurons)
    tunings = []
    for i in range(spec.n_neurons):
        enc = 1 if i % 2 == 0 else -1
        c = float(intercepts[i])
        j_max = _max_current(max_rates[i], spec.tau_rc, spec.tau_ref)
        gain = (j_max - 1.0) / (1.0 - c)
        bias = 1.0 - gain * c
        tunings.append(NeuronTuning(encoder=enc, gain=gain, bias=bias,
                                    intercept=c, max_rate=float(max_rates[i])))
    return Ensemble(spec, tunings)


def rate_curve(tuning: NeuronTuning, tau_rc: float, tau_ref: float,
               x: float, radius: float = 1.0) -> float:
    """Steady-state firing rate of one neuron at represented value x."""
    J = tuning.gain * tuning.encoder * (x / radius) + tuning.bias
    return float(_rate_from_current(J, tau_rc, tau_ref))


def solve_decoders(ensemble: Ensemble, n_eval: int = 1000, reg: float = 0.1) -> DecoderSet:
    """Identity decoders by regularized least squares over the rate matrix.

    The ridge term is (reg * mean max rate)^2 * n_eval, which keeps weights
    bounded even for redundant tuning curves.
    """
    r = ensemble.spec.radius
    eval_points = np.linspace(-r, r, n_eval)
    a = ensemble.rates(eval_points)
    lam = (reg * np.mean([t.max_rate for t in ensemble.tunings])) ** 2 * n_eval
    gram = a.T @ a + lam * np.eye(len(ensemble))
    weights = np.linalg.solve(gram, a.T @ eval_points)
    rmse = float(np.sqrt(np.mean((a @ weights - eval_points) ** 2)))
    return DecoderSet(weights=weights, rmse=rmse)


def lowpass_filter(sample: float, state: float, tau: float, dt: float) -> float:
    """One step of the unit-DC-gain exponential filter y += dt/tau (x - y)."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    return state + (dt / tau) * (sample - state)


class EnsembleState:
    """Spiking runtime: normalized membranes, refractory clocks, output filter."""

    def __init__(self, ensemble: Ensemble, decoders: DecoderSet | None = None):
        self.ensemble = ensemble
        self.decoders = decoders if decoders is not None else solve_decoders(ensemble)
        n = len(ensemble)
        self.voltage = np.zeros(n)
        self.refractory = np.zeros(n)
        self.filtered = 0.0

    def step(self, input_value: float, dt: float):
        """Advance one step; returns (spiked bool array, decoded filtered output).

        Membrane integration is the exact exponential update with sub-step
        spike timing, so steady rates track the analytic tuning curves
        independently of dt.
        """
        ens = self.ensemble
        spec = ens.spec
        J = ens.gains * (ens.encoders * (input_value / spec.radius)) + ens.biases

        self.refractory -= dt
        active = np.clip(dt - self.refractory, 0.0, dt)
        self.voltage = J + (self.voltage - J) * np.exp(-active / spec.tau_rc)
        spiked = self.voltage > 1.0
        if np.any(spiked):
            j_s = J[spiked]
            v_s = self.voltage[spiked]
            # time elapsed since the threshold crossing within this step
            since = spec.tau_rc * np.log1p((v_s - 1.0) / (j_s - v_s))
            self.refractory[spiked] = spec.tau_ref + (dt - since)
            self.voltage[spiked] = 0.0
        self.voltage = np.maximum(self.voltage, 0.0)
        raw = float(self.decoders.weights[spiked].sum() / dt) if np.any(spiked) else 0.0
        self.filtered = lowpass_filter(raw, self.filtered, spec.synapse_tau, dt)
        return spiked, self.filtered


def ensemble_step(state: EnsembleState, input_value: float, dt: float):
    """Functional alias for :meth:`EnsembleState.step`."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    return state.step(input_value, dt)
