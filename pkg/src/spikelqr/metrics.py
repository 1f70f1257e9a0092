"""Control KPIs, neuromorphic resource KPIs, and runtime instrumentation.

Control metrics are computed on the normalized recovery of a regulation
trace: the steady value is estimated as the mean of the final tenth of the
signal, and rise/overshoot/settling are measured relative to the initial
deviation from it. Neuromorphic metrics follow published per-chip constants
(neuron density, core capacity, per-op energies) and are purely analytic.
"""

from __future__ import annotations

import math
import resource
import time
from dataclasses import dataclass

import numpy as np

_trapezoid = getattr(np, "trapezoid", np.trapz)


@dataclass(frozen=True)
class HardwareConstants:
    """Neuromorphic chip constants; energies in pJ, areas in mm^2."""

    neuron_density: float = 2184.0
    neurons_per_core: int = 1024
    area_per_core: float = 0.41
    e_synop_pj: float = 23.6
    e_neuron_update_pj: float = 81.0
    cpu_tdp_w: float = 95.0

    def __post_init__(self):
        if min(self.neuron_density, self.neurons_per_core, self.area_per_core,
               self.e_synop_pj, self.e_neuron_update_pj, self.cpu_tdp_w) <= 0:
            raise ValueError("hardware constants must be > 0")


@dataclass(frozen=True)
class ControlMetrics:
    """Transient and steady-state figures for one output channel.

    rise_time and settling_time are None when the trace is degenerate
    (no initial deviation); ``settled`` is False when the signal is still
    outside the band at the end, in which case settling_time equals the
    trace duration.
    """

    rise_time: float | None
    peak_overshoot: float | None
    settling_time: float | None
    steady_state_error: float
    iae: float
    itae: float
    isc: float
    settled: bool
    final_value: float

    def as_dict(self) -> dict:
        return {
            "rise_time_s": self.rise_time,
            "peak_overshoot_pct": self.peak_overshoot,
            "settling_time_s": self.settling_time,
            "sse_rad": self.steady_state_error,
            "iae_rad_s": self.iae,
            "itae_rad_s2": self.itae,
            "isc_n2_s": self.isc,
            "settled": self.settled,
        }


@dataclass(frozen=True)
class NeuromorphicMetrics:
    spikes_per_neuron: float
    core_utilization_pct: float
    n_cores: int
    area_experimental_mm2: float
    area_theoretical_mm2: float
    energy_loihi_uj_per_inf: float

    def as_dict(self) -> dict:
        return {
            "spikes_per_neuron": self.spikes_per_neuron,
            "core_utilization_pct": self.core_utilization_pct,
            "n_cores": self.n_cores,
            "area_experimental_mm2": self.area_experimental_mm2,
            "area_theoretical_mm2": self.area_theoretical_mm2,
            "energy_loihi_uj_per_inf": self.energy_loihi_uj_per_inf,
        }


def control_metrics(trace, channel: int, band: float = 0.05,
                    reference: float = 0.0) -> ControlMetrics:
    """KPIs of one state channel of a regulation trace.

    The steady value y_inf is the mean of the final 10% of the samples.
    Rise time spans the 10%-90% crossings of the normalized recovery,
    overshoot is the largest excursion past y_inf as a percentage of the
    initial deviation, and settling time is the last exit from the
    +/- band * |y0 - y_inf| tube.
    """
    y = np.asarray(trace.states)[:, channel]
    if y.size == 0:
        raise ValueError("trace is empty")
    t = np.asarray(trace.times)
    u = np.asarray(trace.controls)
    dt = trace.dt

    y_inf = float(np.mean(y[-max(1, y.size // 10):]))
    d0 = y[0] - y_inf
    err = y - reference
    iae = float(_trapezoid(np.abs(err), dx=dt))
    itae = float(_trapezoid(t * np.abs(err), dx=dt))
    isc = float(_trapezoid(u ** 2, dx=dt))
    e_ss = abs(y_inf - reference)

    if abs(d0) < 1e-12:
        return ControlMetrics(rise_time=None, peak_overshoot=None,
                              settling_time=None, steady_state_error=e_ss,
                              iae=iae, itae=itae, isc=isc, settled=True,
                              final_value=y_inf)

    recovery = 1.0 - (y - y_inf) / d0
    above10 = np.nonzero(recovery >= 0.1)[0]
    above90 = np.nonzero(recovery >= 0.9)[0]
    if above10.size and above90.size:
        rise = float(t[above90[0]] - t[above10[0]])
    else:
        rise = None

    overshoot = float(np.max(-np.sign(d0) * (y - y_inf)))
    peak = 100.0 * max(0.0, overshoot) / abs(d0)

    outside = np.abs(y - y_inf) > band * abs(d0)
    if not outside.any():
        settling, settled = 0.0, True
    elif outside[-1]:
        settling, settled = float(len(y) * dt), False
    else:
        settling, settled = float(t[np.nonzero(outside)[0][-1]] + dt), True

    return ControlMetrics(rise_time=rise, peak_overshoot=peak,
                          settling_time=settling, steady_state_error=e_ss,
                          iae=iae, itae=itae, isc=isc, settled=settled,
                          final_value=y_inf)


def theoretical_chip_area(n_neurons: int, constants: HardwareConstants = HardwareConstants()) -> float:
    """Die area in mm^2 implied by the chip's peak neuron density."""
    if n_neurons < 1:
        raise ValueError("n_neurons must be >= 1")
    return n_neurons / constants.neuron_density


def core_utilization(n_neurons: int, constants: HardwareConstants = HardwareConstants()):
    """(average core utilization %, number of cores) to host the population."""
    if n_neurons < 1:
        raise ValueError("n_neurons must be >= 1")
    n_cores = math.ceil(n_neurons / constants.neurons_per_core)
    pct = 100.0 * n_neurons / (n_cores * constants.neurons_per_core)
    return pct, n_cores


def experimental_chip_area(utilization_pct: float, n_cores: int,
                           constants: HardwareConstants = HardwareConstants()) -> float:
    """Occupied silicon: area per core x fraction used x cores."""
    return constants.area_per_core * (utilization_pct / 100.0) * n_cores


def estimated_cpu_energy(wall_time_s: float, cpu_utilization: float,
                         constants: HardwareConstants = HardwareConstants()) -> float:
    """Joules burned on a CPU: wall time x utilization x TDP."""
    if wall_time_s < 0 or cpu_utilization < 0:
        raise ValueError("inputs must be >= 0")
    return wall_time_s * cpu_utilization * constants.cpu_tdp_w

def estimated_loihi_energy(synops_per_inference: float, updates_per_inference: float,
                           constants: HardwareConstants = HardwareConstants()) -> float:
    """Microjoules per inference from per-op energies."""
    if synops_per_inference < 0 or updates_per_inference < 0:
        raise ValueError("counts must be >= 0")
    pj = (synops_per_inference * constants.e_synop_pj
          + updates_per_inference * constants.e_neuron_update_pj)
    return pj * 1e-6


def spikes_per_neuron(trace) -> float:
    """Mean emitted spikes per neuron over the run."""
    if trace.n_neurons < 1:
        raise ValueError("trace has no spiking neurons")
    return len(trace.spike_times) / trace.n_neurons


def neuromorphic_metrics(trace, constants: HardwareConstants = HardwareConstants()) -> NeuromorphicMetrics:
    """Resource report for the spiking controller that produced the trace.

    Synaptic-op counting convention: each inference drives every neuron
    through its input synapse and reads out the spikes that occurred, so
    synops/inference = n_neurons + spikes/inference; every neuron updates
    once per inference.
    """
    pct, cores = core_utilization(trace.n_neurons, constants)
    n_inferences = max(1, len(trace.times))
    spikes_per_inf = len(trace.spike_times) / n_inferences
    energy = estimated_loihi_energy(trace.n_neurons + spikes_per_inf,
                                    trace.n_neurons, constants)
    return NeuromorphicMetrics(
        spikes_per_neuron=spikes_per_neuron(trace),
        core_utilization_pct=pct,
        n_cores=cores,
        area_experimental_mm2=experimental_chip_area(pct, cores, constants),
        area_theoretical_mm2=theoretical_chip_area(trace.n_neurons, constants),
        energy_loihi_uj_per_inf=energy,
    )


def control_noise_std(trace, tau: float = 0.05) -> float:
    """Standard deviation of the control signal about its lowpassed mean."""
    u = np.asarray(trace.controls)
    if u.size == 0:
        raise ValueError("trace is empty")
    alpha = trace.dt / tau
    smooth = np.empty_like(u)
    acc = u[0]
    for i, v in enumerate(u):
        acc += alpha * (v - acc)
        smooth[i] = acc
    return float(np.std(u - smooth))


class RuntimeInstrumentation:
    """Wall time, real-time factor, peak RSS and estimated CPU energy.

    Informational only: the values depend on the executing machine.
    """

    def __init__(self, constants: HardwareConstants = HardwareConstants()):
        self.constants = constants

    def __enter__(self):
        self._wall0 = time.perf_counter()
        self._cpu0 = time.process_time()
        return self

    def __exit__(self, *exc):
        self.wall_time = time.perf_counter() - self._wall0
        self.cpu_time = time.process_time() - self._cpu0
        self.max_rss_mib = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
        return False

    def report(self, sim_time: float) -> dict:
        util = min(1.0, self.cpu_time / self.wall_time) if self.wall_time > 0 else 0.0
        return {
            "sim_time_s": sim_time,
            "wall_time_s": self.wall_time,
            "real_time_factor": sim_time / self.wall_time if self.wall_time > 0 else float("inf"),
            "max_rss_mib": self.max_rss_mib,
            "cpu_utilization": util,
            "estimated_cpu_energy_j": estimated_cpu_energy(self.wall_time, util, self.constants),
        }
