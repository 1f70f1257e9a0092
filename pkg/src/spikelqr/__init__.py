"""Spiking-neuron LQR control benchmark for multi-linked pendula on a cart.

The library simulates n-linked pendulum-on-a-cart plants, solves the
continuous-time LQR problem, and closes the loop with spiking controllers
ranging from two rate-coded LIF neurons to population-coded ensembles.
Control and neuromorphic resource metrics are computed from the resulting
traces; the ``spikelqr`` CLI runs single experiments and parameter sweeps.
"""

from spikelqr.control import ControllerConfig, PidParams, SimTrace, SmcParams, closed_loop_sim
from spikelqr.dynamics import (LinearModel, SystemParams, linearize, make_plant,
                               rk4_step, total_energy, upright_state)
from spikelqr.lif import LifParams, LifState, SpikeTrain, lif_step, rate_encode
from spikelqr.lqr import LqrWeights, controllability_matrix, lqr_gain, quadratic_cost, solve_care
from spikelqr.metrics import (ControlMetrics, HardwareConstants, NeuromorphicMetrics,
                              control_metrics, neuromorphic_metrics)
from spikelqr.nef import DecoderSet, Ensemble, EnsembleSpec, EnsembleState, build_ensemble

__all__ = [
    "SystemParams",
    "LinearModel",
    "make_plant",
    "upright_state",
    "linearize",
    "rk4_step",
    "total_energy",
    "LqrWeights",
    "controllability_matrix",
    "solve_care",
    "lqr_gain",
    "quadratic_cost",
    "LifParams",
    "LifState",
    "SpikeTrain",
    "lif_step",
    "rate_encode",
    "EnsembleSpec",
    "Ensemble",
    "EnsembleState",
    "DecoderSet",
    "build_ensemble",
    "ControllerConfig",
    "PidParams",
    "SmcParams",
    "SimTrace",
    "closed_loop_sim",
    "ControlMetrics",
    "NeuromorphicMetrics",
    "HardwareConstants",
    "control_metrics",
    "neuromorphic_metrics",
]

__version__ = "0.1.0"
