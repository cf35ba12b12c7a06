"""Behavioural model of the mixed-signal neuron.

The neuron sums branch currents ``gm * w_k * V_k`` into a load that sets the
branch gain ``gm * R`` to one, then passes the result through the
differential-pair transfer, modelled as a tanh with small-signal slope
``alpha``.  In normalised units (volts divided by the full-scale voltage)
this is ``tanh(alpha * w . x)``.

Circuit noise is folded into the weights: each evaluation draws a fresh
Gaussian perturbation of standard deviation ``weight_sigma`` for every
synapse from the counter-based stream in :mod:`msnsim.rng`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import LengthMismatch, NonPositiveInput, ShapeMismatch
from .noisemodel import CircuitParams, NoiseSpec, gm_subthreshold, weight_sigma_from_power
from .quantizer import QuantizedWeights, QuantSpec, dequantize

__all__ = [
    "NeuronConfig",
    "NoisyWeights",
    "neuron_forward",
    "normalized_forward",
    "sample_noisy_weights",
    "weight_sigma_from_power",
]


@dataclass(frozen=True)
class NeuronConfig:
    activation_gain_alpha: float = 1.0
    full_scale_v: float = 0.1
    gm: float = 1.0
    load_resistance_equiv: float | None = None

    def __post_init__(self):
        if not self.activation_gain_alpha > 0:
            raise NonPositiveInput("activation_gain_alpha must be > 0")
        if not (self.full_scale_v > 0 and self.gm > 0):
            raise NonPositiveInput("full_scale_v and gm must be > 0")
        if self.load_resistance_equiv is None:
            object.__setattr__(self, "load_resistance_equiv", 1.0 / self.gm)
        if abs(self.gm * self.load_resistance_equiv - 1.0) > 1e-12:
            raise ValueError("branch gain gm * R must be 1")

    @classmethod
    def from_circuit(cls, params: CircuitParams, alpha: float = 1.0) -> "NeuronConfig":
        gm = gm_subthreshold(params.bias_current, params.subthreshold_slope_n, params.temperature)
        return cls(alpha, params.full_scale_v, gm)


def neuron_forward(inputs, weights, cfg: NeuronConfig) -> float:
    """Output voltage of one neuron for input voltages ``inputs``.

    Evaluated branch by branch: each synapse contributes a current
    ``gm * w * V`` that develops ``R * gm * w * V`` across the load.
    """
    inputs = list(inputs)
    weights = list(weights)
    if len(inputs) != len(weights):
        raise LengthMismatch(f"{len(inputs)} inputs vs {len(weights)} weights")
    currents = [cfg.gm * float(w) * float(v) for w, v in zip(weights, inputs)]
    v_sum = cfg.load_resistance_equiv * math.fsum(currents)
    return cfg.full_scale_v * math.tanh(cfg.activation_gain_alpha * v_sum / cfg.full_scale_v)


def normalized_forward(x, w, alpha: float = 1.0) -> np.ndarray:
    """``tanh(alpha * w . x)`` over the last axis of ``x``.

    ``w`` may be a single weight vector ``(n,)`` or a matrix ``(m, n)``.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.shape[-1:] != w.shape[-1:]:
        raise ShapeMismatch(f"input length {x.shape[-1:]} vs weight length {w.shape[-1:]}")
    return np.tanh(alpha * (x @ w.T))


@dataclass
class NoisyWeights:
    values: np.ndarray
    source_spec: QuantSpec
    noise: NoiseSpec
    seed: int


def sample_noisy_weights(q: QuantizedWeights, noise: NoiseSpec, seed: int,
                         pass_index: int = 0, trial: int = 0, stream: int = 0) -> NoisyWeights:
    """Dequantized weights plus i.i.d. N(0, weight_sigma**2) per element.

    Element ``i`` (row-major) uses counter ``(i, stream, pass_index, trial)``
    under key ``seed``; different ``pass_index`` values give independent
    draws, the same arguments give bit-identical output.
    """
    base = dequantize(q)
    if noise.weight_sigma == 0.0:
        return NoisyWeights(base, q.spec, noise, seed)
    z = rng.normal_stream(seed, base.size, stream=stream, pass_index=pass_index, trial=trial)
    values = base + noise.weight_sigma * z.reshape(base.shape)
    return NoisyWeights(values, q.spec, noise, seed)
