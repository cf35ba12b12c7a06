"""Quantized, noisy inference on the mixed-signal neuron model.

Every weighted layer is a bank of MS-N neurons.  Its weights (and biases,
treated as one more synapse driven by a constant 1) are quantized with one
per-layer spec, then perturbed by Gaussian circuit noise.

Noise bookkeeping, all drawn from :mod:`msnsim.rng` under key ``master_seed``:

* layer ``i`` weights use stream ``2*i``, its biases stream ``2*i + 1``;
* the pass index is the image's position in the evaluated set, so results
  do not depend on chunking or thread scheduling;
* the trial index is the Monte-Carlo trial.

``resample="frozen"`` draws one perturbation per trial for the whole model
(pass index ``FROZEN_PASS``) instead of one per image.

For dense layers in per-pass mode, ``dense_mode="marginal"`` (default) draws
the summed noise current directly: with i.i.d. N(0, s^2) weight errors the
extra pre-activation of unit ``j`` is exactly ``s * sqrt(|x|^2 + 1) * z_j``
in distribution.  ``dense_mode="per_weight"`` draws every synapse instead.
Convolutions always draw per weight because one kernel is shared by all
positions of an image.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import rng
from .._backend import USE_NUMBA
from ..datasets import LabeledImageSet
from ..noisemodel import NoiseSpec
from ..quantizer import QuantizedWeights, dequantize, quantize
from .layers import Conv2D, Dense, Flatten, MaxPool, SoftmaxOutput, Tanh, im2col, pool_forward, softmax
from .model import ModelParams, NetworkSpec, forward

FROZEN_PASS = (1 << 64) - 1
RESAMPLE_MODES = ("per_pass", "frozen")
DENSE_MODES = ("marginal", "per_weight")
Z95 = 1.959963984540054


@dataclass
class QuantizedModel:
    spec: NetworkSpec
    bits: int
    qweights: dict = field(default_factory=dict)  # layer -> (QuantizedWeights, QuantizedWeights)
    params: ModelParams | None = None  # dequantized

    def quantized_layers(self) -> dict[str, QuantizedWeights]:
        out = {}
        for i, (qw, qb) in self.qweights.items():
            out[f"layer{i}.weight"] = qw
            out[f"layer{i}.bias"] = qb
        return out


def quantize_model(model: ModelParams, spec: NetworkSpec, bits: int) -> QuantizedModel:
    """Post-training quantization; one scale per layer covering weights and bias."""
    weights = [None] * len(spec.layers)
    biases = [None] * len(spec.layers)
    qmodel = QuantizedModel(spec, bits)
    for i in spec.param_layers():
        w, b = model.weights[i], model.biases[i]
        scale = float(max(np.abs(w).max(initial=0.0), np.abs(b).max(initial=0.0)))
        scale = scale if scale > 0 else 1.0
        qw, qb = quantize(w, bits, scale), quantize(b, bits, scale)
        qmodel.qweights[i] = (qw, qb)
        weights[i], biases[i] = dequantize(qw), dequantize(qb)
    meta = dict(model.meta)
    meta["quantized_bits"] = int(bits)
    qmodel.params = ModelParams(weights, biases, meta)
    return qmodel


# ----------------------------------------------------------------- kernels

if USE_NUMBA:
    import numba as nb

    from ..rng import philox_block, zig_normal

    @nb.njit(cache=True, parallel=True)
    def _dense_per_weight_nb(x, w, b, sigma, k0, k1, s_w, s_b, passes, trial, zx, zf, r):
        n_pass, n_in = x.shape
        n_out = w.shape[0]
        n_w = n_out * n_in
        out = np.empty((n_pass, n_out))
        for p in nb.prange(n_pass):
            c2 = passes[p]
            acc = np.zeros(n_out)
            j = 0
            k = 0
            for blk in range((n_w + 3) // 4):
                ws = philox_block(np.uint64(blk), s_w, c2, trial, k0, k1)
                for lane in range(4):
                    e = blk * 4 + lane
                    if e < n_w:
                        z = zig_normal(ws[lane], k0, k1, s_w, c2, trial, e, zx, zf, r)
                        acc[j] += (w[j, k] + sigma * z) * x[p, k]
                        k += 1
                        if k == n_in:
                            k = 0
                            j += 1
            for blk in range((n_out + 3) // 4):
                ws = philox_block(np.uint64(blk), s_b, c2, trial, k0, k1)
                for lane in range(4):
                    e = blk * 4 + lane
                    if e < n_out:
                        z = zig_normal(ws[lane], k0, k1, s_b, c2, trial, e, zx, zf, r)
                        out[p, e] = acc[e] + b[e] + sigma * z
        return out


def dense_per_weight(x, w, b, sigma, seed, layer, passes, trial, backend=None):
    """Dense layer where each image sees its own freshly perturbed weights."""
    backend = backend or ("numba" if USE_NUMBA else "numpy")
    passes = np.ascontiguousarray(np.asarray(passes).astype(np.uint64))
    if backend == "numba":
        k0, k1 = rng.seed_to_key(seed)
        return _dense_per_weight_nb(
            np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(w), b, float(sigma),
            np.uint64(k0), np.uint64(k1), np.uint64(2 * layer), np.uint64(2 * layer + 1),
            passes, np.uint64(trial), rng.ZIG_X, rng.ZIG_F, rng.ZIG_R,
        )
    zw = rng.normal_block(seed, 2 * layer, passes, trial, w.size, backend="numpy")
    zb = rng.normal_block(seed, 2 * layer + 1, passes, trial, b.size, backend="numpy")
    wn = w[None] + sigma * zw.reshape((passes.size,) + w.shape)
    return np.matmul(wn, x[:, :, None])[:, :, 0] + b + sigma * zb


def dense_marginal(x, w, b, sigma, seed, layer, passes, trial):
    pre = x @ w.T + b
    z = rng.normal_block(seed, 2 * layer, passes, trial, w.shape[0])
    return pre + sigma * np.sqrt(np.einsum("ij,ij->i", x, x) + 1.0)[:, None] * z


def conv_per_weight(layer: Conv2D, x, w, b, sigma, seed, index, passes, trial):
    cols, ho, wo = im2col(x, layer.kernel, layer.stride, layer.padding)
    n = x.shape[0]
    o = layer.out_channels
    zw = rng.normal_block(seed, 2 * index, passes, trial, w.size)
    zb = rng.normal_block(seed, 2 * index + 1, passes, trial, b.size)
    wn = w.reshape(1, o, -1) + sigma * zw.reshape(n, o, -1)
    bn = b[None] + sigma * zb
    out = np.matmul(cols, wn.transpose(0, 2, 1)) + bn[:, None, :]
    return out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)


def _clean_conv(layer, x, w, b):
    cols, ho, wo = im2col(x, layer.kernel, layer.stride, layer.padding)
    out = cols @ w.reshape(layer.out_channels, -1).T + b
    return out.reshape(x.shape[0], ho, wo, layer.out_channels).transpose(0, 3, 1, 2)


def noisy_forward(params: ModelParams, spec: NetworkSpec, batch, passes, sigma: float,
                  seed: int, trial: int, dense_mode: str = "marginal") -> np.ndarray:
    """Class probabilities with a fresh noise draw per image (per-pass mode)."""
    if dense_mode not in DENSE_MODES:
        raise ValueError(f"dense_mode must be one of {DENSE_MODES}")
    x = np.asarray(batch, dtype=np.float64)
    passes = np.asarray(passes, dtype=np.uint64)
    if passes.shape != (x.shape[0],):
        raise ValueError("need one pass index per image")
    for i, layer in enumerate(spec.layers):
        w, b = params.weights[i], params.biases[i]
        if isinstance(layer, Dense):
            if sigma == 0:
                x = x @ w.T + b
            elif dense_mode == "marginal":
                x = dense_marginal(x, w, b, sigma, seed, i, passes, trial)
            else:
                x = dense_per_weight(x, w, b, sigma, seed, i, passes, trial)
        elif isinstance(layer, Conv2D):
            if sigma == 0:
                x = _clean_conv(layer, x, w, b)
            else:
                x = conv_per_weight(layer, x, w, b, sigma, seed, i, passes, trial)
        elif isinstance(layer, MaxPool):
            x = pool_forward(layer, x)[0]
        elif isinstance(layer, Tanh):
            x = np.tanh(layer.alpha * x)
        elif isinstance(layer, Flatten):
            x = x.reshape(x.shape[0], -1)
        elif isinstance(layer, SoftmaxOutput):
            x = softmax(x)
    return x


def frozen_params(params: ModelParams, spec: NetworkSpec, sigma: float, seed: int,
                  trial: int) -> ModelParams:
    """One perturbed copy of the whole model for a trial (frozen mode)."""
    out = params.copy()
    if sigma == 0:
        return out
    for i in spec.param_layers():
        for arr, stream in ((out.weights[i], 2 * i), (out.biases[i], 2 * i + 1)):
            z = rng.normal_block(seed, stream, [FROZEN_PASS], trial, arr.size)[0]
            arr += sigma * z.reshape(arr.shape)
    return out


# -------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class EvalReport:
    total: int
    correct: int
    error_rate: float
    trials: int = 1
    trial_errors: tuple = ()
    ci95_halfwidth: float = 0.0

    def __post_init__(self):
        if not 0 <= self.correct <= self.total:
            raise ValueError("correct must lie in [0, total]")


def _report(errors_per_trial: list[int], n: int) -> EvalReport:
    t = len(errors_per_trial)
    rates = tuple(e / n for e in errors_per_trial)
    wrong = sum(errors_per_trial)
    total = n * t
    half = 0.0
    if t > 1 and len(set(errors_per_trial)) > 1:
        half = Z95 * float(np.std(rates, ddof=1)) / math.sqrt(t)
    return EvalReport(total, total - wrong, wrong / total, t, rates, half)


def evaluate(model: ModelParams, spec: NetworkSpec, data: LabeledImageSet,
             chunk: int = 1000) -> EvalReport:
    """Noiseless float evaluation."""
    wrong = 0
    for s in range(0, len(data), chunk):
        pred = np.argmax(forward(model, spec, data.images[s:s + chunk]), axis=1)
        wrong += int(np.sum(pred != data.labels[s:s + chunk]))
    return _report([wrong], len(data))


def evaluate_noisy(model: ModelParams, spec: NetworkSpec, data: LabeledImageSet, bits: int | None,
                   noise: NoiseSpec, trials: int, master_seed: int,
                   resample: str = "per_pass", dense_mode: str = "marginal",
                   chunk: int = 500) -> EvalReport:
    """Monte-Carlo error rate of the quantized model under weight noise.

    ``bits=None`` skips quantization.  With zero noise every trial is
    identical, so the model is evaluated once and the half-width is 0.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if resample not in RESAMPLE_MODES:
        raise ValueError(f"resample must be one of {RESAMPLE_MODES}")
    params = quantize_model(model, spec, bits).params if bits is not None else model
    n = len(data)
    if n == 0:
        raise ValueError("evaluation set is empty")
    sigma = float(noise.weight_sigma)
    if sigma == 0.0:
        rep = evaluate(params, spec, data, chunk)
        return _report([rep.total - rep.correct] * trials, n)
    errors = []
    for t in range(trials):
        wrong = 0
        if resample == "frozen":
            noisy = frozen_params(params, spec, sigma, master_seed, t)
            rep = evaluate(noisy, spec, data, chunk)
            wrong = rep.total - rep.correct
        else:
            for s in range(0, n, chunk):
                stop = min(n, s + chunk)
                probs = noisy_forward(params, spec, data.images[s:stop], np.arange(s, stop),
                                      sigma, master_seed, t, dense_mode)
                wrong += int(np.sum(np.argmax(probs, axis=1) != data.labels[s:stop]))
        errors.append(wrong)
    return _report(errors, n)
