"""Network specification, parameters, float forward/backward and checkpoints."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FormatError, ShapeMismatch
from .layers import (
    Conv2D,
    Dense,
    Flatten,
    MaxPool,
    SoftmaxOutput,
    Tanh,
    conv_backward,
    conv_forward,
    has_params,
    layer_from_dict,
    layer_to_dict,
    pool_backward,
    pool_forward,
    softmax,
)

CHECKPOINT_FORMAT = "msnsim-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple
    layers: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        soft = [i for i, layer in enumerate(self.layers) if isinstance(layer, SoftmaxOutput)]
        if soft != [len(self.layers) - 1]:
            raise ShapeMismatch("network needs exactly one SoftmaxOutput, as its last layer")
        self.shapes()  # validates composition

    def shapes(self) -> list[tuple]:
        """Activation shape after each layer, starting with the input shape."""
        out = [self.input_shape]
        for layer in self.layers:
            out.append(tuple(layer.out_shape(out[-1])))
        return out

    @property
    def num_classes(self) -> int:
        return self.layers[-1].classes

    def param_layers(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if has_params(layer)]

    def to_dict(self) -> dict:
        return {"name": self.name, "input_shape": list(self.input_shape),
                "layers": [layer_to_dict(layer) for layer in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(tuple(d["input_shape"]), tuple(layer_from_dict(x) for x in d["layers"]),
                   d.get("name", ""))


def fcn_mnist(alpha: float = 1.0) -> NetworkSpec:
    return NetworkSpec((1, 28, 28), (Flatten(), Dense(784, 128), Tanh(alpha), Dense(128, 10),
                                     SoftmaxOutput(10)), "fcn-mnist")


def cnn_mnist(alpha: float = 1.0) -> NetworkSpec:
    return NetworkSpec((1, 28, 28), (
        Conv2D(1, 8, 5), Tanh(alpha), MaxPool(2),
        Conv2D(8, 16, 5), Tanh(alpha), MaxPool(2),
        Flatten(), Dense(256, 10), SoftmaxOutput(10)), "cnn-mnist")


def cnn_cifar10(alpha: float = 1.0) -> NetworkSpec:
    return NetworkSpec((3, 32, 32), (
        Conv2D(3, 16, 5), Tanh(alpha), MaxPool(2),
        Conv2D(16, 32, 5), Tanh(alpha), MaxPool(2),
        Flatten(), Dense(800, 64), Tanh(alpha), Dense(64, 10), SoftmaxOutput(10)), "cnn-cifar10")


ARCHITECTURES = {
    ("mnist", "fcn"): fcn_mnist,
    ("mnist", "cnn"): cnn_mnist,
    ("cifar10", "cnn"): cnn_cifar10,
}


def architecture(dataset: str, network: str, alpha: float = 1.0) -> NetworkSpec:
    try:
        return ARCHITECTURES[(dataset, network)](alpha)
    except KeyError:
        raise ValueError(f"no architecture for dataset={dataset!r} network={network!r}") from None


@dataclass
class ModelParams:
    """Per-layer weights and biases (``None`` for parameter-free layers)."""

    weights: list
    biases: list
    meta: dict = field(default_factory=dict)

    def copy(self) -> "ModelParams":
        cp = lambda a: None if a is None else a.copy()  # noqa: E731
        return ModelParams([cp(w) for w in self.weights], [cp(b) for b in self.biases],
                           json.loads(json.dumps(self.meta)))

    def num_parameters(self) -> int:
        return sum(a.size for a in self.weights + self.biases if a is not None)

    def check(self, spec: NetworkSpec) -> None:
        if len(self.weights) != len(spec.layers) or len(self.biases) != len(spec.layers):
            raise ShapeMismatch("parameter list length differs from layer count")
        for i, layer in enumerate(spec.layers):
            if has_params(layer):
                ws, bs = layer.param_shapes()
                if self.weights[i] is None or self.weights[i].shape != ws or self.biases[i].shape != bs:
                    raise ShapeMismatch(f"layer {i} parameters do not match {layer}")
                if not (np.all(np.isfinite(self.weights[i])) and np.all(np.isfinite(self.biases[i]))):
                    raise ValueError(f"layer {i} has non-finite parameters")


def init_params(spec: NetworkSpec, seed: int) -> ModelParams:
    """He-scaled uniform weights ``U(-sqrt(6/fan_in), +sqrt(6/fan_in))``, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for layer in spec.layers:
        if has_params(layer):
            ws, bs = layer.param_shapes()
            lim = np.sqrt(6.0 / layer.fan_in)
            weights.append(rng.uniform(-lim, lim, size=ws))
            biases.append(np.zeros(bs))
        else:
            weights.append(None)
            biases.append(None)
    return ModelParams(weights, biases, {"init_seed": int(seed)})


def _check_batch(spec: NetworkSpec, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[1:] != spec.input_shape:
        raise ShapeMismatch(f"batch shape {batch.shape[1:]} != network input {spec.input_shape}")
    return batch


def forward_cached(model: ModelParams, spec: NetworkSpec, batch):
    x = _check_batch(spec, batch)
    caches = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Dense):
            caches.append(x)
            x = x @ model.weights[i].T + model.biases[i]
        elif isinstance(layer, Conv2D):
            x, cache = conv_forward(layer, x, model.weights[i], model.biases[i])
            caches.append(cache)
        elif isinstance(layer, MaxPool):
            x, cache = pool_forward(layer, x)
            caches.append(cache)
        elif isinstance(layer, Tanh):
            x = np.tanh(layer.alpha * x)
            caches.append(x)
        elif isinstance(layer, Flatten):
            caches.append(x.shape)
            x = x.reshape(x.shape[0], -1)
        elif isinstance(layer, SoftmaxOutput):
            x = softmax(x)
            caches.append(None)
    return x, caches


def forward(model: ModelParams, spec: NetworkSpec, batch) -> np.ndarray:
    """Class probabilities ``(batch, classes)``."""
    return forward_cached(model, spec, batch)[0]


def predict(model: ModelParams, spec: NetworkSpec, batch) -> np.ndarray:
    # argmax picks the lowest index on ties
    return np.argmax(forward(model, spec, batch), axis=1)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    p = probs[np.arange(labels.size), labels]
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


def backward(model: ModelParams, spec: NetworkSpec, caches, probs, labels):
    """Gradients of the mean cross-entropy; returns ``(dweights, dbiases)`` lists."""
    n = labels.size
    g = probs.copy()
    g[np.arange(n), labels] -= 1.0
    g /= n
    dws = [None] * len(spec.layers)
    dbs = [None] * len(spec.layers)
    for i in range(len(spec.layers) - 2, -1, -1):
        layer, cache = spec.layers[i], caches[i]
        if isinstance(layer, Dense):
            dws[i] = g.T @ cache
            dbs[i] = g.sum(axis=0)
            g = g @ model.weights[i]
        elif isinstance(layer, Conv2D):
            g, dws[i], dbs[i] = conv_backward(layer, cache, model.weights[i], g)
        elif isinstance(layer, MaxPool):
            g = pool_backward(layer, cache, g)
        elif isinstance(layer, Tanh):
            g = g * layer.alpha * (1.0 - cache * cache)
        elif isinstance(layer, Flatten):
            g = g.reshape(cache)
    return dws, dbs


def loss_and_gradients(model: ModelParams, spec: NetworkSpec, batch, labels):
    labels = np.asarray(labels, dtype=np.int64)
    probs, caches = forward_cached(model, spec, batch)
    dws, dbs = backward(model, spec, caches, probs, labels)
    return cross_entropy(probs, labels), dws, dbs


def gradients(model: ModelParams, spec: NetworkSpec, batch, labels):
    """Per-parameter gradients of the mean cross-entropy loss on ``batch``."""
    _, dws, dbs = loss_and_gradients(model, spec, batch, labels)
    return dws, dbs


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(path, spec: NetworkSpec, model: ModelParams) -> None:
    payload = {
        "format": np.array(CHECKPOINT_FORMAT),
        "version": np.array(CHECKPOINT_VERSION, dtype=np.int64),
        "spec": np.array(json.dumps(spec.to_dict(), sort_keys=True)),
        "meta": np.array(json.dumps(model.meta, sort_keys=True)),
    }
    for i in spec.param_layers():
        payload[f"w{i}"] = np.asarray(model.weights[i], dtype=np.float64)
        payload[f"b{i}"] = np.asarray(model.biases[i], dtype=np.float64)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path) -> tuple[NetworkSpec, ModelParams]:
    with np.load(Path(path), allow_pickle=False) as z:
        if "format" not in z or str(z["format"]) != CHECKPOINT_FORMAT:
            raise FormatError(f"{path} is not a model checkpoint")
        version = int(z["version"])
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        spec = NetworkSpec.from_dict(json.loads(str(z["spec"])))
        weights = [None] * len(spec.layers)
        biases = [None] * len(spec.layers)
        for i in spec.param_layers():
            weights[i] = z[f"w{i}"].copy()
            biases[i] = z[f"b{i}"].copy()
        model = ModelParams(weights, biases, json.loads(str(z["meta"])))
    model.check(spec)
    return spec, model
