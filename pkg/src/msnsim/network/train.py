"""Mini-batch SGD with momentum."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from ..datasets import LabeledImageSet, shuffled_indices
from ..errors import DivergedLoss
from .model import ModelParams, NetworkSpec, init_params, loss_and_gradients, predict

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 3
    batch_size: int = 32
    seed: int = 0


DEFAULT_TRAIN = {
    "fcn": TrainConfig(learning_rate=0.05, epochs=3),
    "cnn": TrainConfig(learning_rate=0.02, epochs=5),
}


def accuracy(model: ModelParams, spec: NetworkSpec, data: LabeledImageSet,
             chunk: int = 1000) -> float:
    if len(data) == 0:
        return float("nan")
    correct = 0
    for s in range(0, len(data), chunk):
        correct += int(np.sum(predict(model, spec, data.images[s:s + chunk]) == data.labels[s:s + chunk]))
    return correct / len(data)


def train(spec: NetworkSpec, data: LabeledImageSet, hyper: TrainConfig = TrainConfig(),
          test: LabeledImageSet | None = None, model: ModelParams | None = None) -> ModelParams:
    """Train from a seeded initialisation; batch order is fixed by ``hyper.seed``."""
    if len(data) == 0:
        raise ValueError("training set is empty")
    if model is None:
        model = init_params(spec, hyper.seed)
    else:
        model = model.copy()
    idx_w = spec.param_layers()
    vel_w = {i: np.zeros_like(model.weights[i]) for i in idx_w}
    vel_b = {i: np.zeros_like(model.biases[i]) for i in idx_w}
    epoch_loss = []
    n = len(data)
    for epoch in range(hyper.epochs):
        t0 = time.perf_counter()
        order = shuffled_indices(n, hyper.seed * 1_000_003 + epoch + 1)
        total = 0.0
        for s in range(0, n, hyper.batch_size):
            sel = np.sort(order[s:s + hyper.batch_size])
            loss, dws, dbs = loss_and_gradients(model, spec, data.images[sel], data.labels[sel])
            if not math.isfinite(loss):
                raise DivergedLoss(f"loss became {loss} in epoch {epoch}")
            total += loss * sel.size
            for i in idx_w:
                vel_w[i] *= hyper.momentum
                vel_w[i] -= hyper.learning_rate * dws[i]
                model.weights[i] += vel_w[i]
                vel_b[i] *= hyper.momentum
                vel_b[i] -= hyper.learning_rate * dbs[i]
                model.biases[i] += vel_b[i]
        epoch_loss.append(total / n)
        log.info("epoch %d loss %.5f (%.1fs)", epoch + 1, epoch_loss[-1], time.perf_counter() - t0)
    model.meta.update({
        "train": asdict(hyper),
        "epoch_loss": epoch_loss,
        "train_accuracy": accuracy(model, spec, data),
        "test_accuracy": accuracy(model, spec, test) if test is not None else None,
        "dataset": data.name,
        "network": spec.name,
    })
    return model
