import numpy as np
import pytest

from msnsim.datasets import LabeledImageSet
from msnsim.errors import FormatError, ShapeMismatch
from msnsim.network import (
    Conv2D,
    Dense,
    Flatten,
    MaxPool,
    NetworkSpec,
    SoftmaxOutput,
    Tanh,
    TrainConfig,
    architecture,
    forward,
    gradients,
    init_params,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from msnsim.network.model import cross_entropy
from msnsim.network.layers import conv_forward, pool_forward


def _loss(model, spec, x, y):
    return cross_entropy(forward(model, spec, x), y)


def grad_check(spec, seed=0, batch=3, eps=1e-6):
    rng = np.random.default_rng(seed)
    model = init_params(spec, seed)
    for i in spec.param_layers():
        model.biases[i] = rng.normal(scale=0.1, size=model.biases[i].shape)
    assert model.num_parameters() <= 1000
    x = rng.normal(size=(batch,) + spec.input_shape)
    y = rng.integers(0, spec.num_classes, batch)
    dws, dbs = gradients(model, spec, x, y)
    worst = 0.0
    for i in spec.param_layers():
        for arr, grad in ((model.weights[i], dws[i]), (model.biases[i], dbs[i])):
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + eps
                up = _loss(model, spec, x, y)
                arr[idx] = old - eps
                down = _loss(model, spec, x, y)
                arr[idx] = old
                num = (up - down) / (2 * eps)
                denom = max(abs(num) + abs(grad[idx]), 1e-7)
                worst = max(worst, abs(num - grad[idx]) / denom)
    return worst


GRAD_NETS = {
    "dense-tanh": NetworkSpec((6,), (Dense(6, 5), Tanh(1.0), Dense(5, 3), SoftmaxOutput(3))),
    "tanh-gain": NetworkSpec((4,), (Dense(4, 4), Tanh(1.7), Dense(4, 2), SoftmaxOutput(2))),
    "conv-pool": NetworkSpec((2, 8, 8), (Conv2D(2, 3, 3), Tanh(1.0), MaxPool(2), Flatten(),
                                         Dense(27, 4), SoftmaxOutput(4))),
    "conv-stride-pad": NetworkSpec((1, 7, 7), (Conv2D(1, 2, 3, stride=2, padding=1), Tanh(1.0),
                                               Flatten(), Dense(32, 3), SoftmaxOutput(3))),
}


@pytest.mark.parametrize("name", sorted(GRAD_NETS))
def test_gradients_match_central_differences(name):
    assert grad_check(GRAD_NETS[name]) <= 1e-4


def _direct_conv(x, w, b, stride, pad):
    x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    ho, wo = (h - k) // stride + 1, (wd - k) // stride + 1
    out = np.zeros((n, o, ho, wo))
    for a in range(n):
        for f in range(o):
            for i in range(ho):
                for j in range(wo):
                    patch = x[a, :, i * stride:i * stride + k, j * stride:j * stride + k]
                    out[a, f, i, j] = np.sum(patch * w[f]) + b[f]
    return out


@pytest.mark.parametrize("stride,pad", [(1, 0), (2, 1), (1, 2)])
def test_conv_matches_direct_loops(stride, pad):
    rng = np.random.default_rng(1)
    layer = Conv2D(2, 3, 3, stride, pad)
    x = rng.normal(size=(2, 2, 7, 6))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    got, _ = conv_forward(layer, x, w, b)
    assert np.allclose(got, _direct_conv(x, w, b, stride, pad), atol=1e-12)


def test_pool_matches_blockwise_max():
    x = np.random.default_rng(2).normal(size=(2, 3, 5, 4))
    got, _ = pool_forward(MaxPool(2), x)
    ref = x[:, :, :4, :4].reshape(2, 3, 2, 2, 2, 2).max(axis=(3, 5))
    assert np.array_equal(got, ref)


def test_conv_is_translation_equivariant():
    rng = np.random.default_rng(4)
    layer = Conv2D(1, 2, 3)
    x = np.zeros((1, 1, 10, 10))
    x[0, 0, 2:5, 3:6] = rng.normal(size=(3, 3))
    w, b = rng.normal(size=(2, 1, 3, 3)), np.zeros(2)
    y0, _ = conv_forward(layer, x, w, b)
    y1, _ = conv_forward(layer, np.roll(x, (2, 1), axis=(2, 3)), w, b)
    assert np.allclose(np.roll(y0, (2, 1), axis=(2, 3)), y1)


def test_golden_dense_forward():
    spec = NetworkSpec((2,), (Dense(2, 2), SoftmaxOutput(2)))
    model = init_params(spec, 0)
    model.weights[0] = np.array([[1.0, 0.0], [0.0, 2.0]])
    model.biases[0] = np.array([0.0, -1.0])
    p = forward(model, spec, np.array([[1.0, 1.0]]))
    # logits (1, 1) -> equal probabilities
    assert np.allclose(p, [[0.5, 0.5]])


def test_batch_independence():
    spec = architecture("mnist", "cnn")
    model = init_params(spec, 3)
    x = np.random.default_rng(0).random((5, 1, 28, 28))
    full = forward(model, spec, x)
    assert np.allclose(full[2:3], forward(model, spec, x[2:3]), rtol=0, atol=1e-14)


def test_xor_is_learned():
    spec = NetworkSpec((2,), (Dense(2, 8), Tanh(1.0), Dense(8, 2), SoftmaxOutput(2)))
    x = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.float64)
    y = np.array([0, 1, 1, 0])
    data = LabeledImageSet(np.tile(x, (64, 1)), np.tile(y, 64), num_classes=2)
    model = train(spec, data, TrainConfig(learning_rate=0.1, epochs=30, batch_size=8, seed=1))
    assert predict(model, spec, x).tolist() == y.tolist()
    assert model.meta["epoch_loss"][-1] < 0.1


def test_training_is_deterministic():
    spec = GRAD_NETS["dense-tanh"]
    rng = np.random.default_rng(0)
    data = LabeledImageSet(rng.normal(size=(40, 6)), rng.integers(0, 3, 40), num_classes=3)
    a = train(spec, data, TrainConfig(epochs=2, seed=4))
    b = train(spec, data, TrainConfig(epochs=2, seed=4))
    assert all(np.array_equal(u, v) for u, v in zip(a.weights[0::3], b.weights[0::3]))


def test_checkpoint_round_trip(tmp_path):
    spec = architecture("cifar10", "cnn")
    model = init_params(spec, 9)
    model.meta["note"] = "x"
    save_checkpoint(tmp_path / "c.npz", spec, model)
    spec2, model2 = load_checkpoint(tmp_path / "c.npz")
    assert spec2 == spec and model2.meta == model.meta
    for i in spec.param_layers():
        assert model2.weights[i].tobytes() == model.weights[i].tobytes()
        assert model2.biases[i].tobytes() == model.biases[i].tobytes()
    np.savez(tmp_path / "bad.npz", format=np.array("nope"))
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "bad.npz")


def test_spec_validation():
    with pytest.raises(ShapeMismatch):
        NetworkSpec((4,), (Dense(5, 2), SoftmaxOutput(2)))
    with pytest.raises(ShapeMismatch):
        NetworkSpec((4,), (Dense(4, 2),))
    with pytest.raises(ValueError):
        architecture("cifar10", "fcn")
    assert NetworkSpec.from_dict(architecture("mnist", "cnn").to_dict()) == architecture("mnist", "cnn")
