from .layers import Conv2D, Dense, Flatten, MaxPool, SoftmaxOutput, Tanh
from .model import (
    ModelParams,
    NetworkSpec,
    architecture,
    backward,
    cnn_cifar10,
    cnn_mnist,
    fcn_mnist,
    forward,
    gradients,
    init_params,
    load_checkpoint,
    loss_and_gradients,
    predict,
    save_checkpoint,
)
from .train import DEFAULT_TRAIN, TrainConfig, accuracy, train
