import pytest

from msnsim.config import DEFAULT_NOISE_GRID, ExperimentConfig, config_from_dict, load_config, parse_config
from msnsim.errors import ConfigError


def test_defaults():
    cfg = parse_config("")
    assert cfg.noise_grid == DEFAULT_NOISE_GRID
    assert cfg.bits == (3, 8, 16) and cfg.n_trials == 10
    assert parse_config('[experiment]\ndataset = "cifar10"\nnetwork = "cnn"').n_trials == 5


def test_full_file_round_trips_through_dict():
    text = """
[experiment]
dataset = "mnist"
network = "cnn"
bits = [8, 16]
noise_powers_v2 = [0, 1e-6]
trials = 3
seed = 9
[paths]
out = "x"
[circuit]
bias_current_a = 2e-10
flicker_corner_hz = 1000.0
[energy]
bits = 3
points_per_decade = 4
"""
    cfg = parse_config(text)
    assert cfg.circuit.bias_current == 2e-10 and cfg.energy.bits == 3
    assert config_from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("text", [
    "[experiment]\ntrails = 3",
    "[bogus]\nx = 1",
    "[circuit]\nbias_current = 1e-10",
    "[paths]\ndata = 'x'",
    "[experiment]\ndataset = 'svhn'",
    "[experiment]\ntrials = 0",
    "[experiment]\nbits = []",
    "[experiment]\nnoise_powers_v2 = [1e-6]\nbias_currents_a = [1e-10]",
    "[circuit]\nbias_current_a = -1.0",
    "not toml ===",
])
def test_rejects_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_file_names_path(tmp_path):
    with pytest.raises(ConfigError, match="nowhere.toml"):
        load_config(tmp_path / "nowhere.toml")


def test_checkpoint_default_path():
    assert str(ExperimentConfig(out="o").checkpoint_path()).endswith("o/checkpoints/mnist-fcn.npz")
