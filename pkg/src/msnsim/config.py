"""Experiment configuration: TOML sections, strict keys.

Layout::

    [experiment]   dataset, network, bits, noise_powers_v2 | bias_currents_a, trials, ...
    [paths]        data_dir, checkpoint, out
    [circuit]      CircuitParams fields (see CIRCUIT_KEYS)
    [energy]       energy sweep range and calibration anchors

Any unknown section or key raises :class:`ConfigError`.
"""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .noisemodel import CircuitParams

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

DEFAULT_NOISE_GRID = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
DEFAULT_BITS = (3, 8, 16)
DEFAULT_TRIALS = {"mnist": 10, "cifar10": 5}
DEFAULT_MASTER_SEED = 1234

# config key -> CircuitParams field
CIRCUIT_KEYS = {
    "bias_current_a": "bias_current",
    "temperature_k": "temperature",
    "slope_n": "subthreshold_slope_n",
    "gamma": "thermal_gamma",
    "pair_count": "device_pair_count",
    "flicker_corner_hz": "flicker_corner_hz",
    "band_lo_hz": "band_lo_hz",
    "band_hi_hz": "band_hi_hz",
    "full_scale_v": "full_scale_v",
}


@dataclass(frozen=True)
class EnergyConfig:
    bits: int = 8
    f_lo_hz: float = 1e3
    f_hi_hz: float = 1e10
    points_per_decade: int = 10
    analog_fj_per_mac: float = 0.7
    linear_from_hz: float = 1e6
    low_freq_power_ratio: float = 1000.0
    min_energy_ratio: float = 85.0
    headroom: float = 1.1
    vdd: float = 1.2
    transistor_count_8b: int = 1980
    transistor_count_3b: int = 192
    leak_per_transistor_w: float | None = None
    switch_energy_per_mac_j: float | None = None

    def anchors(self):
        from .energymodel import EnergyAnchors

        kw = asdict(self)
        for k in ("bits", "f_lo_hz", "f_hi_hz", "points_per_decade"):
            kw.pop(k)
        return EnergyAnchors(**kw)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "mnist"
    network: str = "fcn"
    bits: tuple = DEFAULT_BITS
    noise_powers_v2: tuple | None = None
    bias_currents_a: tuple | None = None
    trials: int | None = None
    seed: int = DEFAULT_MASTER_SEED
    train_seed: int = 0
    noise_resample_mode: str = "per_pass"
    dense_noise_mode: str = "marginal"
    activation_alpha: float = 1.0
    epochs: int | None = None
    learning_rate: float | None = None
    momentum: float = 0.9
    batch_size: int = 32
    train_if_missing: bool = False
    train_limit: int = 0  # 0 means the full split
    test_limit: int = 0
    chunk: int = 500
    data_dir: str | None = None
    checkpoint: str | None = None
    out: str = "results"
    circuit: CircuitParams = field(default_factory=CircuitParams)
    energy: EnergyConfig = field(default_factory=EnergyConfig)

    def __post_init__(self):
        if self.dataset not in ("mnist", "cifar10"):
            raise ConfigError(f"dataset must be mnist or cifar10, got {self.dataset!r}")
        if self.network not in ("fcn", "cnn"):
            raise ConfigError(f"network must be fcn or cnn, got {self.network!r}")
        if (self.dataset, self.network) == ("cifar10", "fcn"):
            raise ConfigError("no fcn architecture for cifar10")
        if not self.bits or any(int(b) < 2 or int(b) > 32 for b in self.bits):
            raise ConfigError("bits must be a nonempty list of integers in [2, 32]")
        if self.noise_powers_v2 is not None and self.bias_currents_a is not None:
            raise ConfigError("give noise_powers_v2 or bias_currents_a, not both")
        for name in ("noise_powers_v2", "bias_currents_a"):
            vals = getattr(self, name)
            if vals is not None and len(vals) == 0:
                raise ConfigError(f"{name} must be nonempty")
        if self.noise_powers_v2 is not None and any(p < 0 for p in self.noise_powers_v2):
            raise ConfigError("noise powers must be >= 0")
        if self.bias_currents_a is not None and any(not c > 0 for c in self.bias_currents_a):
            raise ConfigError("bias currents must be > 0")
        if self.trials is not None and self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.noise_resample_mode not in ("per_pass", "frozen"):
            raise ConfigError("noise_resample_mode must be per_pass or frozen")
        if self.dense_noise_mode not in ("marginal", "per_weight"):
            raise ConfigError("dense_noise_mode must be marginal or per_weight")
        if self.seed < 0 or self.train_seed < 0:
            raise ConfigError("seeds must be >= 0")
        if self.chunk < 1 or self.batch_size < 1:
            raise ConfigError("chunk and batch_size must be >= 1")
        if self.energy.bits not in (3, 8):
            raise ConfigError("energy.bits must be 3 or 8")

    @property
    def n_trials(self) -> int:
        return self.trials if self.trials is not None else DEFAULT_TRIALS[self.dataset]

    @property
    def noise_grid(self) -> tuple:
        if self.noise_powers_v2 is None and self.bias_currents_a is None:
            return DEFAULT_NOISE_GRID
        return self.noise_powers_v2

    def checkpoint_path(self) -> Path:
        if self.checkpoint:
            return Path(self.checkpoint)
        return Path(self.out) / "checkpoints" / f"{self.dataset}-{self.network}.npz"

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        """Nested dict in the file layout; ``config_from_dict`` inverts it."""
        exp = {}
        paths = {}
        for k, v in asdict(self).items():
            if k in ("circuit", "energy"):
                continue
            if v is None:
                continue
            if k in ("data_dir", "checkpoint", "out"):
                paths[k] = v
            else:
                exp[k] = list(v) if isinstance(v, tuple) else v
        circuit = {key: getattr(self.circuit, attr) for key, attr in CIRCUIT_KEYS.items()}
        energy = {k: v for k, v in asdict(self.energy).items() if v is not None}
        return {"experiment": exp, "paths": paths, "circuit": circuit, "energy": energy}


_EXPERIMENT_KEYS = {f for f in ExperimentConfig.__dataclass_fields__
                    if f not in ("data_dir", "checkpoint", "out", "circuit", "energy")}
_PATH_KEYS = {"data_dir", "checkpoint", "out"}
_ENERGY_KEYS = set(EnergyConfig.__dataclass_fields__)
_SECTIONS = {"experiment": _EXPERIMENT_KEYS, "paths": _PATH_KEYS,
             "circuit": set(CIRCUIT_KEYS), "energy": _ENERGY_KEYS}
_TUPLE_KEYS = {"bits", "noise_powers_v2", "bias_currents_a"}


def config_from_dict(data: dict) -> ExperimentConfig:
    for section, body in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        unknown = sorted(set(body) - _SECTIONS[section])
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    kw = {}
    for k, v in data.get("experiment", {}).items():
        if k in _TUPLE_KEYS:
            if not isinstance(v, list):
                raise ConfigError(f"experiment.{k} must be a list")
            v = tuple(int(x) if k == "bits" else float(x) for x in v)
        kw[k] = v
    for k, v in data.get("paths", {}).items():
        kw[k] = str(v)
    try:
        circuit = CircuitParams(**{CIRCUIT_KEYS[k]: v for k, v in data.get("circuit", {}).items()})
        energy = EnergyConfig(**data.get("energy", {}))
        return ExperimentConfig(circuit=circuit, energy=energy, **kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    return config_from_dict(data)


def load_config(path) -> tuple[ExperimentConfig, str]:
    """Read and validate a config file; returns the config and the raw text."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        return parse_config(text), text
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
