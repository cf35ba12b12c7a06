"""Symmetric per-tensor N-bit weight quantization.

Codes live in ``[-(2**(bits-1) - 1), 2**(bits-1) - 1]``; the most negative
two's-complement code is never used, so zero sits exactly on the grid and
the grid is odd-symmetric.  Ties round away from zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, NonFiniteWeight

QMODEL_FORMAT = "msnsim-qmodel"
QMODEL_VERSION = 1


def max_code(bits: int) -> int:
    return (1 << (bits - 1)) - 1


@dataclass(frozen=True)
class QuantSpec:
    bits: int
    scale: float

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 2:
            raise ValueError(f"bits must be an integer >= 2, got {self.bits}")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    @property
    def qmax(self) -> int:
        return max_code(self.bits)

    @property
    def step(self) -> float:
        return self.scale / self.qmax


@dataclass
class QuantizedWeights:
    codes: np.ndarray
    spec: QuantSpec

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        if self.codes.size and np.abs(self.codes).max() > self.spec.qmax:
            raise ValueError("code outside the symmetric range")


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(weights, bits: int, scale: float | None = None) -> QuantizedWeights:
    """Quantize with max-abs calibration (or a given ``scale``).

    An all-zero tensor gets scale 1 and all-zero codes.
    """
    w = np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise NonFiniteWeight("weights contain NaN or inf")
    if scale is None:
        scale = float(np.abs(w).max()) if w.size else 0.0
        if scale == 0.0:
            scale = 1.0
    spec = QuantSpec(int(bits), float(scale))
    codes = round_half_away(w * spec.qmax / spec.scale)
    np.clip(codes, -spec.qmax, spec.qmax, out=codes)
    return QuantizedWeights(codes.astype(np.int64), spec)


def dequantize(q: QuantizedWeights) -> np.ndarray:
    # dividing first keeps code == +-qmax exactly at +-scale
    return (q.codes.astype(np.float64) / q.spec.qmax) * q.spec.scale


def quantization_error_sup(bits: int, scale: float) -> float:
    """Worst-case rounding error for values inside ``[-scale, scale]``."""
    return scale / (2.0 * max_code(bits))


def save_quantized(path, layers: dict[str, QuantizedWeights]) -> None:
    """Write a versioned ``.npz`` container: per tensor bits, float64 scale, int codes."""
    payload = {
        "format": np.array(QMODEL_FORMAT),
        "version": np.array(QMODEL_VERSION, dtype=np.int64),
        "names": np.array(list(layers), dtype=str),
    }
    for i, q in enumerate(layers.values()):
        payload[f"bits_{i}"] = np.array(q.spec.bits, dtype=np.int64)
        payload[f"scale_{i}"] = np.array(q.spec.scale, dtype=np.float64)
        payload[f"codes_{i}"] = q.codes.astype(np.int32 if q.spec.bits <= 31 else np.int64)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_quantized(path) -> dict[str, QuantizedWeights]:
    with np.load(Path(path), allow_pickle=False) as z:
        if str(z.get("format", "")) != QMODEL_FORMAT:
            raise FormatError(f"{path} is not a quantized-model container")
        version = int(z["version"])
        if version != QMODEL_VERSION:
            raise FormatError(f"unsupported quantized-model version {version}")
        out = {}
        for i, name in enumerate(z["names"].tolist()):
            spec = QuantSpec(int(z[f"bits_{i}"]), float(z[f"scale_{i}"]))
            out[name] = QuantizedWeights(z[f"codes_{i}"].astype(np.int64), spec)
        return out
