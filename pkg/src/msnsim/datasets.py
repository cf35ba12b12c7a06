"""MNIST (IDX) and CIFAR-10 (binary batch) loaders.

Pixels are scaled by 1/255 into [0, 1] and nothing else; any standardisation
belongs to the network.  Gzip input is detected by its magic bytes.
"""
from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadLabel, BadMagic, DimensionMismatch, TruncatedFile

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049
CIFAR_RECORD = 3073
CIFAR_SIDE = 32
GZIP_MAGIC = b"\x1f\x8b"

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_FILES = {
    "train": [f"data_batch_{i}.bin" for i in range(1, 6)],
    "test": ["test_batch.bin"],
}


@dataclass
class LabeledImageSet:
    images: np.ndarray  # (count, channels, height, width), float in [0, 1]
    labels: np.ndarray  # (count,) int64
    num_classes: int = 10
    name: str = ""
    codes: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise DimensionMismatch(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.images.shape[1:])

    def subset(self, index) -> "LabeledImageSet":
        codes = None if self.codes is None else self.codes[index]
        return LabeledImageSet(self.images[index], self.labels[index],
                               self.num_classes, self.name, codes)


def read_bytes(path) -> bytes:
    """Read a file, transparently gunzipping when it starts with the gzip magic."""
    raw = Path(path).read_bytes()
    if raw[:2] == GZIP_MAGIC:
        return gzip.decompress(raw)
    return raw


def _scale(codes: np.ndarray, dtype) -> np.ndarray:
    return (codes.astype(np.float64) / 255.0).astype(dtype)


def parse_idx_images(raw: bytes) -> np.ndarray:
    if len(raw) < 16:
        raise TruncatedFile(f"IDX image header needs 16 bytes, got {len(raw)}")
    magic, count, rows, cols = struct.unpack(">iiii", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise BadMagic(f"expected image magic {IDX_IMAGES_MAGIC}, found {magic}")
    need = count * rows * cols
    if len(raw) - 16 < need:
        raise TruncatedFile(f"header promises {need} pixel bytes, file has {len(raw) - 16}")
    return np.frombuffer(raw, dtype=np.uint8, count=need, offset=16).reshape(count, rows, cols)


def parse_idx_labels(raw: bytes) -> np.ndarray:
    if len(raw) < 8:
        raise TruncatedFile(f"IDX label header needs 8 bytes, got {len(raw)}")
    magic, count = struct.unpack(">ii", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise BadMagic(f"expected label magic {IDX_LABELS_MAGIC}, found {magic}")
    if len(raw) - 8 < count:
        raise TruncatedFile(f"header promises {count} labels, file has {len(raw) - 8}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)


def load_mnist(images_path, labels_path, dtype=np.float32) -> LabeledImageSet:
    """Load an MNIST image/label IDX pair; file order is preserved."""
    codes = parse_idx_images(read_bytes(images_path))
    labels = parse_idx_labels(read_bytes(labels_path))
    if codes.shape[0] != labels.shape[0]:
        raise DimensionMismatch(f"{codes.shape[0]} images vs {labels.shape[0]} labels")
    codes = codes[:, None, :, :]
    return LabeledImageSet(_scale(codes, dtype), labels.astype(np.int64), 10, "mnist", codes)


def encode_idx_images(codes: np.ndarray) -> bytes:
    codes = np.asarray(codes, dtype=np.uint8)
    count, rows, cols = codes.shape
    return struct.pack(">iiii", IDX_IMAGES_MAGIC, count, rows, cols) + codes.tobytes()


def encode_idx_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">ii", IDX_LABELS_MAGIC, labels.size) + labels.tobytes()


def parse_cifar10(raw: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(raw) % CIFAR_RECORD:
        raise TruncatedFile(f"{len(raw)} bytes is not a multiple of {CIFAR_RECORD}")
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0]
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise BadLabel(f"record {bad} has label byte {labels[bad]}")
    codes = rec[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE)
    return codes, labels


def load_cifar10(batch_paths, dtype=np.float32) -> LabeledImageSet:
    """Concatenate CIFAR-10 binary batches in the given order."""
    parts = [parse_cifar10(read_bytes(p)) for p in batch_paths]
    if parts:
        codes = np.concatenate([c for c, _ in parts])
        labels = np.concatenate([lab for _, lab in parts])
    else:
        codes = np.zeros((0, 3, CIFAR_SIDE, CIFAR_SIDE), dtype=np.uint8)
        labels = np.zeros(0, dtype=np.uint8)
    return LabeledImageSet(_scale(codes, dtype), labels.astype(np.int64), 10, "cifar10", codes)


def encode_cifar10(codes: np.ndarray, labels) -> bytes:
    codes = np.asarray(codes, dtype=np.uint8).reshape(-1, 3 * CIFAR_SIDE * CIFAR_SIDE)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    return np.concatenate([labels, codes], axis=1).tobytes()


def shuffled_indices(count: int, seed: int) -> np.ndarray:
    """Deterministic permutation of ``0 .. count-1``."""
    if count < 0:
        raise ValueError("count must be >= 0")
    return np.random.default_rng(seed).permutation(count)


def _find(root: Path, name: str) -> Path:
    # accept the official names, the dotted variant and gzipped copies
    candidates = [name, name.replace("-idx", ".idx"), name + ".gz",
                  name.replace("-idx", ".idx") + ".gz"]
    for cand in candidates:
        p = root / cand
        if p.exists():
            return p
    raise FileNotFoundError(f"no {name} (or gzip/dotted variant) under {root}")


def default_data_root() -> Path | None:
    env = os.environ.get("MSN_DATA_DIR")
    return Path(env) if env else None


def load_split(dataset: str, split: str, root=None) -> LabeledImageSet:
    """Load ``train`` or ``test`` split of ``mnist`` / ``cifar10`` from a directory."""
    root = Path(root) if root is not None else default_data_root()
    if root is None:
        raise FileNotFoundError(f"no data directory given for {dataset} and MSN_DATA_DIR unset")
    if dataset == "mnist":
        img, lab = MNIST_FILES[split]
        base = root / "mnist" if (root / "mnist").is_dir() else root
        return load_mnist(_find(base, img), _find(base, lab))
    if dataset == "cifar10":
        sub = root / "cifar-10-batches-bin"
        base = sub if sub.is_dir() else root
        return load_cifar10([_find(base, n) for n in CIFAR_FILES[split]])
    raise ValueError(f"unknown dataset {dataset!r}")
