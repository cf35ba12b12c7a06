import gzip
import os
from pathlib import Path

import numpy as np
import pytest

from msnsim.datasets import encode_cifar10, encode_idx_images, encode_idx_labels

ROOT = Path(__file__).resolve().parents[1]


def real_mnist_dir() -> Path | None:
    for cand in (os.environ.get("MSN_DATA_DIR"), "/root/data/mnist", str(ROOT / "data" / "mnist")):
        if cand and (Path(cand) / "t10k-labels.idx1-ubyte").exists() or (
                cand and (Path(cand) / "t10k-labels-idx1-ubyte").exists()):
            return Path(cand)
    return None


def write_mnist(root: Path, n_train=64, n_test=32, seed=0, gz=False) -> Path:
    """Synthetic MNIST-format split whose label is readable from the image."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    for split, n, names in (("train", n_train, ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")),
                            ("test", n_test, ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"))):
        labels = rng.integers(0, 10, n)
        codes = rng.integers(0, 40, (n, 28, 28)).astype(np.uint8)
        for i, lab in enumerate(labels):
            codes[i, 2 * lab:2 * lab + 4, 4:24] = 255
        blobs = (encode_idx_images(codes), encode_idx_labels(labels))
        for name, blob in zip(names, blobs):
            if gz:
                (root / (name + ".gz")).write_bytes(gzip.compress(blob))
            else:
                (root / name).write_bytes(blob)
    return root


def write_cifar(root: Path, per_batch=8, seed=0) -> Path:
    rng = np.random.default_rng(seed)
    sub = root / "cifar-10-batches-bin"
    sub.mkdir(parents=True, exist_ok=True)
    for name in [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]:
        codes = rng.integers(0, 256, (per_batch, 3, 32, 32)).astype(np.uint8)
        (sub / name).write_bytes(encode_cifar10(codes, rng.integers(0, 10, per_batch)))
    return root


@pytest.fixture
def mnist_dir(tmp_path):
    return write_mnist(tmp_path / "mnist")


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
