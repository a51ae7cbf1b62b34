"""IDX (MNIST) reading/writing and the digit-class positive/negative splits."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import Dataset, SplitSpec

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
SIDE = 28
HELDOUT_DIGIT = 5
HELDOUT_POOL = 200

SCENARIO_DIGITS = {
    "mnist-even-odd": ((0, 2, 4, 6, 8), (1, 3, 5, 7, 9)),
    "mnist-overlap": ((1, 2, 4, 5, 7, 9), (0, 2, 3, 6, 8, 9)),
}


class IdxError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IdxDataset:
    images: np.ndarray  # (n, 28, 28) uint8
    labels: np.ndarray  # (n,) uint8

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise IdxError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")

    def __len__(self) -> int:
        return self.labels.shape[0]


def _header(data: bytes, magic: int, ndim: int, what: str) -> tuple[int, ...]:
    size = 4 * (1 + ndim)
    if len(data) < size:
        raise IdxError(f"truncated {what} header ({len(data)} bytes)")
    got, *dims = struct.unpack(f">{1 + ndim}I", data[:size])
    if got != magic:
        raise IdxError(f"bad {what} magic 0x{got:08x}, expected 0x{magic:08x}")
    payload = int(np.prod(dims))
    if len(data) != size + payload:
        raise IdxError(f"{what} payload is {len(data) - size} bytes, header says {payload}")
    return tuple(dims)


def parse_idx_images(data: bytes) -> np.ndarray:
    n, rows, cols = _header(data, IMAGE_MAGIC, 3, "image")
    if (rows, cols) != (SIDE, SIDE):
        raise IdxError(f"expected {SIDE}x{SIDE} images, got {rows}x{cols}")
    return np.frombuffer(data, dtype=np.uint8, offset=16).reshape(n, rows, cols).copy()


def parse_idx_labels(data: bytes) -> np.ndarray:
    (n,) = _header(data, LABEL_MAGIC, 1, "label")
    labels = np.frombuffer(data, dtype=np.uint8, offset=8).copy()
    if labels.size and labels.max() > 9:
        raise IdxError("labels must be digits 0-9")
    return labels


def parse_idx(image_bytes: bytes, label_bytes: bytes) -> IdxDataset:
    return IdxDataset(parse_idx_images(image_bytes), parse_idx_labels(label_bytes))


def write_idx_images(images) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">4I", IMAGE_MAGIC, n, rows, cols) + images.tobytes()


def write_idx_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    return struct.pack(">2I", LABEL_MAGIC, labels.size) + labels.tobytes()


def load_idx(image_path, label_path) -> IdxDataset:
    return parse_idx(Path(image_path).read_bytes(), Path(label_path).read_bytes())


def downsample(images) -> np.ndarray:
    """2x2 mean pooling to 14x14, flattened and scaled from [0, 255] to [-1, 1]."""
    x = np.asarray(images, dtype=np.float64)
    n = x.shape[0]
    pooled = x.reshape(n, SIDE // 2, 2, SIDE // 2, 2).mean(axis=(2, 4))
    return (pooled / 255.0 * 2.0 - 1.0).reshape(n, -1)


def _pick(dataset: IdxDataset, digits) -> np.ndarray:
    return downsample(dataset.images[np.isin(dataset.labels, digits)])


def make_mnist_split(dataset: IdxDataset, scenario: str, seed: int = 0) -> SplitSpec:
    """Digit-class split; ``mnist-heldout`` keeps a seeded 200-image pool of digit 5."""
    dim = (SIDE // 2) ** 2
    if scenario in SCENARIO_DIGITS:
        pos_d, neg_d = SCENARIO_DIGITS[scenario]
        mode = "disjoint" if scenario == "mnist-even-odd" else "overlapping"
        return SplitSpec(Dataset(_pick(dataset, pos_d), dim, "positive"),
                         Dataset(_pick(dataset, neg_d), dim, "negative"), mode, name=scenario)
    if scenario == "mnist-heldout":
        parent = _pick(dataset, [HELDOUT_DIGIT])
        if parent.shape[0] < HELDOUT_POOL:
            raise IdxError(f"only {parent.shape[0]} images of digit {HELDOUT_DIGIT}; need {HELDOUT_POOL}")
        rng = np.random.default_rng([int(seed), 0x5EED])
        idx = np.sort(rng.choice(parent.shape[0], size=HELDOUT_POOL, replace=False))
        rest = [d for d in range(10) if d != HELDOUT_DIGIT]
        return SplitSpec(Dataset(parent[idx], dim, "minority-pool"),
                         Dataset(_pick(dataset, rest), dim, "negative"), "unbalanced",
                         HELDOUT_POOL / parent.shape[0], Dataset(parent, dim, "parent"), scenario)
    raise ValueError(f"unknown MNIST scenario {scenario!r}")


def synthetic_dataset(n: int = 2400, seed: int = 0) -> IdxDataset:
    """Deterministic stand-in with MNIST's layout: a blob per digit plus noise."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n, dtype=np.uint8) % 10
    rng.shuffle(labels)
    yy, xx = np.mgrid[:SIDE, :SIDE]
    images = np.empty((n, SIDE, SIDE), dtype=np.uint8)
    for i, d in enumerate(labels):
        cy, cx = 8 + 12 * (d // 5), 4 + 5 * (d % 5)
        blob = 255.0 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / 18.0)
        images[i] = np.clip(blob + rng.normal(0, 12, size=(SIDE, SIDE)), 0, 255).astype(np.uint8)
    return IdxDataset(images, labels)


def write_fixtures(out_dir, n: int = 2400, seed: int = 0) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = synthetic_dataset(n, seed)
    img, lab = out / "images-idx3-ubyte", out / "labels-idx1-ubyte"
    img.write_bytes(write_idx_images(ds.images))
    lab.write_bytes(write_idx_labels(ds.labels))
    return img, lab
