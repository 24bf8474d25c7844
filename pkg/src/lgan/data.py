"""Datasets: synthetic manifolds, IDX and CSV ingestion, labeled/unlabeled splits."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray  # (n, D)
    labels: np.ndarray | None = None  # (n,) integer class indices
    name: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError(f"points must be an (n, D) matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (pts.shape[0],):
                raise ValueError(f"{lab.shape[0] if lab.ndim else 0} labels for {pts.shape[0]} points")
            if lab.size and (np.any(lab < 0) or np.any(lab != np.round(lab))):
                raise ValueError("labels must be non-negative integers")
            object.__setattr__(self, "labels", lab.astype(np.int64))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def num_classes(self) -> int:
        return 0 if self.labels is None or not self.labels.size else int(self.labels.max()) + 1


def make_circle(
    n: int,
    radius: float = 1.0,
    noise_sd: float = 0.0,
    rng: np.random.Generator | None = None,
    deterministic_angles: bool = False,
) -> Dataset:
    if n < 0 or radius <= 0 or noise_sd < 0:
        raise ValueError(f"invalid circle parameters n={n}, radius={radius}, noise_sd={noise_sd}")
    rng = np.random.default_rng() if rng is None else rng
    if deterministic_angles:
        theta = 2.0 * np.pi * np.arange(n) / max(n, 1)
    else:
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    if noise_sd > 0:
        pts = pts + rng.normal(0.0, noise_sd, size=pts.shape)
    return Dataset(pts.reshape(n, 2), name="circle")


def make_two_moons(
    n_per_class: int, noise_sd: float = 0.05, rng: np.random.Generator | None = None
) -> Dataset:
    """Class 0 on (cos t, sin t), class 1 on (1 - cos t, 0.5 - sin t), t ~ U[0, pi]."""
    if n_per_class < 0:
        raise ValueError(f"n_per_class must be non-negative, got {n_per_class}")
    rng = np.random.default_rng() if rng is None else rng
    t = rng.uniform(0.0, np.pi, size=2 * n_per_class)
    t0, t1 = t[:n_per_class], t[n_per_class:]
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    pts = np.concatenate([upper, lower]).reshape(2 * n_per_class, 2)
    if noise_sd > 0:
        pts = pts + rng.normal(0.0, noise_sd, size=pts.shape)
    labels = np.repeat([0, 1], n_per_class)
    return Dataset(pts, labels, name="two_moons")


# ---------------------------------------------------------------------------
# IDX
# ---------------------------------------------------------------------------


def parse_idx(buf: bytes) -> np.ndarray:
    """Decode IDX bytes: labels as a 1-D array, images flattened to (count, rows*cols) in [0, 1]."""
    if len(buf) < 8:
        raise DataFormatError(f"IDX header truncated: {len(buf)} bytes")
    (magic,) = struct.unpack(">I", buf[:4])
    if magic == IDX_LABELS:
        ndim = 1
    elif magic == IDX_IMAGES:
        ndim = 3
    else:
        raise DataFormatError(f"bad IDX magic 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise DataFormatError(f"IDX header truncated: expected {header} bytes, got {len(buf)}")
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    expected = int(np.prod(dims))
    payload = len(buf) - header
    if payload < expected:
        raise DataFormatError(f"IDX payload truncated: expected {expected} bytes, got {payload}")
    raw = np.frombuffer(buf, dtype=np.uint8, count=expected, offset=header)
    if ndim == 1:
        return raw.astype(np.int64)
    return raw.reshape(dims[0], dims[1] * dims[2]).astype(np.float64) / 255.0


def load_idx(path: str | Path) -> np.ndarray:
    return parse_idx(Path(path).read_bytes())


def encode_idx_labels(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels)
    return struct.pack(">II", IDX_LABELS, labels.size) + labels.astype(np.uint8).tobytes()


def encode_idx_images(images: np.ndarray, rows: int, cols: int) -> bytes:
    """Inverse of :func:`parse_idx` for images whose values are multiples of 1/255."""
    images = np.asarray(images, dtype=np.float64).reshape(-1, rows * cols)
    raw = np.rint(images * 255.0).astype(np.uint8)
    return struct.pack(">IIII", IDX_IMAGES, images.shape[0], rows, cols) + raw.tobytes()


def load_idx_dataset(images_path: str | Path, labels_path: str | Path | None = None) -> Dataset:
    points = load_idx(images_path)
    if points.ndim != 2:
        raise DataFormatError(f"{images_path} holds labels, not images")
    labels = None if labels_path is None else load_idx(labels_path)
    return Dataset(points, labels, name=Path(images_path).stem)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def load_csv(path: str | Path, has_label_column: bool = False) -> Dataset:
    rows, labels = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataFormatError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                col = next(i for i, cell in enumerate(row) if not _is_float(cell))
                raise DataFormatError(
                    f"{path}: non-numeric cell {row[col]!r} at row {lineno}, column {col + 1}"
                ) from None
            if has_label_column:
                label = values.pop()
                if label != int(label):
                    raise DataFormatError(f"{path}: label {label} at row {lineno} is not an integer")
                labels.append(int(label))
            rows.append(values)
    dim = (width or 0) - (1 if has_label_column else 0)
    points = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return Dataset(points, np.array(labels, dtype=np.int64) if has_label_column else None, Path(path).stem)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def split_labeled(
    ds: Dataset, per_class: int, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    """Keep ``per_class`` examples of each class labeled; strip labels from the rest.

    Both parts preserve the original row order.
    """
    if ds.labels is None:
        raise ValueError("split_labeled needs a labeled dataset")
    if per_class < 0:
        raise ValueError(f"per_class must be non-negative, got {per_class}")
    chosen = []
    for cls in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == cls)
        if per_class > len(members):
            raise ValueError(f"class {cls} has {len(members)} examples, {per_class} requested")
        chosen.append(rng.choice(members, size=per_class, replace=False))
    mask = np.zeros(len(ds), dtype=bool)
    if chosen:
        mask[np.concatenate(chosen).astype(np.int64)] = True
    labeled = Dataset(ds.points[mask], ds.labels[mask], f"{ds.name}-labeled")
    unlabeled = Dataset(ds.points[~mask], None, f"{ds.name}-unlabeled")
    return labeled, unlabeled
