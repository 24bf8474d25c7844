"""Binary checkpoints of named float64 tensors.

Layout (little-endian throughout)::

    b"LGAN"  u32 version  u32 tensor_count
    per tensor:  u32 name_len  name (UTF-8)  u32 rank  u64 extent * rank
                 f64 * prod(extents)   (row-major)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .classifier import CLF_PREFIX, ClassifierModel
from .geometry import GEN_PREFIX, LocalGenerator
from .nets import ACTIVATIONS, Mlp, param_flatten, param_unflatten
from .training import DISC_PREFIX

MAGIC = b"LGAN"
VERSION = 1


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class DuplicateNameError(CheckpointError):
    pass


def encode_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, value in tensors.items():
        arr = np.array(value, dtype="<f8", order="C")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{arr.ndim}Q", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedCheckpointError(
                f"truncated reading {what}: expected {n} bytes at offset {self.pos}, "
                f"{len(self.buf) - self.pos} available"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_tensors(buf: bytes) -> dict[str, np.ndarray]:
    r = _Reader(buf)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise BadMagicError(f"bad checkpoint magic {magic!r}, expected {MAGIC!r}")
    version, count = r.unpack("<II", "header")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version} (reader supports {VERSION})")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<I", "name length")
        name = r.take(name_len, "name").decode("utf-8")
        if name in tensors:
            raise DuplicateNameError(f"duplicate tensor name {name!r}")
        (rank,) = r.unpack("<I", f"rank of {name!r}")
        shape = r.unpack(f"<{rank}Q", f"extents of {name!r}")
        size = int(np.prod(shape, dtype=np.int64))
        data = r.take(8 * size, f"data of {name!r}")
        tensors[name] = np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(buf):
        raise CheckpointError(f"{len(buf) - r.pos} trailing bytes after {count} tensors")
    return tensors


# ---------------------------------------------------------------------------
# Model bundles
# ---------------------------------------------------------------------------


@dataclass
class Models:
    generator: LocalGenerator | None = None
    discriminator: Mlp | None = None
    classifier: ClassifierModel | None = None
    points: np.ndarray | None = None  # training points, used as base points by the CLI


def _act_codes(net: Mlp) -> np.ndarray:
    return np.array([ACTIVATIONS.index(a) for a in net.activations], dtype=np.float64)


def _acts(codes: np.ndarray) -> list[str]:
    return [ACTIVATIONS[int(c)] for c in codes]


def models_to_tensors(models: Models) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    if models.generator is not None:
        gen = models.generator
        out["generator.meta"] = np.array([gen.ambient_dim, gen.coord_dim], dtype=np.float64)
        out["generator.activations"] = _act_codes(gen.core)
        out.update(param_flatten(gen.core, GEN_PREFIX))
    if models.discriminator is not None:
        out["discriminator.activations"] = _act_codes(models.discriminator)
        out.update(param_flatten(models.discriminator, DISC_PREFIX))
    if models.classifier is not None:
        clf = models.classifier
        out["classifier.meta"] = np.array([clf.num_classes], dtype=np.float64)
        out["classifier.activations"] = _act_codes(clf.net)
        out.update(param_flatten(clf.net, CLF_PREFIX))
    if models.points is not None:
        out["data.points"] = np.asarray(models.points, dtype=np.float64)
    return out


def tensors_to_models(t: Mapping[str, np.ndarray]) -> Models:
    try:
        models = Models()
        if "generator.meta" in t:
            d, n = (int(v) for v in t["generator.meta"])
            core = param_unflatten(t, _acts(t["generator.activations"]), GEN_PREFIX)
            models.generator = LocalGenerator(core, d, n)
        if "discriminator.activations" in t:
            models.discriminator = param_unflatten(t, _acts(t["discriminator.activations"]), DISC_PREFIX)
        if "classifier.meta" in t:
            net = param_unflatten(t, _acts(t["classifier.activations"]), CLF_PREFIX)
            models.classifier = ClassifierModel(Mlp(net.layers[:-1]), net.layers[-1], int(t["classifier.meta"][0]))
        if "data.points" in t:
            models.points = np.array(t["data.points"])
    except (KeyError, IndexError, ValueError) as exc:
        raise CheckpointError(f"checkpoint does not describe a consistent model: {exc}") from exc
    return models


def save_checkpoint(models: Models | Mapping[str, np.ndarray], path: str | Path) -> None:
    tensors = models_to_tensors(models) if isinstance(models, Models) else models
    Path(path).write_bytes(encode_tensors(tensors))


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    return decode_tensors(Path(path).read_bytes())


def load_checkpoint(path: str | Path) -> Models:
    return tensors_to_models(load_tensors(path))
