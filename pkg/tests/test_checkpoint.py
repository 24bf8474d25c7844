import struct

import numpy as np
import pytest

from lgan.checkpoint import (
    BadMagicError,
    CheckpointError,
    DuplicateNameError,
    Models,
    TruncatedCheckpointError,
    UnsupportedVersionError,
    decode_tensors,
    encode_tensors,
    load_checkpoint,
    load_tensors,
    save_checkpoint,
)
from lgan.classifier import make_classifier
from lgan.geometry import make_local_generator
from lgan.nets import param_flatten
from lgan.training import make_discriminator


def bits(a):
    return np.ascontiguousarray(a, dtype=np.float64).view(np.uint64)


def test_tensor_round_trip_is_bit_exact():
    rng = np.random.default_rng(0)
    tensors = {
        "scalar": np.array(np.pi),
        "vec": rng.normal(size=5),
        "mat": rng.normal(size=(3, 4)) * 1e300,
        "odd": np.array([-0.0, np.nextafter(0, 1), 1 / 3]),
        "empty": np.zeros((0, 2)),
    }
    back = decode_tensors(encode_tensors(tensors))
    assert list(back) == list(tensors)
    for k in tensors:
        assert back[k].shape == tensors[k].shape
        np.testing.assert_array_equal(bits(back[k]), bits(tensors[k]))


def test_model_round_trip(tmp_path):
    models = Models(
        make_local_generator(3, 2, (5, 4), "sigmoid", 1),
        make_discriminator(3, (6,), "tanh", 2),
        make_classifier(3, 4, (7,), "leaky_relu", 3),
        np.random.default_rng(0).normal(size=(8, 3)),
    )
    path = tmp_path / "m.ckpt"
    save_checkpoint(models, path)
    back = load_checkpoint(path)
    assert back.generator.coord_dim == 2 and back.classifier.num_classes == 4
    assert back.generator.core.activations == models.generator.core.activations
    for a, b in ((models.generator.core, back.generator.core), (models.discriminator, back.discriminator),
                 (models.classifier.net, back.classifier.net)):
        for x, y in zip(param_flatten(a).values(), param_flatten(b).values()):
            np.testing.assert_array_equal(bits(x), bits(y))
    np.testing.assert_array_equal(back.points, models.points)


def test_partial_bundle(tmp_path):
    path = tmp_path / "g.ckpt"
    save_checkpoint(Models(generator=make_local_generator(2, 1, seed=0)), path)
    back = load_checkpoint(path)
    assert back.discriminator is None and back.classifier is None and back.points is None


def test_error_kinds(tmp_path):
    good = encode_tensors({"a": np.arange(6.0).reshape(2, 3)})
    with pytest.raises(BadMagicError):
        decode_tensors(b"XGAN" + good[4:])
    with pytest.raises(UnsupportedVersionError):
        decode_tensors(good[:4] + struct.pack("<I", 2) + good[8:])
    with pytest.raises(TruncatedCheckpointError, match="expected 48 bytes"):
        decode_tensors(good[:-5])
    dup = encode_tensors({"a": np.ones(1)})
    body = dup[12:]
    with pytest.raises(DuplicateNameError):
        decode_tensors(dup[:8] + struct.pack("<I", 2) + body + body)
    with pytest.raises(CheckpointError, match="trailing"):
        decode_tensors(good + b"\0")
    path = tmp_path / "x.ckpt"
    path.write_bytes(good)
    assert list(load_tensors(path)) == ["a"]
    with pytest.raises(CheckpointError, match="consistent"):
        load_checkpoint(_with_meta_only(tmp_path))


def _with_meta_only(tmp_path):
    path = tmp_path / "broken.ckpt"
    save_checkpoint({"generator.meta": np.array([2.0, 1.0])}, path)
    return path
