"""(K+1)-way classifier: an Mlp trunk producing features, then a linear head.

Classes ``0 .. K-1`` are real; index ``K`` is the fake class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .nets import BoundMlp, DenseLayer, Mlp, bind_mlp, init_params, mlp_forward, mlp_forward_tape

CLF_PREFIX = "classifier."


@dataclass(frozen=True)
class ClassifierModel:
    trunk: Mlp
    head: DenseLayer
    num_classes: int  # K, real classes only

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError(f"need at least one real class, got {self.num_classes}")
        if self.head.out_dim != self.num_classes + 1:
            raise ValueError(f"head emits {self.head.out_dim} logits, expected {self.num_classes + 1}")
        feat = self.trunk.out_dim if self.trunk.layers else self.head.in_dim
        if feat != self.head.in_dim:
            raise ValueError(f"trunk emits {feat} features, head expects {self.head.in_dim}")

    @property
    def in_dim(self) -> int:
        return self.trunk.in_dim if self.trunk.layers else self.head.in_dim

    @property
    def net(self) -> Mlp:
        """Trunk and head as one Mlp (head is the last layer)."""
        return Mlp(self.trunk.layers + (self.head,))


def make_classifier(
    in_dim: int,
    num_classes: int,
    hidden: Sequence[int] = (128, 128),
    activation: str = "leaky_relu",
    seed: int = 0,
) -> ClassifierModel:
    sizes = [in_dim, *hidden, num_classes + 1]
    acts = [activation] * len(hidden) + ["linear"]
    net = init_params(sizes, acts, seed)
    return ClassifierModel(Mlp(net.layers[:-1]), net.layers[-1], num_classes)


def features(clf: ClassifierModel, x: np.ndarray) -> np.ndarray:
    return mlp_forward(clf.trunk, x)


def logits(clf: ClassifierModel, x: np.ndarray) -> np.ndarray:
    return mlp_forward(clf.net, x)


def log_probs(clf: ClassifierModel, x: np.ndarray) -> np.ndarray:
    z = logits(clf, x)
    m = np.max(z, axis=-1, keepdims=True)
    return z - m - np.log(np.sum(np.exp(z - m), axis=-1, keepdims=True))


def predict_class(clf: ClassifierModel, x: np.ndarray) -> np.ndarray | int:
    """Argmax over the real-class logits; ties go to the lowest index."""
    z = logits(clf, x)
    pred = np.argmax(z[..., : clf.num_classes], axis=-1)
    return int(pred) if np.ndim(pred) == 0 else pred


def predict_from_logits(z: np.ndarray, num_classes: int) -> np.ndarray:
    return np.argmax(np.asarray(z)[..., :num_classes], axis=-1)


# ---------------------------------------------------------------------------
# Tape
# ---------------------------------------------------------------------------


def bind_classifier(tape: ad.Tape, clf: ClassifierModel, trainable: bool = True) -> BoundMlp:
    return bind_mlp(tape, clf.net, CLF_PREFIX, trainable)


def classifier_tape(
    net: BoundMlp, x: ad.Var, tangents: ad.Var | None = None
) -> tuple[ad.Var, ad.Var, ad.Var | None]:
    """Record (features, logits, logit tangents) for a batch."""
    n_trunk = len(net.weights) - 1
    feats, t = mlp_forward_tape(net, x, tangents, upto=n_trunk)
    head = BoundMlp(net.weights[-1:], net.biases[-1:], net.activations[-1:])
    out, t = mlp_forward_tape(head, feats, t)
    return feats, out, t
