"""Multilayer perceptrons: plain numpy inference and tape-recorded evaluation.

Weights are stored ``(out, in)``; a layer computes ``act(x @ W.T + b)`` row-wise.
The tape path can additionally push tangent vectors forward through the
network (forward-mode directional derivatives recorded as ordinary tape
operations), which is how Jacobian-based penalties stay first-order
differentiable with respect to the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad

ACTIVATIONS = ("linear", "leaky_relu", "tanh", "sigmoid")

_NUMPY_ACT = {
    "linear": lambda a: a,
    "leaky_relu": ad.leaky_relu,
    "tanh": np.tanh,
    "sigmoid": ad.sigmoid,
}


@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise ValueError(f"weights {w.shape} and bias {b.shape} do not form a layer")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        pre = np.einsum("...i,oi->...o", x, self.weights) + self.bias
        return _NUMPY_ACT[self.activation](pre)


@dataclass(frozen=True)
class Mlp:
    layers: tuple[DenseLayer, ...] = ()

    def __post_init__(self):
        layers = tuple(self.layers)
        for i in range(len(layers) - 1):
            if layers[i].out_dim != layers[i + 1].in_dim:
                raise ValueError(
                    f"layer {i} outputs {layers[i].out_dim} values but layer {i + 1} "
                    f"expects {layers[i + 1].in_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def activations(self) -> tuple[str, ...]:
        return tuple(layer.activation for layer in self.layers)


def mlp_forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Evaluate on a single vector or row-wise on a batch matrix."""
    x = np.asarray(x, dtype=np.float64)
    if not net.layers:
        return x
    if x.ndim not in (1, 2) or x.shape[-1] != net.in_dim:
        raise ValueError(f"input of shape {x.shape} does not match network input width {net.in_dim}")
    for layer in net.layers:
        x = layer(x)
    return x


def init_params(
    sizes: Sequence[int], activations: str | Sequence[str], seed: int
) -> Mlp:
    """Uniform fan-based initialization, zero biases.

    ``sizes`` lists layer widths from input to output; ``activations`` gives one
    activation per layer (a single string applies to all).  Weights of a layer
    are drawn from U[-s, s] with s = sqrt(6 / (fan_in + fan_out)).
    """
    sizes = [int(s) for s in sizes]
    if any(s <= 0 for s in sizes):
        raise ValueError(f"layer widths must be positive, got {sizes}")
    n_layers = max(len(sizes) - 1, 0)
    if isinstance(activations, str):
        activations = [activations] * n_layers
    if len(activations) != n_layers:
        raise ValueError(f"{len(activations)} activations given for {n_layers} layers")
    rng = np.random.default_rng(np.uint64(seed % 2**64))
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-s, s, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return Mlp(tuple(layers))


def param_flatten(net: Mlp, prefix: str = "") -> dict[str, np.ndarray]:
    params = {}
    for i, layer in enumerate(net.layers):
        params[f"{prefix}layer{i}.weights"] = layer.weights
        params[f"{prefix}layer{i}.bias"] = layer.bias
    return params


def param_unflatten(
    params: Mapping[str, np.ndarray], activations: Sequence[str], prefix: str = ""
) -> Mlp:
    """Inverse of :func:`param_flatten` given the per-layer activations."""
    return Mlp(
        tuple(
            DenseLayer(
                np.array(params[f"{prefix}layer{i}.weights"]),
                np.array(params[f"{prefix}layer{i}.bias"]),
                act,
            )
            for i, act in enumerate(activations)
        )
    )


# ---------------------------------------------------------------------------
# Tape evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundMlp:
    """An Mlp whose parameters live on a tape (as leaves or constants)."""

    weights: tuple[ad.Var, ...]
    biases: tuple[ad.Var, ...]
    activations: tuple[str, ...]


def bind_mlp(tape: ad.Tape, net: Mlp, prefix: str, trainable: bool = True) -> BoundMlp:
    """Place ``net``'s parameters on ``tape``, named as in :func:`param_flatten`."""
    ws, bs = [], []
    for name, value in param_flatten(net, prefix).items():
        var = tape.leaf(name, value) if trainable else tape.const(value)
        (ws if name.endswith("weights") else bs).append(var)
    return BoundMlp(tuple(ws), tuple(bs), net.activations)


def _act_tape(act: str, pre: ad.Var) -> ad.Var:
    if act == "linear":
        return pre
    if act == "leaky_relu":
        return ad.leaky_relu_op(pre)
    if act == "tanh":
        return ad.tanh(pre)
    return ad.sigmoid_op(pre)


def _act_derivative_tape(act: str, pre: ad.Var, out: ad.Var) -> ad.Var | None:
    if act == "linear":
        return None
    if act == "leaky_relu":
        return ad.leaky_relu_slope_op(pre)
    if act == "tanh":
        return ad.affine(ad.mul(out, out), -1.0, 1.0)
    return ad.mul(out, ad.affine(out, -1.0, 1.0))


def mlp_forward_tape(
    net: BoundMlp,
    x: ad.Var,
    tangents: ad.Var | None = None,
    upto: int | None = None,
) -> tuple[ad.Var, ad.Var | None]:
    """Record the forward pass (optionally of the first ``upto`` layers).

    ``x`` is ``(batch, in)``.  ``tangents``, if given, is ``(batch, n, in)``:
    ``n`` input directions per row.  The second return value holds the
    matching output directional derivatives, ``(batch, n, out)``.
    """
    n_layers = len(net.weights) if upto is None else upto
    h, t = x, tangents
    for w, b, act in list(zip(net.weights, net.biases, net.activations))[:n_layers]:
        pre = ad.add_bias(ad.matmul_t(h, w), b)
        out = _act_tape(act, pre)
        if t is not None:
            t = ad.matmul_t(t, w)
            deriv = _act_derivative_tape(act, pre, out)
            if deriv is not None:
                t = ad.mul(t, ad.expand(deriv, -2, t.shape[-2]))
        h = out
    return h, t
