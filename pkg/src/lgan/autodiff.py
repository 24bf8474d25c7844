"""Reverse-mode automatic differentiation over a recorded expression tape.

Values are plain ``numpy.float64`` arrays.  A :class:`Tape` records every
operation applied to its variables in execution order, so the recorded graph
can be replayed against new leaf bindings (:meth:`Tape.forward_eval`) and
differentiated (:meth:`Tape.backward`).

Matrix products go through ``numpy.einsum`` rather than BLAS: each output row
then depends only on its own input row, which keeps batched and per-row
evaluations bit-identical.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

LEAKY_SLOPE = 0.2


class ShapeError(ValueError):
    """Operand shapes are incompatible for an operation."""


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or infinity."""


def as_array(value: Any) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


# ---------------------------------------------------------------------------
# Operation kinds.  Each kind has a forward rule and a vector-Jacobian rule
# mapping the output cotangent to one cotangent per input.
# ---------------------------------------------------------------------------


def _same_shape(name: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} differ")


def _fw_add(vals, attrs):
    _same_shape("add", *vals)
    return vals[0] + vals[1]


def _fw_sub(vals, attrs):
    _same_shape("sub", *vals)
    return vals[0] - vals[1]


def _fw_mul(vals, attrs):
    _same_shape("mul", *vals)
    return vals[0] * vals[1]


def _fw_affine(vals, attrs):
    return attrs["scale"] * vals[0] + attrs["shift"]


_LETTERS = "abcdefghijklmnop"


def _matmul_subscripts(a: np.ndarray, b: np.ndarray, transpose_b: bool) -> str:
    """einsum subscripts contracting the last axis of ``a`` ("y") with ``b``.

    ``b`` is a vector, a matrix shared across all leading axes of ``a``, or a
    stack of matrices carrying exactly the leading (batch) axes of ``a``.
    """
    name = "matmul_t" if transpose_b else "matmul"
    if a.ndim == 0 or b.ndim == 0:
        raise ShapeError(f"{name}: rank-0 operand, shapes {a.shape} and {b.shape}")
    b_mat = "zy" if transpose_b else "yz"
    if b.ndim == 1:
        lead = _LETTERS[: a.ndim - 1]
        subs = f"{lead}y,y->{lead}"
    elif b.ndim == 2:
        lead = _LETTERS[: a.ndim - 1]
        subs = f"{lead}y,{b_mat}->{lead}z"
    elif b.ndim == a.ndim and b.shape[:-2] == a.shape[:-2]:
        lead = _LETTERS[: a.ndim - 2]
        subs = f"{lead}xy,{lead}{b_mat}->{lead}xz"
    else:
        raise ShapeError(f"{name}: batch shapes {a.shape} and {b.shape} incompatible")
    k = b.shape[-1] if (transpose_b or b.ndim == 1) else b.shape[-2]
    if a.shape[-1] != k:
        raise ShapeError(f"{name}: inner extents differ, shapes {a.shape} and {b.shape}")
    return subs


def _fw_matmul(vals, attrs):
    a, b = vals
    subs = _matmul_subscripts(a, b, attrs["transpose_b"])
    attrs["subscripts"] = subs
    return np.einsum(subs, a, b)


def _vjp_matmul(g, vals, out, attrs):
    a, b = vals
    a_sub, rest = attrs["subscripts"].split(",")
    b_sub, o_sub = rest.split("->")
    ga = np.einsum(f"{o_sub},{b_sub}->{a_sub}", g, b)
    gb = np.einsum(f"{a_sub},{o_sub}->{b_sub}", a, g)
    return ga, gb


def _fw_add_bias(vals, attrs):
    x, b = vals
    if b.ndim != 1 or x.ndim == 0 or x.shape[-1] != b.shape[0]:
        raise ShapeError(f"add_bias: shapes {x.shape} and {b.shape} incompatible")
    return x + b


def _vjp_add_bias(g, vals, out, attrs):
    return g, g.reshape(-1, g.shape[-1]).sum(axis=0)


def _fw_concat(vals, attrs):
    axis = attrs["axis"]
    try:
        return np.concatenate(vals, axis=axis)
    except ValueError as exc:
        shapes = ", ".join(str(v.shape) for v in vals)
        raise ShapeError(f"concat(axis={axis}): shapes {shapes} incompatible") from exc


def _vjp_concat(g, vals, out, attrs):
    axis = attrs["axis"]
    cuts = np.cumsum([v.shape[axis] for v in vals])[:-1]
    return tuple(np.split(g, cuts, axis=axis))


def _fw_sum(vals, attrs):
    return np.sum(vals[0], axis=attrs["axis"])


def _vjp_sum(g, vals, out, attrs):
    x = vals[0]
    axis = attrs["axis"]
    if axis is not None:
        g = np.expand_dims(g, axis)
    return (np.broadcast_to(g, x.shape).copy(),)


def _fw_mean(vals, attrs):
    x = vals[0]
    if x.size == 0:
        raise ShapeError(f"mean: empty operand of shape {x.shape}")
    return np.mean(x, axis=attrs["axis"])


def _vjp_mean(g, vals, out, attrs):
    x = vals[0]
    axis = attrs["axis"]
    count = x.size if axis is None else x.shape[axis]
    if axis is not None:
        g = np.expand_dims(g, axis)
    return (np.broadcast_to(g / count, x.shape).copy(),)


def leaky_relu_slope(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, LEAKY_SLOPE)


def leaky_relu(x: np.ndarray) -> np.ndarray:
    return x * leaky_relu_slope(x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _fw_logsumexp(vals, attrs):
    x = vals[0]
    axis = attrs["axis"]
    if x.ndim == 0 or x.shape[axis] == 0:
        raise ShapeError(f"logsumexp: cannot reduce shape {x.shape} along axis {axis}")
    m = np.max(x, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(x - m), axis=axis))


def _vjp_logsumexp(g, vals, out, attrs):
    axis = attrs["axis"]
    soft = np.exp(vals[0] - np.expand_dims(out, axis))
    return (np.expand_dims(g, axis) * soft,)


def _fw_clip(vals, attrs):
    return np.clip(vals[0], attrs["lo"], attrs["hi"])


def _vjp_clip(g, vals, out, attrs):
    x = vals[0]
    inside = (x > attrs["lo"]) & (x < attrs["hi"])
    return (np.where(inside, g, 0.0),)


def _fw_expand(vals, attrs):
    return np.repeat(np.expand_dims(vals[0], attrs["axis"]), attrs["n"], axis=attrs["axis"])


def _vjp_expand(g, vals, out, attrs):
    return (np.sum(g, axis=attrs["axis"]),)


def _fw_take(vals, attrs):
    x = vals[0]
    idx = attrs["indices"]
    axis = attrs["axis"]
    if x.ndim == 0 or (len(idx) and (idx.min() < -x.shape[axis] or idx.max() >= x.shape[axis])):
        raise ShapeError(f"take: indices out of range for shape {x.shape} on axis {axis}")
    return np.take(x, idx, axis=axis)


def _vjp_take(g, vals, out, attrs):
    x = vals[0]
    axis = attrs["axis"] % x.ndim
    gx = np.zeros_like(x)
    index = [slice(None)] * x.ndim
    index[axis] = attrs["indices"]
    np.add.at(gx, tuple(index), g)
    return (gx,)


def _fw_gram(vals, attrs):
    t = vals[0]
    if t.ndim < 2:
        raise ShapeError(f"gram: operand of shape {t.shape} is not a matrix")
    return np.einsum("...ik,...jk->...ij", t, t)


def _vjp_gram(g, vals, out, attrs):
    sym = g + np.swapaxes(g, -1, -2)
    return (np.einsum("...ij,...jk->...ik", sym, vals[0]),)


def _fw_reshape(vals, attrs):
    x = vals[0]
    try:
        return np.reshape(x, attrs["shape"])
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot reshape {x.shape} to {attrs['shape']}") from exc


@dataclass(frozen=True)
class OpKind:
    name: str
    forward: Callable[[list, dict], np.ndarray]
    vjp: Callable[[np.ndarray, list, np.ndarray, dict], tuple]


def _elementwise(name, fn, deriv_from):
    """Unary op whose derivative is computed from (input, output)."""
    return OpKind(
        name,
        lambda vals, attrs: fn(vals[0]),
        lambda g, vals, out, attrs: (g * deriv_from(vals[0], out),),
    )


OPS: dict[str, OpKind] = {
    op.name: op
    for op in [
        OpKind("add", _fw_add, lambda g, v, o, a: (g, g)),
        OpKind("sub", _fw_sub, lambda g, v, o, a: (g, -g)),
        OpKind("mul", _fw_mul, lambda g, v, o, a: (g * v[1], g * v[0])),
        OpKind("affine", _fw_affine, lambda g, v, o, a: (a["scale"] * g,)),
        OpKind("matmul", _fw_matmul, _vjp_matmul),
        OpKind("add_bias", _fw_add_bias, _vjp_add_bias),
        OpKind("concat", _fw_concat, _vjp_concat),
        OpKind("sum", _fw_sum, _vjp_sum),
        OpKind("mean", _fw_mean, _vjp_mean),
        OpKind("logsumexp", _fw_logsumexp, _vjp_logsumexp),
        OpKind("clip", _fw_clip, _vjp_clip),
        OpKind("expand", _fw_expand, _vjp_expand),
        OpKind("take", _fw_take, _vjp_take),
        OpKind("gram", _fw_gram, _vjp_gram),
        OpKind("reshape", _fw_reshape, lambda g, v, o, a: (g.reshape(v[0].shape),)),
        OpKind(
            "squared_norm",
            lambda v, a: np.sum(v[0] * v[0]),
            lambda g, v, o, a: (2.0 * g * v[0],),
        ),
        _elementwise("leaky_relu", leaky_relu, lambda x, y: leaky_relu_slope(x)),
        # Piecewise-constant: derivative is zero wherever it is defined.
        _elementwise("leaky_relu_slope", leaky_relu_slope, lambda x, y: 0.0),
        _elementwise("tanh", np.tanh, lambda x, y: 1.0 - y * y),
        _elementwise("sigmoid", sigmoid, lambda x, y: y * (1.0 - y)),
        _elementwise("exp", np.exp, lambda x, y: y),
        _elementwise("log", np.log, lambda x, y: 1.0 / x),
        _elementwise("square", np.square, lambda x, y: 2.0 * x),
    ]
}


# ---------------------------------------------------------------------------
# Tape and variables
# ---------------------------------------------------------------------------


@dataclass
class Node:
    op: str  # "leaf", "const" or a key of OPS
    inputs: tuple[int, ...]
    attrs: dict
    value: np.ndarray
    requires_grad: bool
    name: str | None = None


class Var:
    """Handle to one node on a tape; supports the usual arithmetic operators."""

    __slots__ = ("tape", "index")
    __array_priority__ = 100.0

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        node = self.tape.nodes[self.index]
        return f"Var(#{self.index} {node.op}, shape={self.shape})"

    def _lift(self, other) -> "Var":
        if isinstance(other, Var):
            return other
        value = as_array(other)
        if value.ndim == 0 and self.value.ndim:
            value = np.full(self.shape, float(value))
        return self.tape.const(value)

    def __add__(self, other):
        if np.isscalar(other):
            return affine(self, 1.0, float(other))
        return add(self, self._lift(other))

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        if np.isscalar(other):
            return affine(self, 1.0, -float(other))
        return sub(self, self._lift(other))

    def __rsub__(self, other):
        if np.isscalar(other):
            return affine(self, -1.0, float(other))
        return sub(self._lift(other), self)

    def __mul__(self, other):
        if np.isscalar(other):
            return affine(self, float(other), 0.0)
        return mul(self, self._lift(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if not np.isscalar(other):
            raise TypeError("division is only supported by scalar constants")
        return affine(self, 1.0 / float(other), 0.0)

    def __neg__(self):
        return affine(self, -1.0, 0.0)

    def __matmul__(self, other):
        return matmul(self, self._lift(other))


class Tape:
    """Ordered record of a computation, replayable and differentiable.

    Leaves are named inputs (parameters or data) and are what gradients are
    reported for.  Constants are fixed values that never receive gradients.
    """

    def __init__(self, check_finite: bool = True):
        self.nodes: list[Node] = []
        self.leaves: dict[str, int] = {}
        self.check_finite = check_finite

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, name: str, value: Any) -> Var:
        if name in self.leaves:
            raise ValueError(f"duplicate leaf name {name!r}")
        self.leaves[name] = len(self.nodes)
        self.nodes.append(Node("leaf", (), {}, as_array(value), True, name))
        return Var(self, len(self.nodes) - 1)

    def const(self, value: Any) -> Var:
        self.nodes.append(Node("const", (), {}, as_array(value), False))
        return Var(self, len(self.nodes) - 1)

    def apply(self, op: str, *inputs: Var, **attrs) -> Var:
        for v in inputs:
            if v.tape is not self:
                raise ValueError(f"{op}: operand belongs to a different tape")
        kind = OPS[op]
        idx = tuple(v.index for v in inputs)
        value = self._run(kind, [self.nodes[i].value for i in idx], attrs, len(self.nodes))
        requires = any(self.nodes[i].requires_grad for i in idx)
        self.nodes.append(Node(op, idx, attrs, value, requires))
        return Var(self, len(self.nodes) - 1)

    def _run(self, kind: OpKind, vals: list, attrs: dict, position: int) -> np.ndarray:
        with np.errstate(all="ignore"):
            out = np.asarray(kind.forward(vals, attrs), dtype=np.float64)
        if self.check_finite and not np.all(np.isfinite(out)):
            raise NonFiniteError(f"{kind.name} (node {position}) produced a non-finite value")
        return out

    def forward_eval(self, bindings: Mapping[str, Any], root: Var | None = None) -> np.ndarray:
        """Replay the recorded operations with new leaf values.

        Every leaf must be bound.  All node values are refreshed in place and
        the root value (default: the last node) is returned.
        """
        missing = set(self.leaves) - set(bindings)
        if missing:
            raise KeyError(f"unbound leaves: {sorted(missing)}")
        unknown = set(bindings) - set(self.leaves)
        if unknown:
            raise KeyError(f"bindings name no leaf: {sorted(unknown)}")
        for pos, node in enumerate(self.nodes):
            if node.op == "leaf":
                value = as_array(bindings[node.name])
                if value.shape != node.value.shape:
                    raise ShapeError(
                        f"leaf {node.name!r}: bound shape {value.shape}, recorded {node.value.shape}"
                    )
                node.value = value
            elif node.op != "const":
                vals = [self.nodes[i].value for i in node.inputs]
                node.value = self._run(OPS[node.op], vals, node.attrs, pos)
        return (root.value if root is not None else self.nodes[-1].value) if self.nodes else None

    def backward(self, root: Var) -> dict[str, np.ndarray]:
        """Gradient of a rank-0 root with respect to every leaf."""
        if root.tape is not self:
            raise ValueError("root belongs to a different tape")
        if root.value.shape != ():
            raise ShapeError(f"backward: root must be rank-0, got shape {root.value.shape}")
        grads: dict[int, np.ndarray] = {root.index: np.ones(())}
        leaf_grads: dict[int, np.ndarray] = {}
        for pos in range(root.index, -1, -1):
            g = grads.pop(pos, None)
            if g is None:
                continue
            node = self.nodes[pos]
            if node.op == "leaf":
                leaf_grads[pos] = g
                continue
            if node.op == "const" or not node.requires_grad:
                continue
            vals = [self.nodes[i].value for i in node.inputs]
            with np.errstate(all="ignore"):
                parts = OPS[node.op].vjp(g, vals, node.value, node.attrs)
            for i, gi in zip(node.inputs, parts):
                if not self.nodes[i].requires_grad:
                    continue
                gi = np.broadcast_to(np.asarray(gi, dtype=np.float64), self.nodes[i].value.shape)
                grads[i] = grads[i] + gi if i in grads else gi.copy()
        out = {}
        for name, i in self.leaves.items():
            g = leaf_grads.get(i)
            out[name] = np.zeros_like(self.nodes[i].value) if g is None else np.array(g)
        if self.check_finite:
            for name, g in out.items():
                if not np.all(np.isfinite(g)):
                    raise NonFiniteError(f"gradient for {name!r} is non-finite")
        return out


# ---------------------------------------------------------------------------
# Functional surface
# ---------------------------------------------------------------------------


def forward_eval(tape: Tape, bindings: Mapping[str, Any], root: Var | None = None) -> np.ndarray:
    return tape.forward_eval(bindings, root)


def backward(tape: Tape, root: Var) -> dict[str, np.ndarray]:
    return tape.backward(root)


def add(a: Var, b: Var) -> Var:
    return a.tape.apply("add", a, b)


def sub(a: Var, b: Var) -> Var:
    return a.tape.apply("sub", a, b)


def mul(a: Var, b: Var) -> Var:
    return a.tape.apply("mul", a, b)


def affine(x: Var, scale: float = 1.0, shift: float = 0.0) -> Var:
    """scale * x + shift with scalar constants."""
    return x.tape.apply("affine", x, scale=float(scale), shift=float(shift))


def matmul(a: Var, b: Var) -> Var:
    """Contract the last axis of ``a`` with the first non-batch axis of ``b``."""
    return a.tape.apply("matmul", a, b, transpose_b=False)


def matmul_t(a: Var, b: Var) -> Var:
    """``a`` times the transpose of ``b``; for row-major inputs against (out, in) weights."""
    return a.tape.apply("matmul", a, b, transpose_b=True)


def add_bias(x: Var, b: Var) -> Var:
    return x.tape.apply("add_bias", x, b)


def concat(xs: Sequence[Var], axis: int = -1) -> Var:
    return xs[0].tape.apply("concat", *xs, axis=axis)


def sum(x: Var, axis: int | None = None) -> Var:  # noqa: A001
    return x.tape.apply("sum", x, axis=axis)


def mean(x: Var, axis: int | None = None) -> Var:
    return x.tape.apply("mean", x, axis=axis)


def logsumexp(x: Var, axis: int = -1) -> Var:
    return x.tape.apply("logsumexp", x, axis=axis)


def squared_norm(x: Var) -> Var:
    return x.tape.apply("squared_norm", x)


def square(x: Var) -> Var:
    return x.tape.apply("square", x)


def clip(x: Var, lo: float, hi: float) -> Var:
    return x.tape.apply("clip", x, lo=float(lo), hi=float(hi))


def expand(x: Var, axis: int, n: int) -> Var:
    """Insert a new axis of extent ``n`` by repetition."""
    return x.tape.apply("expand", x, axis=axis, n=int(n))


def take(x: Var, indices: Sequence[int], axis: int = -1) -> Var:
    return x.tape.apply("take", x, indices=np.asarray(indices, dtype=np.int64), axis=axis)


def gram(x: Var) -> Var:
    """Row Gram matrices ``x @ x^T`` over the trailing two axes."""
    return x.tape.apply("gram", x)


def reshape(x: Var, shape: Sequence[int]) -> Var:
    return x.tape.apply("reshape", x, shape=tuple(shape))


def tanh(x: Var) -> Var:
    return x.tape.apply("tanh", x)


def sigmoid_op(x: Var) -> Var:
    return x.tape.apply("sigmoid", x)


def leaky_relu_op(x: Var) -> Var:
    return x.tape.apply("leaky_relu", x)


def leaky_relu_slope_op(x: Var) -> Var:
    return x.tape.apply("leaky_relu_slope", x)


def exp(x: Var) -> Var:
    return x.tape.apply("exp", x)


def log(x: Var) -> Var:
    return x.tape.apply("log", x)


def log_softmax(logits: Var) -> Var:
    """Row-wise log-softmax over the last axis."""
    lse = logsumexp(logits, axis=-1)
    return logits - expand(lse, -1, logits.shape[-1])


def value_and_grad(
    build: Callable[[Tape, dict[str, Var]], Var], params: Mapping[str, np.ndarray]
) -> tuple[float, dict[str, np.ndarray]]:
    """Record ``build`` on a fresh tape with ``params`` as leaves; return (loss, grads)."""
    tape = Tape()
    leaves = {name: tape.leaf(name, value) for name, value in params.items()}
    root = build(tape, leaves)
    return float(root.value), tape.backward(root)


def finite_diff_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a scalar function, component by component."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = as_array(x)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    for i in range(x.size):
        step = np.zeros(x.size)
        step[i] = eps
        step = step.reshape(x.shape)
        hi = float(f(x + step))
        lo = float(f(x - step))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NonFiniteError(f"non-finite function value probing component {i}")
        flat[i] = (hi - lo) / (2.0 * eps)
    return grad


def gradient_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Componentwise relative error; components whose absolute error is at most ``floor`` count as 0."""
    a, n = as_array(analytic), as_array(numeric)
    diff = np.abs(a - n)
    scale = np.maximum(np.abs(a), np.abs(n))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(diff <= floor, 0.0, diff / scale)
    return rel


def check_gradients(
    build: Callable[[Tape, dict[str, Var]], Var],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    floor: float = 1e-8,
) -> dict[str, float]:
    """Worst relative error per parameter between backward and central differences.

    ``build`` must be deterministic: it is re-recorded for every probe.
    """
    _, grads = value_and_grad(build, params)
    worst = {}
    for name, value in params.items():

        def f(v, name=name):
            probe = dict(params)
            probe[name] = v
            tape = Tape()
            leaves = {k: tape.const(p) for k, p in probe.items()}
            return float(build(tape, leaves).value)

        numeric = finite_diff_gradient(f, value, eps)
        worst[name] = float(np.max(gradient_errors(grads[name], numeric, floor), initial=0.0))
    return worst


def check_gradient_terms(
    record: Callable[[Tape, dict[str, np.ndarray], bool], Mapping[str, Var]],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    floor: float = 1e-8,
) -> dict[str, dict[str, float]]:
    """Worst relative gradient error per (term, parameter) for several rank-0 terms.

    ``record(tape, values, trainable)`` must put the parameters on ``tape``
    (as leaves named like ``values`` when ``trainable``, else as constants)
    and return the terms.  One recording per probe serves every term.
    """
    params = {k: as_array(v) for k, v in params.items()}
    tape = Tape()
    terms = record(tape, params, True)
    grads = {t: tape.backward(v) for t, v in terms.items()}
    worst: dict[str, dict[str, float]] = {t: {} for t in terms}
    for name, value in params.items():
        numeric = {t: np.zeros(value.size) for t in terms}
        for i in range(value.size):
            vals = []
            for sign in (1.0, -1.0):
                moved = value.copy().reshape(-1)
                moved[i] += sign * eps
                probe = dict(params)
                probe[name] = moved.reshape(value.shape)
                vals.append(record(Tape(), probe, False))
            for t in terms:
                hi, lo = float(vals[0][t].value), float(vals[1][t].value)
                if not (np.isfinite(hi) and np.isfinite(lo)):
                    raise NonFiniteError(f"non-finite value of {t!r} probing {name}[{i}]")
                numeric[t][i] = (hi - lo) / (2.0 * eps)
        for t in terms:
            err = gradient_errors(grads[t][name].reshape(-1), numeric[t], floor)
            worst[t][name] = float(np.max(err, initial=0.0))
    return worst
