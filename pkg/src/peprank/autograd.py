"""Minimal reverse-mode automatic differentiation over numpy arrays.

Just enough machinery for the reranking model: dense ops, attention
plumbing (batched matmul, masked softmax, gather), layer normalization,
dropout, and a masked RMSE loss. Values are float64 by default so that
finite-difference gradient checks have clean tolerances; float32 data is
accepted and preserved for throughput.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

_SQRT2 = float(np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


class Tensor:
    """An n-dimensional float array with a gradient slot and graph link."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward_fn)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = np.matmul(a.data, b.data)

    def backward_fn(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        _accumulate(a, _unbroadcast(ga, a.shape))
        _accumulate(b, _unbroadcast(gb, b.shape))

    return _make(data, (a, b), backward_fn)


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    a = as_tensor(a)
    data = np.transpose(a.data, axes)
    inverse = None if axes is None else np.argsort(axes)

    def backward_fn(g):
        _accumulate(a, np.transpose(g, inverse))

    return _make(data, (a,), backward_fn)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def backward_fn(g):
        _accumulate(a, g.reshape(a.shape))

    return _make(data, (a,), backward_fn)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        for t, piece in zip(tensors, np.split(g, offsets, axis=axis)):
            _accumulate(t, piece)

    return _make(data, tensors, backward_fn)


def split(a, sections, axis: int = 0) -> list[Tensor]:
    """Split along an axis (int = equal sections, list = boundaries)."""
    a = as_tensor(a)
    pieces = np.split(a.data, sections, axis=axis)
    outs: list[Tensor] = []
    offset = 0
    for piece in pieces:
        start, width = offset, piece.shape[axis]
        offset += width

        def backward_fn(g, start=start, width=width):
            ga = np.zeros_like(a.data)
            index = [slice(None)] * a.ndim
            index[axis] = slice(start, start + width)
            ga[tuple(index)] = g
            _accumulate(a, ga)

        outs.append(_make(piece.copy(), (a,), backward_fn))
    return outs


def take(a, indices, axis: int = 0) -> Tensor:
    """Gather slices along an axis; gradients scatter-add back."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    data = np.take(a.data, idx, axis=axis)

    def backward_fn(g):
        if not a.requires_grad:
            return
        ga = np.zeros_like(a.data)
        np.add.at(np.moveaxis(ga, axis, 0), idx, np.moveaxis(g, axis, 0))
        _accumulate(a, ga)

    return _make(data, (a,), backward_fn)


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape).copy())

    return _make(data, (a,), backward_fn)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.size if axis is None else a.shape[axis]

    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape) / count)

    return _make(data, (a,), backward_fn)


# ---------------------------------------------------------------------------
# nonlinearities


def relu(a) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward_fn(g):
        _accumulate(a, g * (a.data > 0))

    return _make(data, (a,), backward_fn)


def gelu(a) -> Tensor:
    """Exact Gaussian error linear unit: x * Phi(x)."""
    a = as_tensor(a)
    cdf = 0.5 * (1.0 + erf(a.data / _SQRT2))
    data = a.data * cdf

    def backward_fn(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * a.data * a.data)
        _accumulate(a, g * (cdf + a.data * pdf))

    return _make(data, (a,), backward_fn)


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward_fn(g):
        _accumulate(a, g * data)

    return _make(data, (a,), backward_fn)


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise ValueError("log requires strictly positive inputs")
    data = np.log(a.data)

    def backward_fn(g):
        _accumulate(a, g / a.data)

    return _make(data, (a,), backward_fn)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise ValueError("sqrt requires non-negative inputs")
    data = np.sqrt(a.data)

    def backward_fn(g):
        _accumulate(a, g / (2.0 * data))

    return _make(data, (a,), backward_fn)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward_fn(g):
        _accumulate(a, g * data * (1.0 - data))

    return _make(data, (a,), backward_fn)


def softplus(a) -> Tensor:
    """log(1 + exp(x)), computed stably."""
    a = as_tensor(a)
    x = a.data
    data = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))

    def backward_fn(g):
        s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        _accumulate(a, g * s)

    return _make(data, (a,), backward_fn)


# ---------------------------------------------------------------------------
# structured ops


def linear(x, weight, bias) -> Tensor:
    """x @ weight + bias, with weight of shape [in, out]."""
    return add(matmul(x, weight), bias)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    data = gain.data * xhat + bias.data

    def backward_fn(g):
        dxhat = g * gain.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        _accumulate(x, dx)
        _accumulate(gain, _unbroadcast(g * xhat, gain.shape))
        _accumulate(bias, _unbroadcast(g, bias.shape))

    return _make(data, (x, gain, bias), backward_fn)


def softmax_masked(logits, mask) -> Tensor:
    """Softmax over the last axis with masked-out entries at zero probability.

    ``mask`` is boolean (True = valid) and broadcastable to the logits.
    Masked logits are forced to -inf before the max-shift, so their values
    can never influence the valid entries. A row with no valid entry is an
    error.
    """
    logits = as_tensor(logits)
    valid = np.broadcast_to(np.asarray(mask, dtype=bool), logits.shape)
    if not valid.any(axis=-1).all():
        raise ValueError("softmax row with all entries masked")
    z = np.where(valid, logits.data, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(g):
        dz = p * (g - (g * p).sum(axis=-1, keepdims=True))
        _accumulate(logits, dz)

    return _make(p, (logits,), backward_fn)


def dropout(x, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; the identity when not training or rate is zero."""
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rng is None:
        raise ValueError("training-mode dropout requires an rng")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    data = x.data * keep

    def backward_fn(g):
        _accumulate(x, g * keep)

    return _make(data, (x,), backward_fn)


def rmse(pred, target, mask=None) -> Tensor:
    """Root mean squared error over the unmasked elements."""
    pred, target = as_tensor(pred), as_tensor(target)
    diff = pred.data - target.data
    if mask is None:
        valid = np.ones_like(diff, dtype=bool)
    else:
        valid = np.broadcast_to(np.asarray(mask, dtype=bool), diff.shape)
    count = int(valid.sum())
    if count == 0:
        raise ValueError("rmse with zero unmasked elements")
    value = float(np.sqrt((diff * diff * valid).sum() / count))

    def backward_fn(g):
        if value == 0.0:
            return
        gp = g * valid * diff / (count * value)
        _accumulate(pred, gp)
        _accumulate(target, -gp)

    return _make(np.asarray(value), (pred, target), backward_fn)


# ---------------------------------------------------------------------------
# graph traversal


def backward(loss: Tensor) -> None:
    """Populate gradients of everything reachable from a scalar loss."""
    if loss.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def grad_check(
    f: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    max_coords_per_input: int | None = None,
    seed: int = 0,
) -> float:
    """Compare analytic gradients of a deterministic scalar function against
    central finite differences.

    ``f`` recomputes the forward pass from the current contents of
    ``inputs``, whose data is perturbed in place coordinate by coordinate.
    Returns the maximum relative error |analytic - numeric| / max(1, |numeric|)
    over the checked coordinates. ``max_coords_per_input`` subsamples
    coordinates (deterministically) for large inputs.
    """
    inputs = list(inputs)
    for t in inputs:
        t.data = np.ascontiguousarray(t.data)  # flat views below must alias
        t.requires_grad = True
        t.grad = None
    out = f()
    if out.size != 1:
        raise ValueError("grad_check requires a scalar-valued function")
    backward(out)
    analytic = [
        np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs
    ]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, grads in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords_per_input is not None and flat.size > max_coords_per_input:
            coords = rng.choice(flat.size, size=max_coords_per_input, replace=False)
        for c in coords:
            saved = flat[c]
            flat[c] = saved + h
            up = float(f().data)
            flat[c] = saved - h
            down = float(f().data)
            flat[c] = saved
            numeric = (up - down) / (2.0 * h)
            err = abs(grads.reshape(-1)[c] - numeric) / max(1.0, abs(numeric))
            if err > worst:
                worst = err
    return worst


# ---------------------------------------------------------------------------
# trainable parameters


class ParameterStore:
    """Named trainable tensors with recorded initializer specs and seed."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}
        self._init_spec: dict[str, tuple[str, float]] = {}

    def create(self, name: str, shape: tuple[int, ...], init: str = "normal", scale: float = 0.02) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        if init == "normal":
            data = self._rng.normal(0.0, scale, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        elif init == "xavier":
            fan_in, fan_out = shape[-2], shape[-1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            data = self._rng.uniform(-limit, limit, size=shape)
        else:
            raise ValueError(f"unknown initializer {init!r}")
        tensor = Tensor(data, requires_grad=True)
        self._params[name] = tensor
        self._init_spec[name] = (init, scale)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.grad = np.zeros_like(tensor.data)

    def grad_norm(self) -> float:
        total = 0.0
        for tensor in self._params.values():
            if tensor.grad is not None:
                total += float((tensor.grad * tensor.grad).sum())
        return float(np.sqrt(total))

    def clip_grad_norm(self, max_norm: float) -> float:
        """Scale all gradients so the global L2 norm is at most max_norm."""
        norm = self.grad_norm()
        if norm > max_norm and norm > 0:
            factor = max_norm / norm
            for tensor in self._params.values():
                if tensor.grad is not None:
                    tensor.grad *= factor
        return norm

    def export_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place; names and shapes must agree."""
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if missing or extra:
            raise ValueError(
                f"parameter name mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        for name, array in arrays.items():
            tensor = self._params[name]
            if tuple(array.shape) != tensor.shape:
                raise ValueError(
                    f"parameter {name!r}: stored shape {tuple(array.shape)} does not "
                    f"match expected {tensor.shape}"
                )
            tensor.data = np.asarray(array, dtype=tensor.data.dtype).copy()
