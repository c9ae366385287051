"""Reverse-mode automatic differentiation over dense numpy buffers.

Ops compute eagerly and, when a Tape is active on the current thread, append
a node with its backward rule. Without an active tape (or inside
`inference_mode`), ops are plain numpy math with no graph overhead.

A Tape is single-threaded; distinct tapes over shared read-only parameters
may run on different threads. Training is float32 by default; building
parameters as float64 propagates through every op for gradient checking.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Sequence

import numpy as np

_local = threading.local()


def _tape_stack() -> list:
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = _local.tapes = []
    return stack


def active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A dense array node. Leaves (parameters, constants) have no backward."""

    __slots__ = ("data", "grad", "name", "_inputs", "_backward")

    def __init__(self, data, name: str | None = None):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.name = name
        self._inputs: tuple = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.data.shape}, dtype={self.data.dtype})"


class Tape:
    """Append-only record of op nodes; backward walks it in reverse."""

    def __init__(self, check_finite: bool = False):
        self.nodes: list[Tensor] = []
        self.check_finite = check_finite

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _tape_stack().pop()
        assert popped is self

    def backward(self, loss: Tensor) -> None:
        """Accumulate gradients of `loss` into every node that feeds it."""
        if loss.data.shape != ():
            raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            if node.grad is None or node._backward is None:
                continue
            node._backward(node.grad)


class inference_mode:
    """Context that disables graph recording on the current thread."""

    def __enter__(self):
        _tape_stack().append(None)
        return self

    def __exit__(self, *exc):
        _tape_stack().pop()


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _record(data: np.ndarray, inputs: tuple, backward: Callable) -> Tensor:
    out = Tensor(data)
    tape = active_tape()
    if tape is not None:
        if tape.check_finite and not np.all(np.isfinite(data)):
            raise FloatingPointError("non-finite values in forward op output")
        out._inputs = inputs
        out._backward = backward
        tape.nodes.append(out)
    return out


# --- elementwise -------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _record(a.data + b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")

    def backward(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _record(a.data * b.data, (a, b), backward)


def add_const(x: Tensor, c) -> Tensor:
    c = np.asarray(c, dtype=x.data.dtype)

    def backward(g):
        _accumulate(x, g)

    return _record(x.data + c, (x,), backward)


def mul_const(x: Tensor, c) -> Tensor:
    """Multiply by a non-differentiable constant (broadcasting allowed)."""
    c = np.asarray(c, dtype=x.data.dtype)

    def backward(g):
        _accumulate(x, g * c)

    return _record(x.data * c, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)

    def backward(g):
        _accumulate(x, g * (1.0 - t * t))

    return _record(t, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    # 0.5*(tanh(x/2)+1) is overflow-free for large |x|
    s = 0.5 * (np.tanh(0.5 * x.data) + 1.0)

    def backward(g):
        _accumulate(x, g * s * (1.0 - s))

    return _record(s, (x,), backward)


# --- linear algebra ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} x {b.data.shape}")

    def backward(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _record(a.data @ b.data, (a, b), backward)


def linear(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    """x @ w.T (+ bias): w is stored [out x in], bias [out]."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ValueError(f"linear shape mismatch: {x.data.shape} x {w.data.shape}")
    out = x.data @ w.data.T
    if bias is not None:
        out = out + bias.data

    def backward(g):
        _accumulate(x, g @ w.data)
        _accumulate(w, g.T @ x.data)
        if bias is not None:
            _accumulate(bias, g.sum(axis=0))

    inputs = (x, w) if bias is None else (x, w, bias)
    return _record(out, inputs, backward)


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Stacked matrix product: [B,m,k] @ [B,k,n] -> [B,m,n]."""
    if a.data.ndim != 3 or b.data.ndim != 3 or a.data.shape[2] != b.data.shape[1]:
        raise ValueError(f"bmm shape mismatch: {a.data.shape} x {b.data.shape}")

    def backward(g):
        _accumulate(a, g @ b.data.transpose(0, 2, 1))
        _accumulate(b, a.data.transpose(0, 2, 1) @ g)

    return _record(a.data @ b.data, (a, b), backward)


# --- shape manipulation ------------------------------------------------------


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    orig = x.data.shape

    def backward(g):
        _accumulate(x, g.reshape(orig))

    return _record(x.data.reshape(shape), (x,), backward)


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            _accumulate(p, g[tuple(index)])

    return _record(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), backward)


def split(x: Tensor, n_chunks: int, axis: int = -1) -> list[Tensor]:
    """Split into equal chunks; each chunk's backward scatters into x."""
    if x.data.shape[axis] % n_chunks != 0:
        raise ValueError(f"cannot split axis of size {x.data.shape[axis]} into {n_chunks}")
    size = x.data.shape[axis] // n_chunks
    outs = []
    for i in range(n_chunks):
        index = [slice(None)] * x.data.ndim
        index[axis] = slice(i * size, (i + 1) * size)
        index = tuple(index)

        def backward(g, index=index):
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[index] += g

        outs.append(_record(x.data[index].copy(), (x,), backward))
    return outs


def stack(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    def backward(g):
        for i, p in enumerate(parts):
            _accumulate(p, np.take(g, i, axis=axis))

    return _record(np.stack([p.data for p in parts], axis=axis), tuple(parts), backward)


# --- reductions and normalizations -------------------------------------------


def reduce_sum(x: Tensor) -> Tensor:
    def backward(g):
        _accumulate(x, np.full_like(x.data, g))

    return _record(np.asarray(x.data.sum(), dtype=x.data.dtype), (x,), backward)


def softmax(x: Tensor, mask_add=None) -> Tensor:
    """Softmax over the last axis; `mask_add` is a constant added beforehand
    (large negative values force exactly-zero weights via underflow)."""
    z = x.data if mask_add is None else x.data + np.asarray(mask_add, dtype=x.data.dtype)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        _accumulate(x, y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _record(y, (x,), backward)


def log_softmax(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse

    def backward(g):
        _accumulate(x, g - np.exp(out) * g.sum(axis=-1, keepdims=True))

    return _record(out, (x,), backward)


# --- lookups and losses -------------------------------------------------------


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.intp)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise IndexError(f"embedding id out of range for table of {table.data.shape[0]} rows")

    def backward(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids, g)

    return _record(table.data[ids], (table,), backward)


def cross_entropy(logits: Tensor, targets, pad_index: int) -> Tensor:
    """Mean of -log softmax(logits)[target] over non-pad positions."""
    targets = np.asarray(targets, dtype=np.intp)
    if logits.data.ndim != 2 or targets.shape != (logits.data.shape[0],):
        raise ValueError(f"cross_entropy expects [N,V] logits and N targets, got {logits.data.shape} and {targets.shape}")
    live = targets != pad_index
    n_live = int(live.sum())
    if n_live == 0:
        raise ValueError("empty target: all positions are padding")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    rows = np.arange(len(targets))
    picked = z[rows, targets] - lse[:, 0]
    loss = np.asarray(-picked[live].sum() / n_live, dtype=logits.data.dtype)

    def backward(g):
        grad = np.exp(z - lse)
        grad[rows, targets] -= 1.0
        grad[~live] = 0.0
        _accumulate(logits, grad * (g / n_live))

    return _record(loss, (logits,), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate is 0."""
    if rate == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate).astype(x.data.dtype)
    return mul_const(x, keep / (1.0 - rate))


# --- optimizer ---------------------------------------------------------------


def global_grad_norm(tensors: Iterable[Tensor]) -> float:
    total = 0.0
    for t in tensors:
        if t.grad is not None:
            total += float((t.grad.astype(np.float64) ** 2).sum())
    return float(np.sqrt(total))


def clip_gradients(tensors: Sequence[Tensor], max_norm: float) -> float:
    """Scale all gradients so their global norm is at most `max_norm`."""
    norm = global_grad_norm(tensors)
    if norm > max_norm:
        scale = max_norm / norm
        for t in tensors:
            if t.grad is not None:
                t.grad *= scale
    return norm

def sgd_step(tensors: Sequence[Tensor], lr: float) -> None:
    """In-place w <- w - lr*g. Aborts (no tensor touched) on non-finite grads."""
    for t in tensors:
        if t.grad is not None and not np.all(np.isfinite(t.grad)):
            raise RuntimeError(f"non-finite gradient in {t.name or 'unnamed tensor'}; step aborted")
    for t in tensors:
        if t.grad is not None:
            t.data -= lr * t.grad


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None
