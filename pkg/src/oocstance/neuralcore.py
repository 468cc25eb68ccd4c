"""Small reverse-mode autodiff over float64 numpy arrays.

Only what the stance networks need: affine maps, ReLU, masked softmax,
batch normalization, cross-entropy, a few reductions and reshapes, plus an
Adam optimizer and a triangular cyclical learning rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    """An array plus the recipe for pushing gradients to its parents."""

    __array_priority__ = 100

    def __init__(self, data, parents: tuple = (), backward: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Reverse sweep from this (scalar) tensor."""
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # arithmetic ----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)


class Param(Tensor):
    """A trainable leaf tensor."""

    def __init__(self, name: str, data):
        super().__init__(data)
        self.name = name

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, (a, b))

    def bw(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    out._backward = bw
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data, (a,))
    out._backward = lambda g: a._accumulate(-g)
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, (a, b))

    def bw(g):
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    out._backward = bw
    return out


def linear(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ W.T + b`` over any number of leading dimensions."""
    x = as_tensor(x)
    if x.shape[-1] != W.shape[1]:
        raise ValueError(f"linear: input width {x.shape[-1]} != weight width {W.shape[1]}")
    y = x.data @ W.data.T
    if b is not None:
        if b.shape != (W.shape[0],):
            raise ValueError(f"linear: bias shape {b.shape} != ({W.shape[0]},)")
        y = y + b.data
    parents = (x, W) if b is None else (x, W, b)
    out = Tensor(y, parents)

    def bw(g):
        x._accumulate(g @ W.data)
        g2 = g.reshape(-1, g.shape[-1])
        x2 = x.data.reshape(-1, x.shape[-1])
        W._accumulate(g2.T @ x2)
        if b is not None:
            b._accumulate(g2.sum(axis=0))

    out._backward = bw
    return out


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0), (x,))
    out._backward = lambda g: x._accumulate(g * mask)
    return out


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims), (x,))

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.shape))

    out._backward = bw
    return out


def mean(x: Tensor, axis) -> Tensor:
    n = x.shape[axis]
    return mul(sum_(x, axis=axis), 1.0 / n)


def max_(x: Tensor, axis: int) -> Tensor:
    """Max along ``axis``; the gradient goes to the first maximizer."""
    idx = np.argmax(x.data, axis=axis)
    out = Tensor(np.take_along_axis(x.data, np.expand_dims(idx, axis), axis).squeeze(axis), (x,))

    def bw(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis)
        x._accumulate(full)

    out._backward = bw
    return out


def reshape(x: Tensor, shape: tuple) -> Tensor:
    out = Tensor(x.data.reshape(shape), (x,))
    out._backward = lambda g: x._accumulate(g.reshape(x.shape))
    return out


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    out = Tensor(np.concatenate([x.data for x in xs], axis=axis), tuple(xs))
    sizes = [x.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for x, part in zip(xs, np.split(g, splits, axis=axis)):
            x._accumulate(part)

    out._backward = bw
    return out


def stack(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    out = Tensor(np.stack([x.data for x in xs], axis=axis), tuple(xs))

    def bw(g):
        for i, x in enumerate(xs):
            x._accumulate(np.take(g, i, axis=axis))

    out._backward = bw
    return out


def softmax(scores) -> np.ndarray:
    """Plain (non-differentiable) stable softmax of a 1-D array."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(s - s.max())
    return e / e.sum()


def masked_softmax(scores: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over the last axis restricted to ``mask``.

    Rows with no unmasked entry come out as all zeros, so a weighted sum over
    an empty set is the zero vector.
    """
    mask = np.asarray(mask, dtype=bool)
    s = np.where(mask, scores.data, -np.inf)
    has_any = mask.any(axis=-1, keepdims=True)
    shift = np.where(has_any, s.max(axis=-1, keepdims=True), 0.0)
    e = np.where(mask, np.exp(np.where(mask, s - shift, 0.0)), 0.0)
    denom = e.sum(axis=-1, keepdims=True)
    y = np.where(has_any, e / np.where(denom == 0, 1.0, denom), 0.0)
    out = Tensor(y, (scores,))

    def bw(g):
        inner = (g * y).sum(axis=-1, keepdims=True)
        scores._accumulate(y * (g - inner))

    out._backward = bw
    return out


@dataclass
class BatchNormState:
    """Per-feature batch norm. ``gamma``/``beta`` are trainable."""

    gamma: Param
    beta: Param
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def create(cls, name: str, width: int, **kw) -> "BatchNormState":
        return cls(
            Param(f"{name}.gamma", np.ones(width)),
            Param(f"{name}.beta", np.zeros(width)),
            np.zeros(width),
            np.ones(width),
            **kw,
        )

    def params(self) -> list[Param]:
        return [self.gamma, self.beta]


def batchnorm(x: Tensor, state: BatchNormState, train: bool, update: bool = True) -> Tensor:
    """Normalize rows of ``x`` (batch, features).

    Train mode normalizes with batch statistics (biased variance) and, when
    ``update`` is set, folds them into the running averages using the
    unbiased variance. Infer mode uses the running statistics only.
    """
    if x.data.ndim != 2:
        raise ValueError("batchnorm expects a (batch, features) array")
    n = x.shape[0]
    if train:
        if n < 2:
            raise ValueError("train-mode batch norm needs a batch of at least 2")
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        if update:
            m = state.momentum
            state.running_mean = (1 - m) * state.running_mean + m * mu
            state.running_var = (1 - m) * state.running_var + m * var * n / (n - 1)
    else:
        mu, var = state.running_mean, state.running_var
    inv = 1.0 / np.sqrt(var + state.eps)
    xhat = (x.data - mu) * inv
    gamma, beta = state.gamma, state.beta
    out = Tensor(xhat * gamma.data + beta.data, (x, gamma, beta))

    def bw(g):
        gamma._accumulate((g * xhat).sum(axis=0))
        beta._accumulate(g.sum(axis=0))
        gx = g * gamma.data
        if train:
            dx = inv * (gx - gx.mean(axis=0) - xhat * (gx * xhat).mean(axis=0))
        else:
            dx = gx * inv
        x._accumulate(dx)

    out._backward = bw
    return out


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean of ``-log softmax(logits)[label]`` over the batch."""
    z = logits.data
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if z.ndim == 1:
        z = z[None, :]
    shift = z - z.max(axis=1, keepdims=True)
    logp = shift - np.log(np.exp(shift).sum(axis=1, keepdims=True))
    n = z.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    out = Tensor(loss, (logits,))

    def bw(g):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1.0
        logits._accumulate((g * p / n).reshape(logits.shape))

    out._backward = bw
    return out


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Param],
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` must rebuild the graph from the current parameter values on
    every call.
    """
    params = list(params)
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = float(loss_fn().data)
            flat[i] = orig - eps
            lm = float(loss_fn().data)
            flat[i] = orig
            gfd = (lp - lm) / (2 * eps)
            rel = abs(gflat[i] - gfd) / max(1e-8, abs(gflat[i]) + abs(gfd))
            worst = max(worst, rel)
    return worst


@dataclass
class Adam:
    params: list[Param]
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, lr: float) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


@dataclass(frozen=True)
class LrSchedule:
    lr_min: float = 9e-6
    lr_max: float = 6e-5
    cycle_steps: int = 16

    def __post_init__(self):
        if not 0 < self.lr_min <= self.lr_max:
            raise ValueError("need 0 < lr_min <= lr_max")
        if self.cycle_steps < 2:
            raise ValueError("cycle_steps must be >= 2")


def cyclical_lr(step: int, schedule: LrSchedule = LrSchedule()) -> float:
    """Triangular wave: ``lr_min`` at cycle start, ``lr_max`` at mid-cycle."""
    half = schedule.cycle_steps / 2
    pos = step % schedule.cycle_steps
    frac = pos / half if pos <= half else (schedule.cycle_steps - pos) / half
    return schedule.lr_min + (schedule.lr_max - schedule.lr_min) * frac
