"""Minimal reverse-mode automatic differentiation on numpy arrays.

A :class:`Tensor` wraps a float64 array plus an optional gradient and a
backward closure; building expressions records a DAG which
:func:`backward` traverses once in reverse topological order. The op set
is exactly what the models here need: dense layers, ELU/Tanh/sigmoid,
elementwise arithmetic, reductions, and fused losses (MSE, softmax
cross-entropy, row normalization). Anything fancier (broadcasting rules,
views, dtype promotion) is deliberately out of scope.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence, Tuple

import numpy as np


class Tensor:
    """A node in the computation DAG."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
        name: Optional[str] = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad = self.grad + g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = self.name or "tensor"
        return f"Tensor({tag}, shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data, name: Optional[str] = None) -> Tensor:
    return Tensor(data, requires_grad=False, name=name)


def backward(root: Tensor) -> None:
    """Backpropagate from a scalar root through the recorded DAG.

    Each node is visited exactly once; gradients accumulate additively in
    ``grad`` of every tensor with ``requires_grad``.
    """
    if root.data.size != 1:
        raise ValueError(f"backward requires a scalar root, got shape {root.data.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    root.accumulate(np.ones_like(root.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def input_gradient(root: Tensor, wrt: Tensor) -> np.ndarray:
    """Gradient of scalar ``root`` with respect to ``wrt``, leaving the graph clean.

    Snapshots and restores ``grad`` of every reachable node, so gradients
    already accumulated elsewhere (e.g. on parameters) are untouched. Used
    where a gradient w.r.t. an input is needed mid-expression, as in
    adversarial perturbation.
    """
    nodes: list[Tensor] = []
    seen: set[int] = set()
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        nodes.append(node)
        stack.extend(node._parents)
    saved = [(n, n.grad) for n in nodes]
    for n in nodes:
        n.grad = None
    backward(root)
    g = np.zeros_like(wrt.data) if wrt.grad is None else np.array(wrt.grad)
    for n, old in saved:
        n.grad = old
    return g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, parents=(a, b))

    def _bw(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    out._backward = _bw
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, parents=(a, b))

    def _bw(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.data.shape))

    out._backward = _bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, parents=(a, b))

    def _bw(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    out._backward = _bw
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c, parents=(a,))

    def _bw(g):
        if a.requires_grad:
            a.accumulate(g * c)

    out._backward = _bw
    return out


def reshape(a: Tensor, shape: tuple) -> Tensor:
    out = Tensor(a.data.reshape(shape), parents=(a,))

    def _bw(g):
        if a.requires_grad:
            a.accumulate(g.reshape(a.data.shape))

    out._backward = _bw
    return out


def linear(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """Dense layer ``x @ w.T + b`` with exact analytic gradients.

    ``w`` has shape (out, in); ``x`` may be a single vector (in,) or a
    batch (B, in), and the output shape follows.
    """
    single = x.data.ndim == 1
    xd = x.data[None, :] if single else x.data
    if xd.ndim != 2 or w.data.ndim != 2 or xd.shape[1] != w.data.shape[1]:
        raise ValueError(f"linear shape mismatch: input {x.data.shape} vs weights {w.data.shape}")
    yd = xd @ w.data.T
    if b is not None:
        if b.data.shape != (w.data.shape[0],):
            raise ValueError(f"bias shape {b.data.shape} does not match weights {w.data.shape}")
        yd = yd + b.data
    parents = (x, w) if b is None else (x, w, b)
    out = Tensor(yd[0] if single else yd, parents=parents)

    def _bw(g):
        g2 = g[None, :] if single else g
        if x.requires_grad:
            gx = g2 @ w.data
            x.accumulate(gx[0] if single else gx)
        if w.requires_grad:
            w.accumulate(g2.T @ xd)
        if b is not None and b.requires_grad:
            b.accumulate(g2.sum(axis=0))

    out._backward = _bw
    return out


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    pos = a.data > 0
    yd = np.where(pos, a.data, alpha * np.expm1(a.data))
    out = Tensor(yd, parents=(a,))

    def _bw(g):
        if a.requires_grad:
            a.accumulate(g * np.where(pos, 1.0, yd + alpha))

    out._backward = _bw
    return out


def tanh_act(a: Tensor) -> Tensor:
    yd = np.tanh(a.data)
    out = Tensor(yd, parents=(a,))

    def _bw(g):
        if a.requires_grad:
            a.accumulate(g * (1.0 - yd * yd))

    out._backward = _bw
    return out


def sigmoid(a: Tensor) -> Tensor:
    yd = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(yd, parents=(a,))

    def _bw(g):
        if a.requires_grad:
            a.accumulate(g * yd * (1.0 - yd))

    out._backward = _bw
    return out


def mean_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.mean(), parents=(a,))

    def _bw(g):
        if a.requires_grad:
            a.accumulate(np.full(a.data.shape, float(g) / a.data.size))

    out._backward = _bw
    return out


def mse(recon: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over every element; gradient 2(recon-target)/N."""
    if recon.data.shape != target.data.shape:
        raise ValueError(f"mse shape mismatch: {recon.data.shape} vs {target.data.shape}")
    diff = recon.data - target.data
    out = Tensor(np.mean(diff * diff), parents=(recon, target))

    def _bw(g):
        coeff = 2.0 * float(g) / diff.size
        if recon.requires_grad:
            recon.accumulate(coeff * diff)
        if target.requires_grad:
            target.accumulate(-coeff * diff)

    out._backward = _bw
    return out


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of integer ``labels`` under row-softmax of logits."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    expz = np.exp(z)
    probs = expz / expz.sum(axis=1, keepdims=True)
    n = len(labels)
    nll = -np.log(probs[np.arange(n), labels] + 1e-300)
    out = Tensor(nll.mean(), parents=(logits,))

    def _bw(g):
        if logits.requires_grad:
            gl = probs.copy()
            gl[np.arange(n), labels] -= 1.0
            logits.accumulate(float(g) * gl / n)

    out._backward = _bw
    return out


def l2_normalize_rows(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize each row to unit Euclidean norm."""
    norms = np.sqrt((a.data * a.data).sum(axis=-1, keepdims=True))
    norms = np.maximum(norms, eps)
    yd = a.data / norms
    out = Tensor(yd, parents=(a,))

    def _bw(g):
        if a.requires_grad:
            dot = (g * yd).sum(axis=-1, keepdims=True)
            a.accumulate((g - yd * dot) / norms)

    out._backward = _bw
    return out


def custom_op(
    value: np.ndarray,
    parents: Sequence[Tensor],
    grad_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
    name: Optional[str] = None,
) -> Tensor:
    """Register an op with externally computed value and gradients.

    ``grad_fn`` maps the output gradient to one gradient array (or None)
    per parent. Used for dynamic-programming losses whose backward pass is
    not a composition of primitive ops.
    """
    parents = tuple(parents)
    out = Tensor(value, parents=parents, name=name)

    def _bw(g):
        grads = grad_fn(g)
        for p, gp in zip(parents, grads):
            if p.requires_grad and gp is not None:
                p.accumulate(gp)

    out._backward = _bw
    return out
