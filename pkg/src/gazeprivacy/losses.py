"""Training losses: reconstruction MSE, soft dynamic time warping, and an
adversarial (fast-gradient-sign) reconstruction term, plus their weighted
composition.

Soft-DTW follows the classic smoothed-minimum dynamic program: the
accumulated cost uses softmin_gamma(a, b, c) = -gamma * log(sum exp(-./gamma))
computed in max-shifted form, and the backward pass runs the reverse
recursion over the stored table, yielding exact gradients with respect to
both sequences. The per-step cost is the squared Euclidean distance over
channels. Note that for gamma > 0 the discrepancy of a sequence with
itself is slightly negative (the soft minimum undershoots).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from numba import njit

from .nn.tensor import (
    Tensor,
    add,
    constant,
    custom_op,
    input_gradient,
    mean_all,
    mse,
    reshape,
    scale,
)

ModelFn = Callable[[Tensor], Tensor]


@dataclass(frozen=True)
class LossConfig:
    """Weights and shape parameters for the composite training loss."""

    dtw_gamma: float = 0.1
    fgsm_epsilon: float = 0.01
    weight_mse: float = 1.0
    weight_dtw: float = 1.0
    weight_fgsm: float = 1.0

    def __post_init__(self):
        if self.dtw_gamma <= 0:
            raise ValueError(f"dtw_gamma must be positive, got {self.dtw_gamma}")
        if self.fgsm_epsilon < 0:
            raise ValueError(f"fgsm_epsilon must be non-negative, got {self.fgsm_epsilon}")
        if min(self.weight_mse, self.weight_dtw, self.weight_fgsm) < 0:
            raise ValueError("loss weights must be non-negative")


def mse_loss(recon: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over all samples and channels."""
    return mse(recon, target)


@njit(cache=True)
def _sdtw_forward(D, gamma):  # pragma: no cover - compiled
    B, n, m = D.shape
    R = np.full((B, n + 2, m + 2), np.inf)
    for b in range(B):
        R[b, 0, 0] = 0.0
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                r0 = R[b, i - 1, j - 1]
                r1 = R[b, i - 1, j]
                r2 = R[b, i, j - 1]
                rmin = min(r0, min(r1, r2))
                s = (
                    np.exp((rmin - r0) / gamma)
                    + np.exp((rmin - r1) / gamma)
                    + np.exp((rmin - r2) / gamma)
                )
                R[b, i, j] = D[b, i - 1, j - 1] + rmin - gamma * np.log(s)
    return R


@njit(cache=True)
def _sdtw_backward(D, R, gamma):  # pragma: no cover - compiled
    B, n, m = D.shape
    E = np.zeros((B, n + 2, m + 2))
    for b in range(B):
        Dp = np.zeros((n + 2, m + 2))
        Rl = np.empty((n + 2, m + 2))
        for i in range(n + 2):
            for j in range(m + 2):
                v = R[b, i, j]
                Rl[i, j] = -np.inf if np.isinf(v) else v
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                Dp[i, j] = D[b, i - 1, j - 1]
        Rl[n + 1, m + 1] = Rl[n, m]
        E[b, n + 1, m + 1] = 1.0
        for j in range(m, 0, -1):
            for i in range(n, 0, -1):
                a = np.exp((Rl[i + 1, j] - Rl[i, j] - Dp[i + 1, j]) / gamma)
                c = np.exp((Rl[i, j + 1] - Rl[i, j] - Dp[i, j + 1]) / gamma)
                d = np.exp((Rl[i + 1, j + 1] - Rl[i, j] - Dp[i + 1, j + 1]) / gamma)
                E[b, i, j] = a * E[b, i + 1, j] + c * E[b, i, j + 1] + d * E[b, i + 1, j + 1]
    return E[:, 1 : n + 1, 1 : m + 1]


def _pairwise_sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(B, n, m) matrix of squared Euclidean step costs."""
    diff = a[:, :, None, :] - b[:, None, :, :]
    return np.einsum("bnmd,bnmd->bnm", diff, diff)


def soft_dtw_batch(a: Tensor, b: Tensor, gamma: float) -> Tensor:
    """Soft-DTW discrepancy per batch element for (B, n, d) sequences."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    ad, bd = a.data, b.data
    if ad.ndim != 3 or bd.ndim != 3 or ad.shape[0] != bd.shape[0] or ad.shape[2] != bd.shape[2]:
        raise ValueError(f"sequence batches must share batch and channel dims: {ad.shape} vs {bd.shape}")
    if ad.shape[1] == 0 or bd.shape[1] == 0:
        raise ValueError("sequences must be non-empty")
    D = _pairwise_sq_dist(ad, bd)
    R = _sdtw_forward(D, float(gamma))
    values = R[:, ad.shape[1], bd.shape[1]].copy()

    def grad_fn(g):
        E = _sdtw_backward(D, R, float(gamma))
        Ew = E * g[:, None, None]
        ga = gb = None
        if a.requires_grad:
            ga = 2.0 * (ad * Ew.sum(axis=2)[:, :, None] - Ew @ bd)
        if b.requires_grad:
            gb = 2.0 * (bd * Ew.sum(axis=1)[:, :, None] - Ew.transpose(0, 2, 1) @ ad)
        return ga, gb

    return custom_op(values, (a, b), grad_fn, name="soft_dtw")


def soft_dtw(a: Union[Tensor, np.ndarray], b: Union[Tensor, np.ndarray], gamma: float) -> Tensor:
    """Soft-DTW discrepancy between two (n, d) sequences.

    Accepts plain arrays (wrapped as constants) or tensors; returns a
    scalar tensor so gradients can flow to either input.
    """
    at = a if isinstance(a, Tensor) else constant(np.asarray(a, dtype=np.float64))
    bt = b if isinstance(b, Tensor) else constant(np.asarray(b, dtype=np.float64))
    ad, bd = at.data, bt.data
    if ad.ndim == 1:
        ad = ad[:, None]
    if bd.ndim == 1:
        bd = bd[:, None]
    if ad.ndim != 2 or bd.ndim != 2:
        raise ValueError(f"expected (n, d) sequences, got {at.data.shape} and {bt.data.shape}")
    a3 = reshape(at, (1,) + ad.shape)
    b3 = reshape(bt, (1,) + bd.shape)
    per_pair = soft_dtw_batch(a3, b3, gamma)
    return reshape(per_pair, ())


def fgsm_loss(model_fn: ModelFn, x: np.ndarray, epsilon: float, target: Optional[np.ndarray] = None) -> Tensor:
    """Reconstruction MSE on a fast-gradient-sign perturbed input.

    The perturbation direction sign(d MSE / d x) is treated as a constant:
    gradients of the returned loss flow to model parameters only. The
    adversarial input is clamped to [-1, 1]. With epsilon = 0 this is
    exactly the plain reconstruction MSE.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    x = np.asarray(x, dtype=np.float64)
    target_arr = x if target is None else np.asarray(target, dtype=np.float64)
    if epsilon == 0:
        return mse(model_fn(constant(x)), constant(target_arr))
    x_leaf = Tensor(x, requires_grad=True, name="fgsm_input")
    inner = mse(model_fn(x_leaf), constant(target_arr))
    g = input_gradient(inner, x_leaf)
    x_adv = np.clip(x + epsilon * np.sign(g), -1.0, 1.0)
    return mse(model_fn(constant(x_adv)), constant(target_arr))


class CompositeLoss(NamedTuple):
    total: Tensor
    mse_term: float
    dtw_term: float
    fgsm_term: float


def composite_loss(
    model_fn: ModelFn,
    x: np.ndarray,
    config: LossConfig,
    window_len: int,
    channels: int = 2,
) -> CompositeLoss:
    """Weighted sum of the reconstruction, alignment and adversarial terms.

    ``x`` is a (B, window_len * channels) batch of flattened windows; the
    same windows serve as input and target. One backward pass on
    ``total`` accumulates all gradients.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    target = constant(x)
    recon = model_fn(constant(x))
    l_mse = mse(recon, target)

    seq_shape = (x.shape[0], window_len, channels)
    l_dtw = mean_all(
        soft_dtw_batch(reshape(recon, seq_shape), constant(x.reshape(seq_shape)), config.dtw_gamma)
    )

    terms = [scale(l_mse, config.weight_mse), scale(l_dtw, config.weight_dtw)]
    fgsm_value = 0.0
    if config.weight_fgsm > 0:
        l_fgsm = fgsm_loss(model_fn, x, config.fgsm_epsilon)
        terms.append(scale(l_fgsm, config.weight_fgsm))
        fgsm_value = l_fgsm.item()
    total = terms[0]
    for t in terms[1:]:
        total = add(total, t)
    return CompositeLoss(
        total=total,
        mse_term=l_mse.item(),
        dtw_term=l_dtw.item(),
        fgsm_term=fgsm_value,
    )
