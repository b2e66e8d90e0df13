"""Central finite-difference validation of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np

from .params import ParameterSet
from .tensor import Tensor, backward


@dataclass
class GradCheckReport:
    """Worst relative error between analytic and numeric gradients."""

    max_rel_error: float
    tolerance: float
    per_param: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"gradient check {verdict}: max rel error {self.max_rel_error:.3e} (tolerance {self.tolerance:.1e})"


def gradient_check(
    loss_fn: Callable[[], Tensor],
    params: ParameterSet,
    h: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare backprop gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must rebuild the forward graph from ``params`` on every
    call (it is invoked 2N+1 times for N parameter entries). Relative
    error uses a small denominator floor so exactly-zero gradients do not
    blow up the ratio. Intended for small networks only.
    """
    params.zero_grad()
    loss = loss_fn()
    backward(loss)
    analytic = {name: (np.zeros_like(t.data) if t.grad is None else np.array(t.grad)) for name, t in params.items()}

    per_param: Dict[str, float] = {}
    worst = 0.0
    for name, t in params.items():
        base = t.data.copy()
        numeric = np.zeros_like(base)
        flat = base.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            t.data = flat.reshape(base.shape)
            up = loss_fn().item()
            flat[i] = orig - h
            t.data = flat.reshape(base.shape)
            down = loss_fn().item()
            flat[i] = orig
            num_flat[i] = (up - down) / (2.0 * h)
        t.data = base
        a = analytic[name].reshape(-1)
        n = num_flat
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        err = float(np.max(np.abs(a - n) / denom)) if flat.size else 0.0
        per_param[name] = err
        worst = max(worst, err)
    return GradCheckReport(max_rel_error=worst, tolerance=tolerance, per_param=per_param)
