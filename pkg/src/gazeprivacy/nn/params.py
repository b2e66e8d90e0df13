"""Named parameter collections and weight initialization."""
from __future__ import annotations

from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from .tensor import Tensor


class ParameterSet:
    """An ordered mapping of parameter names to trainable tensors.

    Shapes are fixed at construction and every entry must be finite.
    """

    def __init__(self, arrays: Mapping[str, np.ndarray]):
        self._tensors: Dict[str, Tensor] = {}
        for name, arr in arrays.items():
            arr = np.array(arr, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter '{name}' contains non-finite entries")
            self._tensors[name] = Tensor(arr, requires_grad=True, name=name)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> Tuple[str, ...]:
        return tuple(self._tensors)

    def items(self):
        return self._tensors.items()

    def shapes(self) -> Dict[str, tuple]:
        return {k: v.data.shape for k, v in self._tensors.items()}

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def arrays(self) -> Dict[str, np.ndarray]:
        """Copies of the current parameter values."""
        return {k: v.data.copy() for k, v in self._tensors.items()}

    def assert_finite(self, context: str = "") -> None:
        for name, t in self._tensors.items():
            if not np.all(np.isfinite(t.data)):
                where = f" {context}" if context else ""
                raise ValueError(f"parameter '{name}' became non-finite{where}")

    def copy(self) -> "ParameterSet":
        return ParameterSet(self.arrays())


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out)), shape (fan_out, fan_in)."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def dense_stack(rng: np.random.Generator, dims: Tuple[int, ...], prefix: str) -> Dict[str, np.ndarray]:
    """Weights and zero biases for a chain of dense layers ``dims[0] -> ... -> dims[-1]``."""
    arrays: Dict[str, np.ndarray] = {}
    for i in range(len(dims) - 1):
        arrays[f"{prefix}{i}_w"] = glorot_uniform(rng, dims[i + 1], dims[i])
        arrays[f"{prefix}{i}_b"] = np.zeros(dims[i + 1])
    return arrays
