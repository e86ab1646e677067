"""Parameter storage shared by every layer of the engine."""

from __future__ import annotations

import numpy as np


class Tensor:
    """A data buffer with an optional gradient buffer of the same shape."""

    __slots__ = ("data", "grad", "name")

    def __init__(self, data: np.ndarray, name: str = "", requires_grad: bool = True):
        self.data = np.ascontiguousarray(data)
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0

    def astype(self, dtype) -> None:
        self.data = self.data.astype(dtype)
        if self.grad is not None:
            self.grad = self.grad.astype(dtype)

    def __repr__(self) -> str:
        return f"Tensor(name={self.name!r}, shape={self.shape}, dtype={self.data.dtype})"
