"""Differentiable layers with hand-written backward passes.

Activations use NHWC layout throughout; every layer caches what its backward
pass needs during ``forward`` and releases it in ``backward``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor


class BackwardBeforeForward(RuntimeError):
    pass


class Layer:
    training: bool = True

    def parameters(self) -> list[Tensor]:
        return []

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def _take_cache(self):
        cache = getattr(self, "_cache", None)
        if cache is None:
            raise BackwardBeforeForward(
                f"{type(self).__name__}.backward called without a preceding forward"
            )
        self._cache = None
        return cache


def _he_normal(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2d(Layer):
    """2-D convolution, weight layout (out, in, k, k)."""

    def __init__(self, cin: int, cout: int, k: int, stride: int = 1, pad: int | None = None,
                 rng: np.random.Generator | None = None, dtype=np.float32,
                 zero_init: bool = False, name: str = "conv"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cin, self.cout, self.k, self.stride = cin, cout, k, stride
        self.pad = (k - 1) // 2 if pad is None else pad
        shape = (cout, cin, k, k)
        w = np.zeros(shape, dtype) if zero_init else _he_normal(rng, shape, cin * k * k, dtype)
        self.weight = Tensor(w, f"{name}.weight")
        self.bias = Tensor(np.zeros(cout, dtype), f"{name}.bias")
        self._cache = None

    def parameters(self):
        return [self.weight, self.bias]

    def out_size(self, n: int) -> int:
        return (n + 2 * self.pad - self.k) // self.stride + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, h, w, c = x.shape
        if c != self.cin:
            raise ValueError(f"expected {self.cin} input channels, got {c}")
        k, s, p = self.k, self.stride, self.pad
        ho, wo = self.out_size(h), self.out_size(w)
        if ho <= 0 or wo <= 0:
            raise ValueError(f"input {h}x{w} too small for kernel {k}")
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        win = sliding_window_view(xp, (k, k), axis=(1, 2))
        win = win[:, : (ho - 1) * s + 1 : s, : (wo - 1) * s + 1 : s]
        cols = win.reshape(n * ho * wo, c * k * k)
        wmat = self.weight.data.reshape(self.cout, -1)
        out = cols @ wmat.T
        out += self.bias.data
        self._cache = (cols, xp.shape, (h, w), (ho, wo))
        return out.reshape(n, ho, wo, self.cout)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        cols, xp_shape, (h, w), (ho, wo) = self._take_cache()
        k, s, p = self.k, self.stride, self.pad
        d2 = dout.reshape(-1, self.cout)
        wmat = self.weight.data.reshape(self.cout, -1)
        self.weight.grad += (d2.T @ cols).reshape(self.weight.shape)
        self.bias.grad += d2.sum(axis=0)
        dcols = (d2 @ wmat).reshape(xp_shape[0], ho, wo, self.cin, k, k)
        dxp = np.zeros(xp_shape, dtype=dout.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, i : i + (ho - 1) * s + 1 : s, j : j + (wo - 1) * s + 1 : s, :] += dcols[..., i, j]
        return dxp[:, p : p + h, p : p + w, :] if p else dxp


class ConvTranspose2d(Layer):
    """Transposed convolution, weight layout (in, out, k, k).

    Output size is ``(n - 1) * stride - 2 * pad + k``; the defaults (k=4,
    stride=2, pad=1) double the spatial size.
    """

    def __init__(self, cin: int, cout: int, k: int = 4, stride: int = 2, pad: int = 1,
                 rng: np.random.Generator | None = None, dtype=np.float32, name: str = "tconv"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cin, self.cout, self.k, self.stride, self.pad = cin, cout, k, stride, pad
        shape = (cin, cout, k, k)
        fan_in = cin * k * k // (stride * stride)
        self.weight = Tensor(_he_normal(rng, shape, fan_in, dtype), f"{name}.weight")
        self.bias = Tensor(np.zeros(cout, dtype), f"{name}.bias")
        self._cache = None

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, h, w, c = x.shape
        if c != self.cin:
            raise ValueError(f"expected {self.cin} input channels, got {c}")
        k, s, p = self.k, self.stride, self.pad
        hf, wf = (h - 1) * s + k, (w - 1) * s + k
        ho, wo = hf - 2 * p, wf - 2 * p
        xf = x.reshape(-1, c)
        cols = (xf @ self.weight.data.reshape(c, -1)).reshape(n, h, w, self.cout, k, k)
        full = np.zeros((n, hf, wf, self.cout), dtype=x.dtype)
        for i in range(k):
            for j in range(k):
                full[:, i : i + (h - 1) * s + 1 : s, j : j + (w - 1) * s + 1 : s, :] += cols[..., i, j]
        out = full[:, p : p + ho, p : p + wo, :] + self.bias.data
        self._cache = (xf, (n, h, w), (hf, wf))
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        xf, (n, h, w), (hf, wf) = self._take_cache()
        k, s, p = self.k, self.stride, self.pad
        self.bias.grad += dout.sum(axis=(0, 1, 2))
        dfull = np.zeros((n, hf, wf, self.cout), dtype=dout.dtype)
        dfull[:, p : hf - p, p : wf - p, :] = dout
        win = sliding_window_view(dfull, (k, k), axis=(1, 2))[:, ::s, ::s][:, :h, :w]
        dcols = win.reshape(n * h * w, self.cout * k * k)
        wmat = self.weight.data.reshape(self.cin, -1)
        self.weight.grad += (xf.T @ dcols).reshape(self.weight.shape)
        return (dcols @ wmat.T).reshape(n, h, w, self.cin)


class BatchNorm2d(Layer):
    """Per-channel batch normalization over (N, H, W)."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5,
                 dtype=np.float32, name: str = "bn"):
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.gamma = Tensor(np.ones(channels, dtype), f"{name}.gamma")
        self.beta = Tensor(np.zeros(channels, dtype), f"{name}.beta")
        self.running_mean = np.zeros(channels, dtype)
        self.running_var = np.ones(channels, dtype)
        self._cache = None

    def parameters(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[-1]}")
        if self.training:
            mean = x.mean(axis=(0, 1, 2))
            var = x.var(axis=(0, 1, 2))
            m = x.size // self.channels
            unbiased = var * (m / max(m - 1, 1))
            self.running_mean *= 1 - self.momentum
            self.running_mean += self.momentum * mean
            self.running_var *= 1 - self.momentum
            self.running_var += self.momentum * unbiased
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, self.training)
        return xhat * self.gamma.data + self.beta.data

    def backward(self, dout: np.ndarray) -> np.ndarray:
        xhat, inv_std, training = self._take_cache()
        self.gamma.grad += (dout * xhat).sum(axis=(0, 1, 2))
        self.beta.grad += dout.sum(axis=(0, 1, 2))
        dxhat = dout * self.gamma.data
        if not training:
            return dxhat * inv_std
        m = dout.size // self.channels
        return (inv_std / m) * (
            m * dxhat - dxhat.sum(axis=(0, 1, 2)) - xhat * (dxhat * xhat).sum(axis=(0, 1, 2))
        )


class ReLU(Layer):
    def __init__(self):
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        mask = x > 0
        self._cache = mask
        return x * mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._take_cache()


class Linear(Layer):
    """Dense layer on (N, in) inputs, weight layout (in, out)."""

    def __init__(self, nin: int, nout: int, rng: np.random.Generator | None = None,
                 dtype=np.float32, zero_init: bool = False, name: str = "linear",
                 bias: bool = True):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.nin, self.nout = nin, nout
        w = np.zeros((nin, nout), dtype) if zero_init else _he_normal(rng, (nin, nout), nin, dtype)
        self.weight = Tensor(w, f"{name}.weight")
        self.bias = Tensor(np.zeros(nout, dtype), f"{name}.bias") if bias else None
        self._cache = None

    def parameters(self):
        return [self.weight] if self.bias is None else [self.weight, self.bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.nin:
            raise ValueError(f"expected (N, {self.nin}) input, got {x.shape}")
        self._cache = x
        y = x @ self.weight.data
        return y if self.bias is None else y + self.bias.data

    def backward(self, dout: np.ndarray) -> np.ndarray:
        x = self._take_cache()
        self.weight.grad += x.T @ dout
        if self.bias is not None:
            self.bias.grad += dout.sum(axis=0)
        return dout @ self.weight.data.T


def add_backward(dout: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``a + b`` routes unchanged to both operands."""
    return dout, dout
