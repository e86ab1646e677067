"""Network definitions: the TGCNN grasp-map generator and an MLP used by the
fusion classifier."""

from __future__ import annotations

import numpy as np

from .layers import BackwardBeforeForward, BatchNorm2d, Conv2d, ConvTranspose2d, Layer, Linear, ReLU
from .tensor import Tensor


class Module:
    """Bookkeeping shared by composite networks.

    Subclasses list their layers in ``self.layers`` (order defines parameter
    order in checkpoints).
    """

    layers: list[Layer]

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]

    def named_buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            prefix = getattr(layer, "gamma", None)
            tag = prefix.name.rsplit(".", 1)[0] if prefix is not None else f"layer{i}"
            for k, v in layer.buffers().items():
                out[f"{tag}.{k}"] = v
        return out

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode: bool = True):
        for layer in self.layers:
            layer.training = mode
        return self

    def eval(self):
        return self.train(False)

    @property
    def training(self) -> bool:
        return all(layer.training for layer in self.layers)

    def to(self, dtype):
        for p in self.parameters():
            p.astype(dtype)
        for layer in self.layers:
            for name, buf in layer.buffers().items():
                setattr(layer, name, buf.astype(dtype))
        self.dtype = np.dtype(dtype)
        return self

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


class ResidualBlock(Module):
    """conv-bn-relu-conv-bn, identity shortcut, relu."""

    def __init__(self, channels: int, rng: np.random.Generator, dtype=np.float32, name: str = "res"):
        self.conv1 = Conv2d(channels, channels, 3, 1, rng=rng, dtype=dtype, name=f"{name}.conv1")
        self.bn1 = BatchNorm2d(channels, dtype=dtype, name=f"{name}.bn1")
        self.relu1 = ReLU()
        self.conv2 = Conv2d(channels, channels, 3, 1, rng=rng, dtype=dtype, name=f"{name}.conv2")
        self.bn2 = BatchNorm2d(channels, dtype=dtype, name=f"{name}.bn2")
        self.relu_out = ReLU()
        self.layers = [self.conv1, self.bn1, self.relu1, self.conv2, self.bn2, self.relu_out]

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self.relu1.forward(self.bn1.forward(self.conv1.forward(x)))
        h = self.bn2.forward(self.conv2.forward(h))
        return self.relu_out.forward(h + x)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        d = self.relu_out.backward(dout)
        dx_short = d
        d = self.conv2.backward(self.bn2.backward(d))
        d = self.conv1.backward(self.bn1.backward(self.relu1.backward(d)))
        return d + dx_short


class TGCNN(Module):
    """Pixel-wise grasp generator producing a quality map and a radius map.

    Encoder: 9x9/2 conv (3->16), 5x5/2 conv (16->32). Body: residual blocks at
    32 channels. Decoder: two stride-2 transposed convs (32->16, 16->8); the
    first decoder stage adds the 16-channel encoder activation of matching
    resolution, and the body input is added back before decoding. Heads: two
    zero-initialized 1x1 convs with linear outputs.
    """

    def __init__(self, seed: int = 0, n_res: int = 3, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.dtype = np.dtype(dtype)
        self.n_res = n_res
        self.enc1 = Conv2d(3, 16, 9, 2, pad=4, rng=rng, dtype=dtype, name="enc1")
        self.enc1_relu = ReLU()
        self.enc2 = Conv2d(16, 32, 5, 2, pad=2, rng=rng, dtype=dtype, name="enc2")
        self.enc2_relu = ReLU()
        self.blocks = [ResidualBlock(32, rng, dtype, name=f"res{i}") for i in range(n_res)]
        self.dec1 = ConvTranspose2d(32, 16, 4, 2, 1, rng=rng, dtype=dtype, name="dec1")
        self.dec1_relu = ReLU()
        self.dec2 = ConvTranspose2d(16, 8, 4, 2, 1, rng=rng, dtype=dtype, name="dec2")
        self.dec2_relu = ReLU()
        self.head_q = Conv2d(8, 1, 1, 1, pad=0, dtype=dtype, zero_init=True, name="head_q")
        self.head_r = Conv2d(8, 1, 1, 1, pad=0, dtype=dtype, zero_init=True, name="head_r")
        self.layers = [self.enc1, self.enc1_relu, self.enc2, self.enc2_relu]
        for b in self.blocks:
            self.layers.extend(b.layers)
        self.layers += [self.dec1, self.dec1_relu, self.dec2, self.dec2_relu, self.head_q, self.head_r]
        self._ready = False

    def forward(self, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map images (N,3,H,W) or (3,H,W) to quality and radius maps (N,H,W).

        H and W must be divisible by 4.
        """
        x = np.asarray(image)
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError(f"expected (N,3,H,W) or (3,H,W) image, got {np.shape(image)}")
        n, _, h, w = x.shape
        if h % 4 or w % 4:
            raise ValueError(f"spatial size {h}x{w} must be divisible by 4")
        x = np.ascontiguousarray(x.transpose(0, 2, 3, 1), dtype=self.dtype)
        e1 = self.enc1_relu.forward(self.enc1.forward(x))
        e2 = self.enc2_relu.forward(self.enc2.forward(e1))
        b = e2
        for block in self.blocks:
            b = block.forward(b)
        d1 = self.dec1_relu.forward(self.dec1.forward(b + e2) + e1)
        d2 = self.dec2_relu.forward(self.dec2.forward(d1))
        q = self.head_q.forward(d2)[..., 0]
        r = self.head_r.forward(d2)[..., 0]
        self._ready = True
        if single:
            return q[0], r[0]
        return q, r

    def backward(self, dq: np.ndarray, dr: np.ndarray) -> None:
        """Accumulate parameter gradients given dLoss/dQ and dLoss/dR."""
        if not self._ready:
            raise BackwardBeforeForward("TGCNN.backward called before forward")
        self._ready = False
        dq = np.asarray(dq, dtype=self.dtype)
        dr = np.asarray(dr, dtype=self.dtype)
        if dq.ndim == 2:
            dq, dr = dq[None], dr[None]
        dd2 = self.head_q.backward(dq[..., None]) + self.head_r.backward(dr[..., None])
        dd1 = self.dec2.backward(self.dec2_relu.backward(dd2))
        dsum = self.dec1_relu.backward(dd1)
        de1 = dsum
        db = self.dec1.backward(dsum)
        de2 = db
        for block in reversed(self.blocks):
            db = block.backward(db)
        de2 = de2 + db
        de1 = de1 + self.enc2.backward(self.enc2_relu.backward(de2))
        self.enc1.backward(self.enc1_relu.backward(de1))


class MLP(Module):
    """Fully connected ReLU network producing class logits."""

    def __init__(self, sizes: list[int], seed: int = 0, dtype=np.float32, bias: bool = True):
        rng = np.random.default_rng(seed)
        self.dtype = np.dtype(dtype)
        self.sizes = list(sizes)
        self.bias = bias
        self.layers = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            self.layers.append(Linear(a, b, rng=rng, dtype=dtype, name=f"fc{i}", bias=bias))
            if i < len(sizes) - 2:
                self.layers.append(ReLU())
        self._ready = False

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=self.dtype)
        for layer in self.layers:
            h = layer.forward(h)
        self._ready = True
        return h

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        if not self._ready:
            raise BackwardBeforeForward("MLP.backward called before forward")
        self._ready = False
        d = np.asarray(dlogits, dtype=self.dtype)
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d
