"""Central finite-difference checks for layers, losses and whole networks."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .layers import Layer
from .losses import cross_entropy, huber_loss


def numeric_grad(f: Callable[[], float], arr: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """d f / d arr by central differences, perturbing ``arr`` in place."""
    g = np.zeros_like(arr, dtype=np.float64)
    for i in np.ndindex(arr.shape):
        old = arr[i]
        arr[i] = old + eps
        a = f()
        arr[i] = old - eps
        b = f()
        arr[i] = old
        g[i] = (a - b) / (2 * eps)
    return g


def rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> float:
    """max |a - n| over the larger max magnitude of the two.

    The scale never drops below ``floor``: a gradient that is exactly zero
    (a conv bias feeding batch normalization) is measured by central
    differences only to roundoff, so its ratio against ~0 carries no signal.
    """
    scale = max(float(np.abs(analytic).max(initial=0.0)), float(np.abs(numeric).max(initial=0.0)), floor)
    return float(np.abs(analytic - numeric).max() / scale)


def check_layer(layer: Layer, x: np.ndarray, rng: np.random.Generator, eps: float = 1e-5) -> dict[str, float]:
    """Relative errors of the input gradient and every parameter gradient.

    The scalar probed is ``sum(layer(x) * w)`` for a fixed random ``w``.
    """
    for p in layer.parameters():
        p.zero_grad()
    out = layer.forward(x)
    w = rng.standard_normal(out.shape)
    dx = layer.backward(w)
    analytic = {p.name or f"param{i}": p.grad.copy() for i, p in enumerate(layer.parameters())}

    def f() -> float:
        y = layer.forward(x)
        layer._cache = None
        return float((y * w).sum())

    errs = {"input": rel_error(dx, numeric_grad(f, x, eps))}
    for i, p in enumerate(layer.parameters()):
        name = p.name or f"param{i}"
        errs[name] = rel_error(analytic[name], numeric_grad(f, p.data, eps))
    return errs


def check_huber(shape, rng: np.random.Generator, eps: float = 1e-5) -> dict[str, float]:
    # keep residuals away from the |e| = 1 kink where the derivative jumps
    pq, pr = rng.standard_normal(shape) * 1.5, rng.standard_normal(shape) * 1.5
    q, r = np.zeros(shape), np.zeros(shape)
    for a in (pq, pr):
        near = np.abs(np.abs(a) - 1.0) < 10 * eps
        a[near] += 0.1
    _, (dq, dr) = huber_loss(pq, pr, q, r, return_grad=True)
    f = lambda: huber_loss(pq, pr, q, r)  # noqa: E731
    return {"pred_q": rel_error(dq, numeric_grad(f, pq, eps)), "pred_r": rel_error(dr, numeric_grad(f, pr, eps))}


def check_cross_entropy(n: int, k: int, rng: np.random.Generator, eps: float = 1e-5) -> dict[str, float]:
    logits = rng.standard_normal((n, k))
    labels = rng.integers(0, k, n)
    _, g = cross_entropy(logits, labels, return_grad=True)
    return {"logits": rel_error(g, numeric_grad(lambda: cross_entropy(logits, labels), logits, eps))}


def check_tgcnn(model, image: np.ndarray, rng: np.random.Generator, n_probe: int = 20,
                eps: float = 1e-5, floor: float = 1e-3) -> dict[str, float]:
    """Spot-check ``n_probe`` entries of every parameter through the full network (float64 model).

    The probed sum spans the whole output, so difference roundoff is near 1e-8
    and ``floor`` is raised accordingly.
    """
    q, r = model.forward(image)
    wq, wr = rng.standard_normal(q.shape), rng.standard_normal(r.shape)
    model.zero_grad()
    model.backward(wq, wr)
    errs = {}

    def f() -> float:
        a, b = model.forward(image)
        model._ready = False
        return float((a * wq).sum() + (b * wr).sum())

    for p in model.parameters():
        flat = p.data.reshape(-1)
        idx = rng.choice(flat.size, size=min(n_probe, flat.size), replace=False)
        num = np.zeros(len(idx))
        for j, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + eps
            a = f()
            flat[i] = old - eps
            b = f()
            flat[i] = old
            num[j] = (a - b) / (2 * eps)
        errs[p.name] = rel_error(p.grad.reshape(-1)[idx], num, floor)
    return errs


def _away_from_zero(x: np.ndarray, margin: float = 1e-3) -> np.ndarray:
    # ReLU is not differentiable at 0; finite differences straddling it are meaningless
    return np.where(np.abs(x) < margin, np.sign(x + 1e-300) * margin * 2, x)


def check_add(shape, rng: np.random.Generator, eps: float = 1e-5) -> dict[str, float]:
    from .layers import add_backward

    a, b = rng.standard_normal(shape), rng.standard_normal(shape)
    w = rng.standard_normal(shape)
    da, db = add_backward(w)
    f = lambda: float(((a + b) * w).sum())  # noqa: E731
    return {"a": rel_error(da, numeric_grad(f, a, eps)), "b": rel_error(db, numeric_grad(f, b, eps))}


def gradient_suite(n_shapes: int = 50, seed: int = 0, eps: float = 1e-5) -> list[dict]:
    """Finite-difference check of every primitive over ``n_shapes`` random shapes (float64).

    Returns one row per (primitive, shape) with the worst relative error
    over the input and all parameters.
    """
    from .layers import BatchNorm2d, Conv2d, ConvTranspose2d, Linear, ReLU

    rng = np.random.default_rng([0x6C, seed])
    f64 = np.float64
    rows = []
    for _ in range(n_shapes):
        n = int(rng.integers(1, 3))
        h, w = (int(v) for v in rng.integers(3, 9, 2))
        cin, cout = (int(v) for v in rng.integers(1, 5, 2))
        k = int(rng.choice([1, 3, 5]))
        stride = int(rng.integers(1, 3))
        hh, ww = max(h, k), max(w, k)
        x = lambda *s: rng.standard_normal(s)  # noqa: E731
        bn_eval = BatchNorm2d(cin, dtype=f64, name="bn")
        bn_eval.running_mean[:] = rng.standard_normal(cin)
        bn_eval.running_var[:] = rng.uniform(0.5, 2.0, cin)
        bn_eval.training = False
        bn_train = BatchNorm2d(cin, dtype=f64, name="bn")
        bn_train.gamma.data[:] = rng.uniform(0.5, 1.5, cin)
        cases = [
            ("conv2d", Conv2d(cin, cout, k, stride, rng=rng, dtype=f64), x(n, hh, ww, cin)),
            ("conv_transpose2d", ConvTranspose2d(cin, cout, int(rng.choice([2, 3, 4])), stride,
                                                 int(rng.integers(0, 2)), rng=rng, dtype=f64),
             x(n, h, w, cin)),
            ("batchnorm_train", bn_train, x(max(n, 2), h, w, cin)),
            ("batchnorm_eval", bn_eval, x(n, h, w, cin)),
            ("relu", ReLU(), _away_from_zero(x(n, h, w, cin))),
            ("linear", Linear(h, w, rng=rng, dtype=f64), x(n + 1, h)),
        ]
        for name, layer, inp in cases:
            errs = check_layer(layer, inp, rng, eps)
            rows.append({"primitive": name, "shape": list(inp.shape), "max_rel_error": max(errs.values())})
        for name, errs, shape in (
            ("add", check_add((n, h, w, cin), rng, eps), (n, h, w, cin)),
            ("huber", check_huber((n, h, w), rng, eps), (n, h, w)),
            ("cross_entropy", check_cross_entropy(n + 2, cout + 1, rng, eps), (n + 2, cout + 1)),
        ):
            rows.append({"primitive": name, "shape": list(shape), "max_rel_error": max(errs.values())})
    return rows
