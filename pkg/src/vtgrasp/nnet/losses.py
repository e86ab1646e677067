"""Training objectives: smooth-L1 (Huber) for grasp maps, cross-entropy for classes."""

from __future__ import annotations

import numpy as np


def huber_elementwise(e: np.ndarray, delta: float = 1.0) -> np.ndarray:
    """Per-entry smooth-L1: 0.5 e^2 inside the unit band, |e| - 0.5 outside."""
    a = np.abs(e)
    return np.where(a < delta, 0.5 * e * e, delta * (a - 0.5 * delta))


def huber_loss(pred_q, pred_r, q, r, delta: float = 1.0, return_grad: bool = False):
    """Smooth-L1 loss between predicted and target grasp maps.

    The per-entry losses of both maps are summed and divided by the number of
    pixels (batch size times height times width). With ``return_grad`` the
    gradients with respect to ``pred_q`` and ``pred_r`` are returned too.
    """
    pred_q, pred_r, q, r = (np.asarray(a) for a in (pred_q, pred_r, q, r))
    if not (pred_q.shape == pred_r.shape == q.shape == r.shape):
        raise ValueError(
            f"shape mismatch: {pred_q.shape}, {pred_r.shape} vs {q.shape}, {r.shape}"
        )
    n_pix = pred_q.size
    eq = pred_q - q
    er = pred_r - r
    loss = float((huber_elementwise(eq, delta).sum() + huber_elementwise(er, delta).sum()) / n_pix)
    if not return_grad:
        return loss
    dq = np.clip(eq, -delta, delta) / n_pix
    dr = np.clip(er, -delta, delta) / n_pix
    return loss, (dq.astype(pred_q.dtype), dr.astype(pred_r.dtype))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray, return_grad: bool = False):
    """Mean softmax cross-entropy over a batch of integer labels."""
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ValueError(f"bad shapes: logits {logits.shape}, labels {labels.shape}")
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(n), labels].mean())
    if not return_grad:
        return loss
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, (grad / n).astype(logits.dtype)
