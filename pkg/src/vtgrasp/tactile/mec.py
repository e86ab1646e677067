"""Minimum enclosing circle (Welzl's randomized incremental algorithm)."""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np

_EPS = 1e-10


def _circle2(a, b):
    c = (a + b) / 2.0
    return c, float(np.hypot(*(a - c)))


def _circle3(a, b, c):
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-14:
        # collinear: the farthest pair spans the other point
        pairs = [(a, b), (a, c), (b, c)]
        return max((_circle2(p, q) for p, q in pairs), key=lambda t: t[1])
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    ctr = np.array([ux, uy])
    return ctr, float(max(np.hypot(*(a - ctr)), np.hypot(*(b - ctr)), np.hypot(*(c - ctr))))


def _inside(circle, p, scale) -> bool:
    c, r = circle
    return float(np.hypot(*(p - c))) <= r + _EPS * scale


def min_enclosing_circle(points, seed: int = 0) -> tuple[np.ndarray, float]:
    """Smallest circle containing every point of an (n, 2) array.

    Points are visited in a seeded random order, which gives expected linear
    time; the result does not depend on the order.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("empty point set")
    pts = np.unique(pts, axis=0)
    if len(pts) > 8:
        pts = _hull_points(pts)
    pts = pts[np.random.default_rng(seed).permutation(len(pts))]
    scale = max(1.0, float(np.abs(pts).max()))
    circle = (pts[0].copy(), 0.0)
    for i in range(1, len(pts)):
        p = pts[i]
        if _inside(circle, p, scale):
            continue
        circle = (p.copy(), 0.0)
        for j in range(i):
            q = pts[j]
            if _inside(circle, q, scale):
                continue
            circle = _circle2(p, q)
            for k in range(j):
                r = pts[k]
                if not _inside(circle, r, scale):
                    circle = _circle3(p, q, r)
    return circle[0], circle[1]


def _hull_points(pts: np.ndarray) -> np.ndarray:
    """Convex hull vertices; the enclosing circle of the hull is that of the set."""
    from ..annotate import _convex_hull

    h = _convex_hull(pts)
    return h if len(h) >= 2 else pts


def brute_force_circle(points) -> tuple[np.ndarray, float]:
    """O(n^3) reference: the best of all pair-diameter and triple-circumcircle centers.

    Each candidate center is scored by its distance to the farthest point, so
    every candidate circle is feasible and the smallest one is the answer.
    """
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    if len(pts) == 0:
        raise ValueError("empty point set")
    n = len(pts)
    if n == 1:
        return pts[0], 0.0
    i, j = np.triu_indices(n, 1)
    centers = [(pts[i] + pts[j]) / 2.0]
    if n >= 3:
        ii, jj, kk = _triples(n)
        a, b, c = pts[ii], pts[jj], pts[kk]
        d = 2.0 * (a[:, 0] * (b[:, 1] - c[:, 1]) + b[:, 0] * (c[:, 1] - a[:, 1])
                   + c[:, 0] * (a[:, 1] - b[:, 1]))
        ok = np.abs(d) > 1e-14
        a, b, c, d = a[ok], b[ok], c[ok], d[ok]
        a2, b2, c2 = (a**2).sum(1), (b**2).sum(1), (c**2).sum(1)
        ux = (a2 * (b[:, 1] - c[:, 1]) + b2 * (c[:, 1] - a[:, 1]) + c2 * (a[:, 1] - b[:, 1])) / d
        uy = (a2 * (c[:, 0] - b[:, 0]) + b2 * (a[:, 0] - c[:, 0]) + c2 * (b[:, 0] - a[:, 0])) / d
        centers.append(np.column_stack([ux, uy]))
    cand = np.concatenate(centers)
    # squared distance to the farthest point via |c|^2 - 2 c.p + |p|^2
    far2 = ((cand**2).sum(1)[:, None] - 2.0 * cand @ pts.T + (pts**2).sum(1)[None, :]).max(1)
    best_c = cand[int(np.argmin(far2))]
    return best_c, float(np.hypot(*(pts - best_c).T).max())


@lru_cache(maxsize=64)
def _triples(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    idx = np.array(list(combinations(range(n), 3)), dtype=np.intp).reshape(-1, 3)
    return idx[:, 0], idx[:, 1], idx[:, 2]
