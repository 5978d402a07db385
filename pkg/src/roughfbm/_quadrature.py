"""Gauss-Legendre rules with geometric grading toward endpoint singularities."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

SIGMA = 0.2
LEVELS = 16
NODES = 8


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@lru_cache(maxsize=None)
def graded_rule(nodes: int = NODES, levels: int = LEVELS, sigma: float = SIGMA,
                both_ends: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule on [0, 1] with panels ``[sigma^(k+1), sigma^k]`` toward 0.

    With ``both_ends`` the rule is applied on each half of [0, 1], graded
    toward the outer endpoint of that half.
    """
    gx, gw = gauss_legendre(nodes)
    xs, ws = [gx * sigma**levels], [gw * sigma**levels]
    for k in range(levels - 1, -1, -1):
        a, b = sigma ** (k + 1), sigma**k
        xs.append(a + (b - a) * gx)
        ws.append((b - a) * gw)
    x, w = np.concatenate(xs), np.concatenate(ws)
    if both_ends:
        x = np.concatenate([0.5 * x, 1.0 - 0.5 * x[::-1]])
        w = np.concatenate([0.5 * w, 0.5 * w[::-1]])
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def panel_rule(points, nodes: int = NODES, levels: int = LEVELS, sigma: float = SIGMA,
               both_ends: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Graded rule on the union of panels between consecutive ``points``."""
    pts = np.unique(np.asarray(points, dtype=float))
    x, w = graded_rule(nodes, levels, sigma, both_ends)
    a, b = pts[:-1, None], pts[1:, None]
    return (a + (b - a) * x).ravel(), ((b - a) * w).ravel()
