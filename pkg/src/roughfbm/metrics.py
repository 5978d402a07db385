"""p-variation distance on dyadic partitions and the weighted dyadic norms D_{j,p}.

All tensor norms are Frobenius norms.  Paths are :class:`DyadicRoughPath`
objects, possibly batched; results then carry the batch shape.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .tensor import DyadicRoughPath, TruncatedTensor, chen_compose

__all__ = [
    "MetricParams",
    "MetricReport",
    "level_sums",
    "d_jp",
    "d_jp_report",
    "d_p_dyadic",
    "dp_upper_bound",
]


@dataclass(frozen=True)
class MetricParams:
    """Exponents of the dyadic norms and truncation depths.

    ``N_max`` truncates the sum over dyadic levels; the remainder is reported
    separately as ``tail_bound``.  ``partition_depth`` fixes the grid on which
    partitions are searched by :func:`d_p_dyadic` (``None``: the finer path's
    depth, capped at 8).
    """

    p: float = 3.5
    gamma: float = 3.5
    N_max: int = 16
    partition_depth: int | None = None

    def __post_init__(self):
        if not 3.0 < self.p < 4.0:
            raise ValueError(f"p must lie in (3, 4), got {self.p}")
        if self.gamma <= self.p - 1.0:
            raise ValueError(f"gamma must exceed p - 1 = {self.p - 1.0}, got {self.gamma}")
        if self.N_max < 1:
            raise ValueError("N_max must be >= 1")
        if self.partition_depth is not None and self.partition_depth < 0:
            raise ValueError("partition_depth must be >= 0")


@dataclass(frozen=True)
class MetricReport:
    j: int
    p: float
    gamma: float
    N_max: int
    value: float
    tail_bound: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _level_norm(t: TruncatedTensor, j: int) -> np.ndarray:
    a = t.level(j)
    return np.sqrt(np.sum(a**2, axis=tuple(range(-j, 0))))


def _depth(x: DyadicRoughPath | None) -> int:
    return -1 if x is None else x.depth


def _pair(x: DyadicRoughPath, y: DyadicRoughPath | None) -> None:
    if y is not None and x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} != {y.dim}")


def _level_diff(x, y, n):
    lx = x.level(n)
    return lx if y is None else lx - y.level(n)


def level_sums(x: DyadicRoughPath, y: DyadicRoughPath | None, j: int, p: float,
               n_max: int) -> np.ndarray:
    """``S_n = sum_l |X^j - Y^j|^(p/j)`` over level-``n`` intervals, ``n = 1..n_max``.

    Levels finer than both paths are evaluated in closed form: both paths are
    linear on every cell of the finer depth ``M``, so ``S_n = 2^((n-M)(1-p)) S_M``.
    Returns shape ``batch_shape + (n_max,)``.
    """
    if j not in (1, 2, 3):
        raise ValueError(f"j must be 1, 2 or 3, got {j}")
    _pair(x, y)
    M = max(x.depth, _depth(y))
    out = []
    S_M = None
    for n in range(1, n_max + 1):
        if n <= M:
            s = np.sum(_level_norm(_level_diff(x, y, n), j) ** (p / j), axis=-1)
            out.append(s)
        else:
            if S_M is None:
                S_M = np.sum(_level_norm(_level_diff(x, y, M), j) ** (p / j), axis=-1)
            out.append(S_M * 2.0 ** ((n - M) * (1.0 - p)))
    return np.stack(out, axis=-1)


def _tail_weights(start: int, M: int, p: float, gamma: float) -> float:
    # sum_{n >= start} n^gamma 2^{(n-M)(1-p)}, start > M
    total, n = 0.0, start
    while True:
        term = n**gamma * 2.0 ** ((n - M) * (1.0 - p))
        total += term
        if term < 1e-18 * total:
            return total
        n += 1


def _weighted(x, y, j: int, params: MetricParams):
    M = max(x.depth, _depth(y))
    p, g = params.p, params.gamma
    top = max(params.N_max, M)
    S = level_sums(x, y, j, p, top)
    w = np.arange(1, top + 1, dtype=float) ** g
    trunc = np.sum(S[..., :params.N_max] * w[:params.N_max], axis=-1)
    rest = np.sum(S[..., params.N_max:] * w[params.N_max:], axis=-1)
    S_M = np.sum(_level_norm(_level_diff(x, y, M), j) ** (p / j), axis=-1)
    rest = rest + S_M * _tail_weights(top + 1, M, p, g)
    return trunc, rest


def d_jp(x: DyadicRoughPath, y: DyadicRoughPath | None, j: int, params: MetricParams):
    """Weighted dyadic norm ``D_{j,p}(X, Y)`` truncated at ``N_max`` levels.

    ``y = None`` gives ``D_{j,p}(X) = D_{j,p}(X, 0)``.
    """
    trunc, _ = _weighted(x, y, j, params)
    val = trunc ** (j / params.p)
    return float(val) if np.ndim(val) == 0 else val


def d_jp_report(x: DyadicRoughPath, y: DyadicRoughPath | None, j: int,
                params: MetricParams) -> MetricReport:
    """Single-path ``D_{j,p}`` with the exact contribution of levels beyond ``N_max``."""
    trunc, rest = _weighted(x, y, j, params)
    if np.ndim(trunc) != 0:
        raise ValueError("reports are for unbatched paths")
    value = float(trunc ** (j / params.p))
    full = float((trunc + rest) ** (j / params.p))
    return MetricReport(j, params.p, params.gamma, params.N_max, value, full - value)


def _pairwise_increments(cells: TruncatedTensor):
    """Yield, for k = 1..N, the increments ``X_{t_i, t_k}`` for all i < k.

    ``cells`` holds the N cell increments along its last batch axis.
    """
    n = cells.batch_shape[-1]
    acc = None
    for k in range(n):
        zb = TruncatedTensor(
            cells.level1[..., k:k + 1, :], cells.level2[..., k:k + 1, :, :], cells.level3[..., k:k + 1, :, :, :]
        )
        if acc is None:
            acc = zb
        else:
            acc = chen_compose(acc, zb)
            acc = TruncatedTensor(
                np.concatenate([acc.level1, zb.level1], axis=-2),
                np.concatenate([acc.level2, zb.level2], axis=-3),
                np.concatenate([acc.level3, zb.level3], axis=-4),
            )
        yield acc


def d_p_dyadic(x: DyadicRoughPath, y: DyadicRoughPath | None, params: MetricParams):
    """Lower bound for the p-variation distance using dyadic-grid partitions.

    The supremum over partitions with points on the grid of depth
    ``partition_depth`` is computed exactly by dynamic programming, separately
    for each level ``j``; the result is the maximum over ``j`` of
    ``(sup sum |X^j - Y^j|^(p/j))^(j/p)``.
    """
    _pair(x, y)
    depth = params.partition_depth
    if depth is None:
        depth = min(max(x.depth, _depth(y)), 8)
    p = params.p
    cx = x.level(depth)
    cy = None if y is None else y.level(depth)
    n = 2**depth
    batch = cx.batch_shape[:-1]
    best = [[np.zeros(batch)] for _ in range(3)]
    gen_y = _pairwise_increments(cy) if cy is not None else None
    for k, ax in enumerate(_pairwise_increments(cx), start=1):
        diff = ax if gen_y is None else ax - next(gen_y)
        for j in (1, 2, 3):
            cost = _level_norm(diff, j) ** (p / j)
            prev = np.stack(best[j - 1], axis=-1)
            best[j - 1].append(np.max(prev + cost, axis=-1))
    vals = np.stack([best[j - 1][n] ** (j / p) for j in (1, 2, 3)], axis=-1)
    out = np.max(vals, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def dp_upper_bound(x: DyadicRoughPath, y: DyadicRoughPath, params: MetricParams):
    """Largest of the seven products of ``D_{j,p}`` terms that control ``d_p(X, Y)``.

    ``d_p(X, Y) <= C * dp_upper_bound(X, Y)`` for an unspecified constant ``C``.
    """
    d1, d2, d3 = (d_jp(x, y, j, params) for j in (1, 2, 3))
    x1, y1 = d_jp(x, None, 1, params), d_jp(y, None, 1, params)
    x2, y2 = d_jp(x, None, 2, params), d_jp(y, None, 2, params)
    terms = np.stack(np.broadcast_arrays(
        d1,
        d1 * (x1 + y1),
        d2,
        d2 * (x1 + y1),
        d1 * (x2 + y2),
        d1 * (x1**2 + y1**2),
        d3,
    ), axis=-1)
    out = np.max(terms, axis=-1)
    return float(out) if np.ndim(out) == 0 else out
