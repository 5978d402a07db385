"""Level-3 truncated tensor algebra and dyadic smooth rough paths.

Elements of T^3(R^d) are stored densely as ``(level1, level2, level3)`` with
the scalar component fixed to 1.  All arrays may carry leading batch axes,
so a whole dyadic level (or a Monte Carlo batch of paths) is composed with a
single vectorised call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "TruncatedTensor",
    "DyadicRoughPath",
    "segment_signature",
    "chen_compose",
    "smooth_rough_path",
    "refine_difference",
    "refine_difference_explicit",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TruncatedTensor:
    """Element ``(1, X1, X2, X3)`` of the truncated tensor algebra.

    ``level1`` has shape ``(..., d)``, ``level2`` ``(..., d, d)`` and
    ``level3`` ``(..., d, d, d)``; the leading axes are batch axes.
    """

    level1: np.ndarray
    level2: np.ndarray
    level3: np.ndarray

    def __post_init__(self):
        x1 = np.asarray(self.level1, dtype=float)
        x2 = np.asarray(self.level2, dtype=float)
        x3 = np.asarray(self.level3, dtype=float)
        if x1.ndim < 1 or x1.shape[-1] < 1:
            raise ValueError("level1 must have a trailing axis of length d >= 1")
        d = x1.shape[-1]
        batch = x1.shape[:-1]
        if x2.shape != batch + (d, d) or x3.shape != batch + (d, d, d):
            raise ValueError(
                f"inconsistent level shapes {x1.shape}, {x2.shape}, {x3.shape}"
            )
        if not (np.isfinite(x1).all() and np.isfinite(x2).all() and np.isfinite(x3).all()):
            raise ValueError("tensor components must be finite")
        object.__setattr__(self, "level1", _frozen(x1))
        object.__setattr__(self, "level2", _frozen(x2))
        object.__setattr__(self, "level3", _frozen(x3))

    @classmethod
    def identity(cls, dim: int, batch_shape: tuple = ()) -> "TruncatedTensor":
        if dim < 1:
            raise ValueError("dim must be >= 1")
        return cls(
            np.zeros(batch_shape + (dim,)),
            np.zeros(batch_shape + (dim, dim)),
            np.zeros(batch_shape + (dim, dim, dim)),
        )

    @property
    def dim(self) -> int:
        return self.level1.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self.level1.shape[:-1]

    def level(self, j: int) -> np.ndarray:
        if j not in (1, 2, 3):
            raise ValueError(f"level must be 1, 2 or 3, got {j}")
        return (self.level1, self.level2, self.level3)[j - 1]

    def __getitem__(self, idx) -> "TruncatedTensor":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if len(idx) > len(self.batch_shape):
            raise IndexError("too many indices for the batch shape")
        return TruncatedTensor(self.level1[idx], self.level2[idx], self.level3[idx])

    def __sub__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        """Componentwise difference of the non-scalar levels."""
        _check_dims(self, other)
        return TruncatedTensor(
            self.level1 - other.level1,
            self.level2 - other.level2,
            self.level3 - other.level3,
        )

    def __mul__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        return chen_compose(self, other)

    def dilate(self, eps: float) -> "TruncatedTensor":
        """Dilation: level ``j`` is scaled by ``eps**j``."""
        return TruncatedTensor(eps * self.level1, eps**2 * self.level2, eps**3 * self.level3)

    def inverse(self) -> "TruncatedTensor":
        """Inverse for the Chen product (exists for every element)."""
        x1, x2, x3 = self.level1, self.level2, self.level3
        y1 = -x1
        y2 = -x2 + np.einsum("...i,...j->...ij", x1, x1)
        y3 = (
            -x3
            + np.einsum("...ij,...k->...ijk", x2, x1)
            + np.einsum("...i,...jk->...ijk", x1, x2)
            - np.einsum("...i,...j,...k->...ijk", x1, x1, x1)
        )
        return TruncatedTensor(y1, y2, y3)

    def norms(self) -> np.ndarray:
        """Frobenius norms of levels 1..3, shape ``batch_shape + (3,)``."""
        return np.stack(
            [
                np.sqrt(np.sum(self.level1**2, axis=-1)),
                np.sqrt(np.sum(self.level2**2, axis=(-2, -1))),
                np.sqrt(np.sum(self.level3**2, axis=(-3, -2, -1))),
            ],
            axis=-1,
        )

    def flatten(self) -> np.ndarray:
        """Concatenate levels into a vector of length d + d^2 + d^3 per batch item."""
        b = self.batch_shape
        return np.concatenate(
            [self.level1, self.level2.reshape(b + (-1,)), self.level3.reshape(b + (-1,))],
            axis=-1,
        )

    def allclose(self, other: "TruncatedTensor", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        return all(
            np.allclose(a, b, rtol=rtol, atol=atol)
            for a, b in zip(
                (self.level1, self.level2, self.level3),
                (other.level1, other.level2, other.level3),
            )
        )

    def __repr__(self) -> str:
        return f"TruncatedTensor(dim={self.dim}, batch_shape={self.batch_shape})"


def _check_dims(x: TruncatedTensor, y: TruncatedTensor) -> None:
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} != {y.dim}")


def segment_signature(delta, dim: int | None = None) -> TruncatedTensor:
    """Signature of a straight segment with increment ``delta``.

    Returns ``(1, D, D⊗D/2, D⊗D⊗D/6)``.  ``delta`` may be batched, shape
    ``(..., d)``.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.ndim == 0:
        delta = delta[None]
    if dim is not None and delta.shape[-1] != dim:
        raise ValueError(f"dimension mismatch: increment has d={delta.shape[-1]}, expected {dim}")
    if not np.isfinite(delta).all():
        raise ValueError("increment must be finite")
    x2 = np.einsum("...i,...j->...ij", delta, delta)
    x3 = np.einsum("...ij,...k->...ijk", x2, delta)
    return TruncatedTensor(delta, x2 / 2.0, x3 / 6.0)


def chen_compose(x: TruncatedTensor, y: TruncatedTensor) -> TruncatedTensor:
    """Chen product ``x ⊗ y`` truncated at level 3 (broadcasts over batches)."""
    _check_dims(x, y)
    x1, x2, x3 = x.level1, x.level2, x.level3
    y1, y2, y3 = y.level1, y.level2, y.level3
    z1 = x1 + y1
    z2 = x2 + y2 + np.einsum("...i,...j->...ij", x1, y1)
    z3 = (
        x3
        + y3
        + np.einsum("...ij,...k->...ijk", x2, y1)
        + np.einsum("...i,...jk->...ijk", x1, y2)
    )
    return TruncatedTensor(z1, z2, z3)


def _pairwise(level: TruncatedTensor) -> TruncatedTensor:
    # children along the interval axis (the last batch axis) -> parents
    return chen_compose(
        TruncatedTensor(level.level1[..., 0::2, :], level.level2[..., 0::2, :, :], level.level3[..., 0::2, :, :, :]),
        TruncatedTensor(level.level1[..., 1::2, :], level.level2[..., 1::2, :, :], level.level3[..., 1::2, :, :, :]),
    )


class DyadicRoughPath:
    """Smooth rough path above the piecewise-linear interpolation of dyadic samples.

    ``points`` has shape ``(..., 2**depth + 1, d)``.  Increments over every
    dyadic interval of level ``n <= depth`` are precomputed bottom-up as a
    binary segment tree, so an arbitrary grid interval costs ``O(depth)``
    compositions.  Levels finer than ``depth`` are answered in closed form:
    inside one linear piece every sub-interval is again a straight segment.
    """

    def __init__(self, points: np.ndarray, depth: int, _tree: Sequence[TruncatedTensor]):
        self._points = _frozen(points)
        self.depth = depth
        self._tree = tuple(_tree)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def dim(self) -> int:
        return self._points.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self._points.shape[:-2]

    def __getitem__(self, idx) -> "DyadicRoughPath":
        """Select batch items (all tree levels are sliced consistently)."""
        if not isinstance(idx, tuple):
            idx = (idx,)
        pts = self._points[idx]
        if pts.ndim < 2:
            raise IndexError("indexing removed the grid axis")
        return DyadicRoughPath(pts, self.depth, [lev[idx] for lev in self._tree])

    def level(self, n: int) -> TruncatedTensor:
        """Increments over all ``2**n`` dyadic intervals of level ``n``.

        The interval axis is the last batch axis.  Any ``n >= 0`` is allowed.
        """
        if n < 0:
            raise ValueError("level index must be >= 0")
        if n <= self.depth:
            return self._tree[n]
        k = n - self.depth
        delta = np.diff(self._points, axis=-2) * 2.0**-k
        return segment_signature(np.repeat(delta, 2**k, axis=-2))

    def increment(self, n: int, l: int) -> TruncatedTensor:
        """Increment over ``[l 2^-n, (l+1) 2^-n]`` (0-based ``l``)."""
        if not 0 <= l < 2**n:
            raise IndexError(f"interval index {l} out of range for level {n}")
        if n <= self.depth:
            lev = self._tree[n]
        else:
            k = n - self.depth
            cell = l >> k
            delta = (self._points[..., cell + 1, :] - self._points[..., cell, :]) * 2.0**-k
            return segment_signature(delta)
        return TruncatedTensor(lev.level1[..., l, :], lev.level2[..., l, :, :], lev.level3[..., l, :, :, :])

    def composed(self, i: int, k: int) -> TruncatedTensor:
        """Increment over the grid interval ``[t_i, t_k]`` at the construction depth.

        Uses the canonical dyadic decomposition of ``[i, k)`` (segment-tree query).
        """
        m = self.depth
        if not 0 <= i <= k <= 2**m:
            raise IndexError(f"invalid grid interval [{i}, {k}] for depth {m}")
        out = TruncatedTensor.identity(self.dim, self.batch_shape)
        pos = i
        while pos < k:
            # largest aligned block starting at pos that fits in [pos, k)
            size = pos & -pos if pos else 2**m
            while size > k - pos:
                size >>= 1
            n = m - size.bit_length() + 1
            out = chen_compose(out, self.increment(n, pos // size))
            pos += size
        return out

    def signature(self) -> TruncatedTensor:
        """Increment over the whole interval ``[0, 1]``."""
        return self.increment(0, 0)

    def dilate(self, eps: float) -> "DyadicRoughPath":
        """Rough path above ``eps * x`` (level j scales by eps**j)."""
        return DyadicRoughPath(eps * self._points, self.depth, [lev.dilate(eps) for lev in self._tree])

    def coarsen(self, depth: int) -> "DyadicRoughPath":
        """Rough path above the interpolation of the retained grid values at ``depth``."""
        if not 0 <= depth <= self.depth:
            raise ValueError(f"target depth {depth} must lie in [0, {self.depth}]")
        step = 2 ** (self.depth - depth)
        return smooth_rough_path(self._points[..., ::step, :], depth)

    def __repr__(self) -> str:
        return f"DyadicRoughPath(depth={self.depth}, dim={self.dim}, batch_shape={self.batch_shape})"


def smooth_rough_path(points, depth: int | None = None) -> DyadicRoughPath:
    """Build the rough path above the linear interpolation of dyadic samples.

    Parameters
    ----------
    points : array_like, shape (..., 2**m + 1, d) or (2**m + 1,)
        Path values on the m-th dyadic grid.  The first value must be 0.
    depth : int, optional
        ``m``; inferred from the number of points when omitted.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim < 2:
        raise ValueError("points must have shape (..., 2**m + 1, d)")
    npts = pts.shape[-2]
    if depth is None:
        depth = int(round(np.log2(max(npts - 1, 1))))
    if depth < 0 or npts != 2**depth + 1:
        raise ValueError(f"expected 2**{depth} + 1 points, got {npts}")
    if not np.isfinite(pts).all():
        raise ValueError("points must be finite")
    if np.any(pts[..., 0, :] != 0.0):
        raise ValueError("path must start at 0")
    leaves = segment_signature(np.diff(pts, axis=-2))
    tree = [leaves]
    for _ in range(depth):
        tree.append(_pairwise(tree[-1]))
    return DyadicRoughPath(pts, depth, tree[::-1])


def _check_nested(coarse: DyadicRoughPath, fine: DyadicRoughPath, n: int, l: int) -> None:
    if fine.depth != coarse.depth + 1:
        raise ValueError(f"fine depth must be coarse depth + 1 (got {coarse.depth}, {fine.depth})")
    if coarse.dim != fine.dim:
        raise ValueError("dimension mismatch")
    if not 0 <= n <= coarse.depth:
        raise ValueError(f"level n={n} must satisfy 0 <= n <= {coarse.depth}")
    if not 0 <= l < 2**n:
        raise IndexError(f"interval index {l} out of range for level {n}")
    if not np.array_equal(fine.points[..., ::2, :], coarse.points):
        raise ValueError("paths are not built from nested dyadic samples")


def refine_difference_explicit(coarse: DyadicRoughPath, fine: DyadicRoughPath, n: int, l: int) -> TruncatedTensor:
    """Fine-minus-coarse increment over ``[l 2^-n, (l+1) 2^-n]`` from explicit sums.

    Level 1 vanishes (both paths interpolate the same values on coarser grids).
    Level 2 is half the sum of antisymmetrised products of the two fine halves
    of every coarse cell.  Level 3 accumulates each path cell by cell, adding
    ``X3_k + X1_prefix ⊗ X2_k + X2_prefix ⊗ X1_k`` with segment values
    ``D^{⊗2}/2`` and ``D^{⊗3}/6``; nothing here touches the segment tree.
    """
    _check_nested(coarse, fine, n, l)
    m = coarse.depth
    r = 2 ** (m - n)
    dc = np.diff(coarse.points, axis=-2)[..., l * r:(l + 1) * r, :]
    df = np.diff(fine.points, axis=-2)[..., 2 * l * r:2 * (l + 1) * r, :]
    d = coarse.dim
    batch = coarse.batch_shape

    odd, even = df[..., 0::2, :], df[..., 1::2, :]
    area = np.einsum("...ri,...rj->...ij", odd, even)
    t2 = 0.5 * (area - np.swapaxes(area, -1, -2))

    def level3(deltas):
        p1 = np.zeros(batch + (d,))
        p2 = np.zeros(batch + (d, d))
        x3 = np.zeros(batch + (d, d, d))
        for k in range(deltas.shape[-2]):
            dk = deltas[..., k, :]
            s2 = np.einsum("...i,...j->...ij", dk, dk) / 2.0
            s3 = np.einsum("...ij,...k->...ijk", s2, dk) / 3.0
            x3 = x3 + s3 + np.einsum("...i,...jk->...ijk", p1, s2) + np.einsum("...ij,...k->...ijk", p2, dk)
            p2 = p2 + s2 + np.einsum("...i,...j->...ij", p1, dk)
            p1 = p1 + dk
        return x3

    return TruncatedTensor(np.zeros(batch + (d,)), t2, level3(df) - level3(dc))


def refine_difference(coarse: DyadicRoughPath, fine: DyadicRoughPath, n: int, l: int,
                      rtol: float = 1e-10) -> TruncatedTensor:
    """Fine-minus-coarse increment over a dyadic interval of level ``n <= depth``.

    The direct difference of composed increments is returned after checking it
    against :func:`refine_difference_explicit`; a disagreement beyond ``rtol``
    (relative to the size of the increments involved) raises ``ArithmeticError``.
    """
    _check_nested(coarse, fine, n, l)
    xf = fine.increment(n, l)
    xc = coarse.increment(n, l)
    direct = xf - xc
    explicit = refine_difference_explicit(coarse, fine, n, l)
    scale = np.maximum(xf.norms(), xc.norms())
    err = (direct - explicit).norms()
    if np.any(err > rtol * np.maximum(scale, 1e-300) + 1e-300):
        raise ArithmeticError(
            f"explicit refinement sums disagree with tree increments (max error {err.max():.3e})"
        )
    return direct
