"""Exact Gaussian sampling of d-dimensional fBm on dyadic grids.

Random streams are Philox generators keyed by ``(seed, block)`` where a
block is a fixed run of ``BLOCK`` consecutive paths, so the ``i``-th path of
a batch does not depend on how the caller chunks the work.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy import linalg

from ._io import write_csv
from .kernel import CameronMartinPath, HurstLike, _H

__all__ = [
    "BLOCK",
    "MAX_CHOLESKY_DEPTH",
    "FbmSamplePath",
    "InterpolatedPath",
    "sample_fbm",
    "sample_fbm_batch",
    "iter_fbm_batches",
    "interpolate",
    "coarsen",
    "write_path_csv",
]

BLOCK = 1024
MAX_CHOLESKY_DEPTH = 14


@dataclass(frozen=True, eq=False)
class FbmSamplePath:
    """One sampled path on the dyadic grid of depth ``depth``."""

    values: np.ndarray
    depth: int
    seed: int
    hurst: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != 2**self.depth + 1:
            raise ValueError(f"expected {2**self.depth + 1} grid values, got {v.shape[0]}")
        if np.any(v[0] != 0.0):
            raise ValueError("path must start at 0")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, 2**self.depth + 1)


def _fgn_autocov(H: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    return 0.5 * (np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))


@lru_cache(maxsize=16)
def _cholesky_factor(H: float, m: int) -> np.ndarray:
    n = 2**m
    cov = linalg.toeplitz(_fgn_autocov(H, n)) * float(n) ** (-2 * H)
    try:
        L = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise ArithmeticError(f"covariance not positive definite for H={H}, m={m}") from exc
    L.flags.writeable = False
    return L


@lru_cache(maxsize=16)
def _circulant_sqrt_eigs(H: float, m: int) -> np.ndarray:
    n = 2**m
    r = _fgn_autocov(H, n + 1) * float(n) ** (-2 * H)
    row = np.concatenate([r, r[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise ArithmeticError("circulant embedding is not nonnegative definite")
    out = np.sqrt(np.clip(lam, 0.0, None) / row.size)
    out.flags.writeable = False
    return out


def _rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def _block_increments(H: float, m: int, d: int, seed: int, block: int, count: int, backend: str) -> np.ndarray:
    n = 2**m
    rng = _rng(seed, block)
    if backend == "cholesky":
        z = rng.standard_normal((count, d, n))
        return np.swapaxes(z @ _cholesky_factor(H, m).T, 1, 2)
    if backend == "circulant":
        sq = _circulant_sqrt_eigs(H, m)
        z = rng.standard_normal((count, d, sq.size)) + 1j * rng.standard_normal((count, d, sq.size))
        x = np.fft.fft(sq * z, axis=-1)[..., :n].real
        return np.swapaxes(x, 1, 2)
    raise ValueError(f"unknown backend {backend!r}; use 'cholesky' or 'circulant'")


def _check(params: HurstLike, m: int, d: int, backend: str) -> float:
    H = _H(params)
    if not 0.25 < H < 0.5:
        raise ValueError(f"H must lie in the open interval (1/4, 1/2), got {H}")
    if m < 0:
        raise ValueError("depth must be >= 0")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if backend == "cholesky" and m > MAX_CHOLESKY_DEPTH:
        raise ValueError(f"cholesky backend supports m <= {MAX_CHOLESKY_DEPTH}, got {m}")
    return H


def iter_fbm_batches(params: HurstLike, m: int, n_paths: int, seed: int, d: int | None = None,
                     backend: str = "cholesky", blocks_per_chunk: int = 1) -> Iterator[np.ndarray]:
    """Yield consecutive chunks of sampled grid values, each ``(k, 2**m + 1, d)``.

    Chunks consist of whole RNG blocks, so concatenating them gives the same
    array as :func:`sample_fbm_batch` regardless of ``blocks_per_chunk``.
    """
    if d is None:
        d = getattr(params, "d", 1)
    H = _check(params, m, d, backend)
    n_blocks = -(-n_paths // BLOCK)
    for start in range(0, n_blocks, blocks_per_chunk):
        parts = []
        for b in range(start, min(start + blocks_per_chunk, n_blocks)):
            count = min(BLOCK, n_paths - b * BLOCK)
            parts.append(_block_increments(H, m, d, seed, b, count, backend))
        inc = np.concatenate(parts, axis=0)
        out = np.zeros((inc.shape[0], 2**m + 1, d))
        np.cumsum(inc, axis=1, out=out[:, 1:, :])
        yield out


def sample_fbm_batch(params: HurstLike, m: int, n_paths: int, seed: int, d: int | None = None,
                     backend: str = "cholesky") -> np.ndarray:
    """Sample ``n_paths`` independent paths; returns shape ``(n_paths, 2**m + 1, d)``."""
    chunks = list(iter_fbm_batches(params, m, n_paths, seed, d, backend, blocks_per_chunk=1 << 30))
    if not chunks:
        d = d if d is not None else getattr(params, "d", 1)
        return np.zeros((0, 2**m + 1, d))
    return chunks[0]


def sample_fbm(params: HurstLike, m: int, seed: int, d: int | None = None,
               backend: str = "cholesky") -> FbmSamplePath:
    """Sample one path with the exact law on the grid ``l 2^-m``."""
    values = sample_fbm_batch(params, m, 1, seed, d, backend)[0]
    return FbmSamplePath(values, m, int(seed), _H(params))


class InterpolatedPath:
    """Piecewise-linear interpolation of grid values (the path ``x(m)``)."""

    def __init__(self, values, depth: int):
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[-2] != 2**depth + 1:
            raise ValueError(f"expected {2**depth + 1} grid values, got {v.shape[-2]}")
        self.values = v
        self.depth = depth

    @classmethod
    def from_sample(cls, path: FbmSamplePath) -> "InterpolatedPath":
        return cls(path.values, path.depth)

    @classmethod
    def from_cm(cls, h: CameronMartinPath, params: HurstLike, m: int) -> "InterpolatedPath":
        grid = np.linspace(0.0, 1.0, 2**m + 1)
        return cls(h.evaluate(params, grid), m)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any((t < 0) | (t > 1)):
            raise ValueError("t must lie in [0, 1]")
        n = 2**self.depth
        x = t * n
        l = np.clip(np.floor(x).astype(int), 0, n - 1)
        frac = (x - l)[..., None]
        v = self.values
        return (1.0 - frac) * v[..., l, :] + frac * v[..., l + 1, :]


def interpolate(path, t) -> np.ndarray:
    """Evaluate the linear interpolation of a sampled path at ``t``."""
    if isinstance(path, FbmSamplePath):
        path = InterpolatedPath.from_sample(path)
    return path(t)


def coarsen(path: FbmSamplePath, target: int) -> FbmSamplePath:
    """Keep every ``2**(m - target)``-th value (same underlying sample)."""
    if not 0 <= target <= path.depth:
        raise ValueError(f"target depth {target} must lie in [0, {path.depth}]")
    step = 2 ** (path.depth - target)
    return FbmSamplePath(path.values[::step], target, path.seed, path.hurst)


def write_path_csv(path: FbmSamplePath, filename, extra_meta: dict | None = None) -> None:
    """Export as CSV with columns ``t, x_1..x_d`` and a commented header."""
    meta = {"H": path.hurst, "m": path.depth, "seed": path.seed, "d": path.dim}
    meta.update(extra_meta or {})
    cols = ["t"] + [f"x_{i + 1}" for i in range(path.dim)]
    rows = np.column_stack([path.times, path.values])
    write_csv(filename, cols, rows, meta)
