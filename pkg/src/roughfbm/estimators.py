"""scikit-learn transformers over batches of sampled paths.

Input ``X`` has shape ``(n_samples, 2**m + 1, d)`` (or ``(n_samples, 2**m + 1)``
for one-dimensional paths) and holds grid values starting at 0.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .metrics import MetricParams, d_jp
from .tensor import smooth_rough_path

__all__ = ["SignatureTransformer", "DyadicNormTransformer", "check_paths"]


def check_paths(X) -> np.ndarray:
    """Validate a batch of dyadic grid paths and return it as ``(n, 2**m + 1, d)``."""
    X = check_array(X, allow_nd=True, ensure_2d=True, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3:
        raise ValueError(f"expected a 2-d or 3-d array of paths, got ndim={X.ndim}")
    n_points = X.shape[1]
    m = int(round(np.log2(max(n_points - 1, 1))))
    if n_points != 2**m + 1:
        raise ValueError(f"paths need 2**m + 1 grid points, got {n_points}")
    if np.any(X[:, 0, :] != 0.0):
        raise ValueError("paths must start at 0")
    return X


class _PathTransformer(TransformerMixin, BaseEstimator):
    def fit(self, X, y=None):
        X = check_paths(X)
        self.n_points_in_ = X.shape[1]
        self.dim_in_ = X.shape[2]
        self.depth_ = int(round(np.log2(X.shape[1] - 1)))
        return self

    def _check(self, X) -> np.ndarray:
        check_is_fitted(self, "depth_")
        X = check_paths(X)
        if X.shape[1:] != (self.n_points_in_, self.dim_in_):
            raise ValueError(
                f"fitted on paths of shape {(self.n_points_in_, self.dim_in_)}, got {X.shape[1:]}"
            )
        return X


class SignatureTransformer(_PathTransformer):
    """Level-3 signature of the piecewise-linear path over ``[0, 1]``.

    Features are the flattened levels 1-3 (``d + d^2 + d^3`` columns).
    """

    def transform(self, X):
        X = self._check(X)
        return smooth_rough_path(X, self.depth_).signature().flatten()


class DyadicNormTransformer(_PathTransformer):
    """The norms ``D_{j,p}(X)`` for ``j = 1, 2, 3`` as three feature columns."""

    def __init__(self, p: float = 3.5, gamma: float = 3.5, N_max: int = 16):
        self.p = p
        self.gamma = gamma
        self.N_max = N_max

    def fit(self, X, y=None):
        self.metric_ = MetricParams(self.p, self.gamma, self.N_max)
        return super().fit(X, y)

    def transform(self, X):
        X = self._check(X)
        path = smooth_rough_path(X, self.depth_)
        return np.column_stack([np.atleast_1d(d_jp(path, None, j, self.metric_)) for j in (1, 2, 3)])
