"""Volterra kernel of fractional Brownian motion and Cameron-Martin paths.

For ``H < 1/2`` the kernel is

    K(t, s) = c_H (t-s)^(H-1/2)
              + c_H (1/2-H) * int_s^t (u-s)^(H-3/2) (1 - (s/u)^(1/2-H)) du

for ``s < t`` and zero otherwise.  Two routes are provided: adaptive
quadrature of the defining integral (``kernel_eval``, scalar) and an
equivalent Gauss hypergeometric closed form (``kernel_values``, vectorised)
that the heavy numerical code uses.  Tests pin the two against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Union

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "HurstParams",
    "CameronMartinPath",
    "calibrate_cH",
    "kernel_eval",
    "kernel_values",
    "kernel_dt",
    "kernel_antiderivative",
    "fbm_covariance",
    "cm_eval",
    "cm_norm",
    "cm_inner",
]

QUAD_EPSABS = 1e-9


@dataclass(frozen=True)
class HurstParams:
    """Hurst index together with the p-variation parameters used downstream.

    ``p`` defaults to the midpoint of the admissible range
    ``(max(3, 1/H), 4)`` and ``gamma`` to ``p``.
    """

    H: float
    p: float | None = None
    gamma: float | None = None
    d: int = 1
    cH: float = field(init=False)

    def __post_init__(self):
        H = float(self.H)
        if not (0.25 < H < 0.5):
            raise ValueError(f"H must lie in the open interval (1/4, 1/2), got {H}")
        p = float(self.p) if self.p is not None else 0.5 * (max(3.0, 1.0 / H) + 4.0)
        gamma = float(self.gamma) if self.gamma is not None else p
        if not (3.0 < p < 4.0):
            raise ValueError(f"p must lie in (3, 4), got {p}")
        if p * H <= 1.0:
            raise ValueError(f"p*H must exceed 1, got p={p}, H={H}")
        if gamma <= p - 1.0:
            raise ValueError(f"gamma must exceed p - 1 = {p - 1.0}, got {gamma}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "cH", calibrate_cH(H))

    def to_dict(self) -> dict:
        return {"H": self.H, "p": self.p, "gamma": self.gamma, "d": self.d, "cH": self.cH}


HurstLike = Union[HurstParams, float]


def _H(params: HurstLike) -> float:
    return params.H if isinstance(params, HurstParams) else float(params)


def _c(params: HurstLike) -> float:
    return params.cH if isinstance(params, HurstParams) else calibrate_cH(float(params))


def _check_H(H: float) -> None:
    if not (0.25 < H < 0.5):
        raise ValueError(f"H must lie in the open interval (1/4, 1/2), got {H}")


def _unit_kernel_closed(t, s, H):
    # kernel with c_H = 1; valid for 0 < s < t
    z = 1.0 - s / t
    return (t - s) ** (H - 0.5) * (t / s) ** (0.5 - H) * special.hyp2f1(H - 0.5, 2 * H, H + 0.5, z)


@lru_cache(maxsize=128)
def calibrate_cH(H: float) -> float:
    """Normalisation constant making ``int_0^1 K(1,s)^2 ds = 1``.

    ``K(1,s)^2 = s^(2H-1) (1-s)^(2H-1) F(s)^2`` with ``F`` smooth, so the
    integral is done by QAWS with algebraic endpoint weights; the scale factor
    is then located by Brent's method.
    """
    H = float(H)
    _check_H(H)

    def smooth_sq(s):
        return special.hyp2f1(H - 0.5, 2 * H, H + 0.5, 1.0 - s) ** 2

    unit_int, _ = integrate.quad(
        smooth_sq, 0.0, 1.0, weight="alg", wvar=(2 * H - 1, 2 * H - 1), epsabs=1e-14, epsrel=1e-13, limit=200
    )
    root, res = optimize.brentq(lambda c: c * c * unit_int - 1.0, 1e-6, 1e3, xtol=1e-15, rtol=1e-15,
                                full_output=True)
    if not res.converged:
        raise RuntimeError(f"c_H calibration did not converge for H={H}")
    return float(root)


def kernel_eval(params: HurstLike, t: float, s: float) -> float:
    """``K(t, s)`` from the defining integral (adaptive quadrature).

    The correction integral is taken after the substitution ``u = s + v^2``.
    """
    H, c = _H(params), _c(params)
    if not (0.0 <= t <= 1.0 and 0.0 <= s <= 1.0):
        raise ValueError(f"t and s must lie in [0, 1], got t={t}, s={s}")
    if s >= t:
        return 0.0
    if s == 0.0:
        raise ValueError("K(t, 0) is infinite for H < 1/2")
    a = 0.5 - H

    def integrand(v):
        if v == 0.0:
            return 0.0
        return 2.0 * v ** (2 * H - 2) * (1.0 - (s / (s + v * v)) ** a)

    corr, _ = integrate.quad(integrand, 0.0, math.sqrt(t - s), epsabs=1e-13, epsrel=1e-12, limit=200)
    val = c * (t - s) ** (H - 0.5) + c * a * corr
    if not math.isfinite(val):
        raise ArithmeticError(f"non-finite kernel value at t={t}, s={s}")
    return float(val)


def kernel_values(params: HurstLike, t, s) -> np.ndarray:
    """Vectorised ``K(t, s)`` via the hypergeometric closed form.

    Broadcasts ``t`` and ``s``; returns 0 where ``s >= t`` and ``inf`` at
    ``s = 0 < t``.
    """
    H, c = _H(params), _c(params)
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    out = np.zeros(t.shape)
    live = s < t
    pos = live & (s > 0)
    out[pos] = c * _unit_kernel_closed(t[pos], s[pos], H)
    out[live & (s <= 0)] = np.inf
    return out


def kernel_dt(params: HurstLike, t, s):
    """``dK/dt (t, s) = c_H (H-1/2) (s/t)^(1/2-H) (t-s)^(H-3/2)`` for ``0 < s < t``."""
    H, c = _H(params), _c(params)
    t_arr, s_arr = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    if np.any(s_arr <= 0) or np.any(s_arr >= t_arr):
        raise ValueError("kernel_dt requires 0 < s < t")
    val = c * (H - 0.5) * (s_arr / t_arr) ** (0.5 - H) * (t_arr - s_arr) ** (H - 1.5)
    return float(val) if val.ndim == 0 else val


def _beta_inc(y, a, b):
    return special.betainc(a, b, y) * special.beta(a, b)


def kernel_antiderivative(params: HurstLike, y) -> np.ndarray:
    """``P(y) = int_0^y K(1, sigma) d sigma`` for ``y`` in [0, 1], in closed form."""
    H, c = _H(params), _c(params)
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    b = H + 0.5
    return c / b * (
        _beta_inc(y, 1.5 - H, b)
        + (0.5 - H) * y**b * (special.beta(1 - 2 * H, b) - _beta_inc(y, 1 - 2 * H, b))
    )


def fbm_covariance(params: HurstLike, s, t):
    """Covariance ``(s^2H + t^2H - |t-s|^2H) / 2`` of one fBm coordinate.

    Accepts a bare Hurst index, so ``H = 1/2`` (Brownian motion) is allowed.
    """
    H = _H(params)
    s_arr, t_arr = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    if np.any((s_arr < 0) | (s_arr > 1) | (t_arr < 0) | (t_arr > 1)):
        raise ValueError("times must lie in [0, 1]")
    val = 0.5 * (s_arr ** (2 * H) + t_arr ** (2 * H) - np.abs(t_arr - s_arr) ** (2 * H))
    return float(val) if val.ndim == 0 else val


class CameronMartinPath:
    """Cameron-Martin path ``h(t) = int_0^t K(t,s) hdot(s) ds`` with step density.

    Parameters
    ----------
    breakpoints : array_like, shape (K + 1,)
        ``0 = s_0 < s_1 < ... < s_K = 1``.
    values : array_like, shape (K, d) or (K,)
        Value of the density on each piece ``[s_{k}, s_{k+1})``.
    """

    def __init__(self, breakpoints, values):
        bp = np.asarray(breakpoints, dtype=float)
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
        if vals.ndim != 2 or vals.shape[0] != bp.size - 1:
            raise ValueError(f"expected {bp.size - 1} rows of values, got shape {vals.shape}")
        if not np.isfinite(vals).all():
            raise ValueError("density values must be finite")
        bp.flags.writeable = False
        vals.flags.writeable = False
        self.breakpoints = bp
        self.values = vals
        self._norm = float(np.sqrt(np.sum(vals**2 * np.diff(bp)[:, None])))

    @classmethod
    def constant(cls, value, dim: int = 1) -> "CameronMartinPath":
        v = np.broadcast_to(np.asarray(value, dtype=float), (dim,))
        return cls([0.0, 1.0], v[None, :])

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def norm(self) -> float:
        return self._norm

    def __mul__(self, alpha: float) -> "CameronMartinPath":
        return CameronMartinPath(self.breakpoints, alpha * self.values)

    __rmul__ = __mul__

    def density(self, s) -> np.ndarray:
        """``hdot(s)``, shape ``s.shape + (d,)`` (right-continuous, last piece closed)."""
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, s, side="right") - 1, 0, len(self.values) - 1)
        return self.values[idx]

    def evaluate(self, params: HurstLike, t) -> np.ndarray:
        """``h(t)`` in closed form, shape ``t.shape + (d,)``."""
        t = np.asarray(t, dtype=float)
        tt = t[..., None]
        a, b = self.breakpoints[:-1], self.breakpoints[1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            hi = np.where(tt > 0, np.minimum(b, tt) / tt, 0.0)
            lo = np.where(tt > 0, np.minimum(a, tt) / tt, 0.0)
        w = kernel_antiderivative(params, hi) - kernel_antiderivative(params, lo)
        scale = np.where(t > 0, t, 0.0) ** (_H(params) + 0.5)
        return scale[..., None] * (w @ self.values)

    def derivative(self, params: HurstLike, t) -> np.ndarray:
        """``h'(t)`` in closed form for ``t`` in (0, 1] off the breakpoints."""
        H = _H(params)
        beta = H + 0.5
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ValueError("derivative requires t > 0")
        tt = t[..., None]
        a, b = self.breakpoints[:-1], self.breakpoints[1:]
        alpha_k = np.minimum(a, tt) / tt
        beta_k = np.minimum(b, tt) / tt
        P = kernel_antiderivative(params, beta_k) - kernel_antiderivative(params, alpha_k)
        kb = np.where(b < tt, beta_k * kernel_values(params, 1.0, np.where(b < tt, beta_k, 0.5)), 0.0)
        ka = np.where((a < tt) & (a > 0), alpha_k * kernel_values(params, 1.0, np.where((a < tt) & (a > 0), alpha_k, 0.5)), 0.0)
        w = beta * tt ** (beta - 1) * P - tt ** (beta - 1) * (kb - ka)
        return w @ self.values

    def to_text(self) -> str:
        lines = []
        for k in range(len(self.values)):
            nums = [self.breakpoints[k], self.breakpoints[k + 1], *self.values[k]]
            lines.append(" ".join(repr(float(x)) for x in nums))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "CameronMartinPath":
        """Parse lines ``s_start s_end v_1 ... v_d``; blank and '#' lines are skipped."""
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(x) for x in line.split()])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        if not rows:
            raise ValueError("density file has no pieces")
        width = {len(r) for r in rows}
        if len(width) != 1 or rows[0].__len__() < 3:
            raise ValueError("every line needs s_start s_end and the same number (>= 1) of values")
        arr = np.array(rows)
        if np.any(arr[1:, 0] != arr[:-1, 1]):
            raise ValueError("pieces must be contiguous (s_end of one line = s_start of the next)")
        return cls(np.append(arr[:, 0], arr[-1, 1]), arr[:, 2:])

    @classmethod
    def load(cls, path) -> "CameronMartinPath":
        return cls.from_text(Path(path).read_text())

    def __repr__(self) -> str:
        return f"CameronMartinPath(pieces={len(self.values)}, dim={self.dim}, norm={self._norm:.6g})"


def cm_eval(h: CameronMartinPath, params: HurstLike, t: float) -> np.ndarray:
    """``h(t)`` by adaptive quadrature of the kernel against each step piece.

    Pieces touching ``s = t`` use the substitution ``s = t - v^2``.  Reference
    route; :meth:`CameronMartinPath.evaluate` is the fast equivalent.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    out = np.zeros(h.dim)
    if t == 0.0:
        return out
    kfun = lambda s: float(kernel_values(params, t, s))  # noqa: E731
    near = lambda v: 2.0 * v * kfun(t - v * v) if v > 0 else 0.0  # noqa: E731
    for k in range(len(h.values)):
        a, b = h.breakpoints[k], min(h.breakpoints[k + 1], t)
        if a >= b or not np.any(h.values[k]):
            continue
        # the (t-s)^(H-1/2) singularity is removed by s = t - v^2; the
        # s^(H-1/2) end at 0 is left to the adaptive rule, which never
        # evaluates endpoints
        if b == t:
            mid = max(a, 0.5 * t)
            val, _ = integrate.quad(near, 0.0, math.sqrt(t - mid), epsabs=QUAD_EPSABS, epsrel=1e-10, limit=200)
            if mid > a:
                val += integrate.quad(kfun, a, mid, epsabs=QUAD_EPSABS, epsrel=1e-10, limit=200)[0]
        else:
            val, _ = integrate.quad(kfun, a, b, epsabs=QUAD_EPSABS, epsrel=1e-10, limit=200)
        if not math.isfinite(val):
            raise ArithmeticError("quadrature failure in cm_eval")
        out += val * h.values[k]
    return out


def cm_norm(h: CameronMartinPath) -> float:
    """Cameron-Martin norm, i.e. the exact L2 norm of the step density."""
    return h.norm


def cm_inner(h1: CameronMartinPath, h2: CameronMartinPath) -> float:
    """Cameron-Martin inner product (summed over coordinates)."""
    if h1.dim != h2.dim:
        raise ValueError("dimension mismatch")
    bp = np.union1d(h1.breakpoints, h2.breakpoints)
    mid = 0.5 * (bp[:-1] + bp[1:])
    return float(np.sum(np.sum(h1.density(mid) * h2.density(mid), axis=1) * np.diff(bp)))
