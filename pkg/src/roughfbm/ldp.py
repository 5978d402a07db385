"""Rate functions and Monte Carlo studies of convergence and tail behaviour.

Every stochastic quantity is reported as an :class:`McEstimate` carrying the
seed it was produced from.  Paths at depth ``m`` are always obtained by
coarsening one sample at depth ``m_fine``, never by resampling.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .kernel import CameronMartinPath, HurstParams, kernel_antiderivative
from .metrics import MetricParams, d_jp
from .sampler import iter_fbm_batches
from .tensor import smooth_rough_path

__all__ = [
    "ExperimentConfig",
    "McEstimate",
    "StudyResult",
    "MIN_CLAIM_SAMPLES",
    "fit_log2_slope",
    "fit_slope",
    "rate_function_cm",
    "rate_minimizer",
    "moment_decay_study",
    "deterministic_decay_study",
    "exp_tightness_probe",
    "schilder_slope_probe",
    "run_study",
]

MIN_CLAIM_SAMPLES = 1000
STUDIES = ("moments", "deterministic", "tightness", "schilder")


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with standard error ``std / sqrt(count)``."""

    mean: float
    std_error: float
    count: int
    seed: int
    label: str
    details: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_samples(cls, samples, seed: int, label: str) -> "McEstimate":
        x = np.asarray(samples, dtype=float)
        n = x.size
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return cls(float(np.mean(x)), se, int(n), int(seed), label)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StudyResult:
    """Rows of a study table plus derived summaries and flags."""

    study: str
    rows: list
    summary: dict
    flags: list

    @property
    def columns(self) -> list:
        cols: list = []
        for row in self.rows:
            for k in row:
                if k not in cols:
                    cols.append(k)
        return cols


@dataclass
class ExperimentConfig:
    """Settings of one study, read from ``key = value`` lines."""

    study: str = "moments"
    H: float = 0.35
    p: float = 3.2
    gamma: float | None = None
    d: int = 1
    m_min: int = 3
    m_max: int = 7
    m_fine: int | None = None
    eps: tuple = (0.6, 0.5, 0.4, 0.3, 0.25)
    samples: int = 5000
    seed: int = 12345
    delta: float = 2.0
    backend: str = "cholesky"
    density: str | None = None
    output: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.study not in STUDIES:
            raise ValueError(f"unknown study {self.study!r}; choose one of {', '.join(STUDIES)}")
        self.hurst  # validates H, p, gamma, d
        if self.m_min < 0 or self.m_max < self.m_min:
            raise ValueError("need 0 <= m_min <= m_max")
        if self.m_fine is not None and self.m_fine < self.m_max + 3:
            raise ValueError("m_fine must be at least m_max + 3")
        eps = tuple(float(e) for e in self.eps)
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps grid must be positive and strictly decreasing")
        self.eps = eps
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @property
    def hurst(self) -> HurstParams:
        return HurstParams(self.H, self.p, self.gamma, self.d)

    @property
    def metric(self) -> MetricParams:
        hp = self.hurst
        return MetricParams(hp.p, hp.gamma)

    @property
    def fine_depth(self) -> int:
        return self.m_fine if self.m_fine is not None else self.m_max + 3

    @property
    def m_range(self) -> range:
        return range(self.m_min, self.m_max + 1)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["eps"] = list(self.eps)
        return out

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs: dict = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or not key:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            if key not in known:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            try:
                kwargs[key] = _convert(key, val)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())


_INT_KEYS = {"d", "m_min", "m_max", "m_fine", "samples", "seed"}
_FLOAT_KEYS = {"H", "p", "gamma", "delta"}


def _convert(key: str, val: str):
    if key in _INT_KEYS:
        return int(val)
    if key in _FLOAT_KEYS:
        return float(val)
    if key == "eps":
        return tuple(float(x) for x in val.replace(",", " ").split())
    return val


def fit_slope(x, y) -> tuple[float, float, float, float]:
    """Ordinary least squares ``y = a + b x``; returns ``(b, a, R^2, se(b))``.

    At least four points are required.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 4:
        raise ValueError("slope fits need at least 4 points")
    if not np.isfinite(y).all():
        raise ValueError("slope fit received non-finite values")
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    dof = x.size - 2
    s2 = float(np.sum(resid**2)) / dof
    se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    return float(coef[1]), float(coef[0]), r2, se


def fit_log2_slope(m, values) -> tuple[float, float]:
    """Slope and R^2 of ``log2(values)`` against ``m``."""
    b, _, r2, _ = fit_slope(m, np.log2(np.asarray(values, dtype=float)))
    return b, r2


def rate_function_cm(h) -> float:
    """``||hdot||_2^2 / 2`` for a Cameron-Martin path; ``inf`` for any other input.

    Membership of an arbitrary (sampled) path in the Cameron-Martin space
    cannot be decided from data, so only declared inputs get a finite value.
    """
    if not isinstance(h, CameronMartinPath):
        return math.inf
    return 0.5 * h.norm**2


def rate_minimizer(params: HurstParams, delta: float, pieces: int = 1024) -> CameronMartinPath:
    """Least-squares minimiser of the rate over step densities with ``h(1) = delta``.

    On ``pieces`` equal cells, ``h(1) = sum_k v_k w_k`` with
    ``w_k = int_cell K(1,s) ds``; the minimum-norm solution is
    ``v_k = delta w_k / (l_k sum_i w_i^2 / l_i)``.
    """
    bp = np.linspace(0.0, 1.0, pieces + 1)
    w = np.diff(kernel_antiderivative(params, bp))
    ell = np.diff(bp)
    v = delta * (w / ell) / np.sum(w**2 / ell)
    return CameronMartinPath(bp, v)


def _q_moment(samples: np.ndarray, q: float, seed: int, label: str) -> McEstimate:
    """``(E X^q)^(1/q)`` with a delta-method standard error."""
    mom = McEstimate.from_samples(samples**q, seed, label)
    est = mom.mean ** (1.0 / q)
    se = est / (q * mom.mean) * mom.std_error if mom.mean > 0 else 0.0
    return McEstimate(est, se, mom.count, seed, label)


def _flags_for(config: ExperimentConfig) -> list:
    return ["insufficient_samples"] if config.samples < MIN_CLAIM_SAMPLES else []


def moment_decay_study(config: ExperimentConfig, blocks_per_chunk: int = 2) -> StudyResult:
    """Moments of ``D_{j,p}(W(m), W)`` and of ``D_{j,p}(W(m))`` across ``m``.

    ``W`` is represented by the depth ``m_fine`` sample.  For ``j = 1, 2, 3``
    and ``q in {p, 2p}`` the table holds ``(E D^q)^(1/q)``; for ``j = 1, 2``
    it also holds ``(E D_{j,p}(W(m))^p)^(1/p)``.  Summaries give log2-slopes
    across ``m`` and the relative spread of the boundedness estimates.
    """
    hp, mp = config.hurst, config.metric
    p = hp.p
    M = config.fine_depth
    ms = list(config.m_range)
    diff = {(m, j): [] for m in ms for j in (1, 2, 3)}
    own = {(m, j): [] for m in ms for j in (1, 2)}
    for batch in iter_fbm_batches(hp, M, config.samples, config.seed, config.d, config.backend,
                                  blocks_per_chunk):
        fine = smooth_rough_path(batch, M)
        for m in ms:
            coarse = fine.coarsen(m)
            for j in (1, 2, 3):
                diff[(m, j)].append(np.atleast_1d(d_jp(coarse, fine, j, mp)))
            for j in (1, 2):
                own[(m, j)].append(np.atleast_1d(d_jp(coarse, None, j, mp)))
    rows, summary = [], {}
    for j in (1, 2, 3):
        for q in (p, 2 * p):
            ests = []
            for m in ms:
                est = _q_moment(np.concatenate(diff[(m, j)]), q, config.seed, f"D{j}_diff_q{q:g}")
                ests.append(est)
                rows.append({"kind": "difference", "m": m, "j": j, "q": q, "estimate": est.mean,
                             "std_error": est.std_error, "count": est.count, "seed": est.seed})
            if len(ms) >= 4 and all(e.mean > 0 for e in ests):
                slope, r2 = fit_log2_slope(ms, [e.mean for e in ests])
                summary[f"slope_j{j}_q{q:g}"] = slope
                summary[f"r2_j{j}_q{q:g}"] = r2
    for j in (1, 2):
        vals = []
        for m in ms:
            est = _q_moment(np.concatenate(own[(m, j)]), p, config.seed, f"D{j}_own")
            vals.append(est.mean)
            rows.append({"kind": "bounded", "m": m, "j": j, "q": p, "estimate": est.mean,
                         "std_error": est.std_error, "count": est.count, "seed": est.seed})
        summary[f"spread_j{j}"] = (max(vals) - min(vals)) / max(vals) if max(vals) > 0 else 0.0
    return StudyResult("moments", rows, summary, _flags_for(config))


def deterministic_decay_study(h: CameronMartinPath, params: HurstParams, m_range: Sequence[int],
                              metric: MetricParams | None = None) -> StudyResult:
    """``D_{j,p}(h(m), h(m+1))`` for ``j = 1, 2, 3`` and ``D_{j,p}(h(m))`` for ``j = 1, 2``."""
    mp = metric or MetricParams(params.p, params.gamma)
    ms = list(m_range)
    top = max(ms) + 1
    grid_vals = h.evaluate(params, np.linspace(0.0, 1.0, 2**top + 1))
    paths = {m: smooth_rough_path(grid_vals[:: 2 ** (top - m)], m) for m in ms + [top]}
    rows, series = [], {k: [] for k in ("diff1", "diff2", "diff3", "own1", "own2")}
    for m in ms:
        row = {"m": m}
        for j in (1, 2, 3):
            row[f"D{j}_diff"] = d_jp(paths[m], paths[m + 1], j, mp)
            series[f"diff{j}"].append(row[f"D{j}_diff"])
        for j in (1, 2):
            row[f"D{j}_own"] = d_jp(paths[m], None, j, mp)
            series[f"own{j}"].append(row[f"D{j}_own"])
        rows.append(row)
    summary = {}
    if len(ms) >= 4 and all(v > 0 for v in series["diff1"]):
        summary["slope_j1"], summary["r2_j1"] = fit_log2_slope(ms, series["diff1"])
    for j in (2, 3):
        summary[f"decreasing_j{j}"] = bool(np.all(np.diff(series[f"diff{j}"]) < 0))
    for j in (1, 2):
        summary[f"max_own_j{j}"] = float(max(series[f"own{j}"]))
    return StudyResult("deterministic", rows, summary, [])


def _dilated_bound(d_xy, d_x, d_y, eps: float) -> np.ndarray:
    """The seven-term bound for dilated paths from undilated D values."""
    d1, d2, d3 = d_xy
    x1, x2 = d_x
    y1, y2 = d_y
    e = eps
    terms = np.stack([
        e * d1,
        e**2 * d1 * (x1 + y1),
        e**2 * d2,
        e**3 * d2 * (x1 + y1),
        e**3 * d1 * (x2 + y2),
        e**3 * d1 * (x1**2 + y1**2),
        e**3 * d3,
    ])
    return np.max(terms, axis=0)


def exp_tightness_probe(config: ExperimentConfig, delta: float | None = None,
                        blocks_per_chunk: int = 2) -> StudyResult:
    """``eps^2 log(P_hat + 1/count)`` of ``{bound(eps W(m), eps W) > delta}`` per ``(m, eps)``.

    The event uses the seven-term ``D_{j,p}`` bound as a proxy for ``d_p``;
    dilation scales ``D_{j,p}`` by ``eps^j``, so each sample is reused across
    the whole ``eps`` grid.  Cells without hits are flagged: there the value
    is only an upper bound coming from the ``1/count`` regulariser.
    """
    delta = config.delta if delta is None else float(delta)
    hp, mp = config.hurst, config.metric
    M = config.fine_depth
    ms = list(config.m_range)
    hits = {(m, e): 0 for m in ms for e in config.eps}
    count = 0
    for batch in iter_fbm_batches(hp, M, config.samples, config.seed, config.d, config.backend,
                                  blocks_per_chunk):
        fine = smooth_rough_path(batch, M)
        y = [np.atleast_1d(d_jp(fine, None, j, mp)) for j in (1, 2)]
        count += batch.shape[0]
        for m in ms:
            coarse = fine.coarsen(m)
            dxy = [np.atleast_1d(d_jp(coarse, fine, j, mp)) for j in (1, 2, 3)]
            x = [np.atleast_1d(d_jp(coarse, None, j, mp)) for j in (1, 2)]
            for e in config.eps:
                hits[(m, e)] += int(np.sum(_dilated_bound(dxy, x, y, e) > delta))
    rows, flags = [], _flags_for(config)
    surface = {}
    for e in config.eps:
        for m in ms:
            k = hits[(m, e)]
            val = e**2 * math.log(k / count + 1.0 / count)
            surface[(m, e)] = val
            rows.append({"m": m, "eps": e, "hits": k, "count": count, "probability": k / count,
                         "estimate": val, "zero_hits": k == 0, "seed": config.seed})
    nonincreasing = {}
    for e in config.eps:
        seq = [surface[(m, e)] for m in ms]
        nonincreasing[e] = bool(np.all(np.diff(seq) <= 1e-12))
    if any(r["zero_hits"] for r in rows):
        flags.append("zero_hit_cells")
    summary = {"nonincreasing_in_m": {str(k): v for k, v in nonincreasing.items()},
               "all_nonincreasing": all(nonincreasing.values()), "delta": delta}
    return StudyResult("tightness", rows, summary, flags)


def schilder_slope_probe(config: ExperimentConfig, delta: float | None = None,
                         min_hits: int = 1, blocks_per_chunk: int = 16) -> McEstimate:
    """Slope of ``log P(max_grid |eps W| >= delta)`` against ``1/eps^2`` (d = 1).

    One set of samples at depth ``m_max`` serves every ``eps``.  The fit uses
    all grid values of ``eps`` and needs at least ``min_hits`` hits in every
    cell; otherwise the returned mean is ``nan`` and ``too_few_hits`` is set.
    The target is ``-delta^2 / 2``.
    """
    delta = config.delta if delta is None else float(delta)
    if config.d != 1:
        raise ValueError("the Schilder probe is one-dimensional (d = 1)")
    hp = config.hurst
    sups = []
    for batch in iter_fbm_batches(hp, config.m_max, config.samples, config.seed, 1, config.backend,
                                  blocks_per_chunk):
        sups.append(np.max(np.abs(batch[:, :, 0]), axis=1))
    sup = np.concatenate(sups)
    count = sup.size
    probs, hits, ses = [], [], []
    for e in config.eps:
        k = int(np.sum(e * sup >= delta))
        hits.append(k)
        pr = k / count
        probs.append(pr)
        ses.append(math.sqrt(pr * (1 - pr) / count))
    details = {"eps": list(config.eps), "hits": hits, "probability": probs, "std_error": ses,
               "count": count, "target": -(delta**2) / 2.0, "m": config.m_max, "delta": delta}
    flags = _flags_for(config)
    if min(hits) < min_hits:
        flags.append("too_few_hits")
        details["flags"] = flags
        return McEstimate(math.nan, math.nan, count, config.seed, "schilder_slope", details)
    x = 1.0 / np.asarray(config.eps) ** 2
    if delta == 0.0:
        slope, se, r2 = 0.0, 0.0, 1.0
    else:
        slope, _, r2, se = fit_slope(x, np.log(probs))
    details["r2"] = r2
    details["flags"] = flags
    return McEstimate(slope, se, count, config.seed, "schilder_slope", details)


def run_study(config: ExperimentConfig) -> StudyResult:
    """Dispatch on ``config.study``."""
    if config.study == "moments":
        return moment_decay_study(config)
    if config.study == "tightness":
        return exp_tightness_probe(config)
    if config.study == "schilder":
        est = schilder_slope_probe(config)
        det = est.details
        rows = [{"eps": e, "hits": k, "probability": pr, "std_error": se, "count": det["count"],
                 "seed": est.seed}
                for e, k, pr, se in zip(det["eps"], det["hits"], det["probability"], det["std_error"])]
        summary = {"slope": est.mean, "slope_std_error": est.std_error, "target": det["target"],
                   "r2": det.get("r2")}
        return StudyResult("schilder", rows, summary, list(det["flags"]))
    if config.study == "deterministic":
        if config.density is None:
            h = CameronMartinPath.constant(1.0, config.d)
        else:
            h = CameronMartinPath.load(config.density)
        return deterministic_decay_study(h, config.hurst, config.m_range)
    raise ValueError(f"unknown study {config.study!r}")
