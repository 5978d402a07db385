"""Command-line entry point.

Exit codes: 0 success, 2 usage or invalid input, 3 I/O failure,
4 statistical soft-failure (outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._io import read_csv, write_csv, write_manifest
from .kernel import CameronMartinPath, HurstParams
from .ldp import ExperimentConfig, run_study
from .metrics import MetricParams, d_jp_report, d_p_dyadic, dp_upper_bound
from .sampler import sample_fbm, write_path_csv
from .tensor import DyadicRoughPath, smooth_rough_path
from .volterra import (HoelderFunction, IntegralReport, LevelTwoCache, cm_level2, cm_level3,
                       integrate_against_h, thm2_check)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SOFT = 0, 2, 3, 4
SOFT_FLAGS = {"insufficient_samples", "too_few_hits"}


class UsageError(Exception):
    pass


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _load_path_csv(path) -> DyadicRoughPath:
    try:
        cols, data, _ = read_csv(path)
    except ValueError as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from None
    if not cols or cols[0] != "t" or len(cols) < 2:
        raise UsageError(f"{path}: expected columns t,x_1..x_d")
    try:
        return smooth_rough_path(data[:, 1:])
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _load_density(path) -> CameronMartinPath:
    try:
        return CameronMartinPath.load(path)
    except ValueError as exc:
        raise UsageError(f"cannot parse density file {path}: {exc}") from None


def _hurst(args) -> HurstParams:
    try:
        return HurstParams(args.hurst, getattr(args, "p", None), getattr(args, "gamma", None),
                           getattr(args, "dim", 1) or 1)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _metric(args) -> MetricParams:
    try:
        return MetricParams(args.p, args.gamma, args.n_max, getattr(args, "partition_depth", None))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_increments(path: DyadicRoughPath, filename) -> None:
    d = path.dim
    idx = [f"{i + 1}" for i in range(d)]
    cols = (["n", "l", "s", "t"] + [f"x1_{a}" for a in idx]
            + [f"x2_{a}{b}" for a in idx for b in idx]
            + [f"x3_{a}{b}{c}" for a in idx for b in idx for c in idx])
    rows = []
    for n in range(path.depth + 1):
        lev = path.level(n)
        flat = lev.flatten()
        for l in range(2**n):
            rows.append([n, l, l * 2.0**-n, (l + 1) * 2.0**-n, *flat[l]])
    write_csv(filename, cols, rows, {"depth": path.depth, "d": d})


def cmd_sample(args) -> int:
    hp = _hurst(args)
    if args.depth < 0:
        raise UsageError("--depth must be >= 0")
    try:
        path = sample_fbm(hp, args.depth, args.seed, args.dim, args.backend)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _outdir(args.out)
    write_path_csv(path, out / "path.csv", {"backend": args.backend})
    write_manifest(out, {"command": "sample", "H": hp.H, "m": args.depth, "d": args.dim,
                         "backend": args.backend}, args.seed)
    return EXIT_OK


def _norm_reports(x, mp):
    return [json.loads(d_jp_report(x, None, j, mp).to_json()) for j in (1, 2, 3)]


def cmd_roughpath(args) -> int:
    mp = _metric(args)
    config = {"command": "roughpath", "p": mp.p, "gamma": mp.gamma, "N_max": mp.N_max}
    extra = {}
    if args.input:
        x = _load_path_csv(args.input)
        config["input"] = str(args.input)
    else:
        h = _load_density(args.cm)
        if args.hurst is None:
            raise UsageError("--cm needs --hurst")
        try:
            hp = HurstParams(args.hurst, mp.p, mp.gamma, h.dim)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        x = smooth_rough_path(h.evaluate(hp, np.linspace(0.0, 1.0, 2**args.depth + 1)), args.depth)
        cache = LevelTwoCache(h, hp, args.grid_depth)
        extra = {
            "h1": h.evaluate(hp, 1.0).tolist(),
            "cm_level2": cm_level2(h, hp, 0.0, 1.0, args.grid_depth).tolist(),
            "cm_level3": cm_level3(h, hp, 0.0, 1.0, args.grid_depth, cache).tolist(),
        }
        config.update({"cm": str(args.cm), "H": hp.H, "depth": args.depth, "grid_depth": args.grid_depth})
    out = _outdir(args.out)
    _write_increments(x, out / "increments.csv")
    (out / "norms.json").write_text(json.dumps(_norm_reports(x, mp), indent=2) + "\n")
    if extra:
        (out / "cm_levels.json").write_text(json.dumps(extra, indent=2) + "\n")
    write_manifest(out, config, None)
    return EXIT_OK


def cmd_metrics(args) -> int:
    mp = _metric(args)
    x = _load_path_csv(args.x)
    y = _load_path_csv(args.y) if args.y else None
    if y is not None and y.dim != x.dim:
        raise UsageError("paths have different dimensions")
    reports = [json.loads(d_jp_report(x, y, j, mp).to_json()) for j in (1, 2, 3)]
    result = {"D": reports, "d_p_dyadic": d_p_dyadic(x, y, mp)}
    if y is not None:
        result["dp_upper_bound"] = dp_upper_bound(x, y, mp)
    out = _outdir(args.out)
    (out / "metrics.json").write_text(json.dumps(result, indent=2) + "\n")
    write_manifest(out, {"command": "metrics", "x": str(args.x), "y": str(args.y), "p": mp.p,
                         "gamma": mp.gamma, "N_max": mp.N_max,
                         "partition_depth": mp.partition_depth}, None)
    return EXIT_OK


def cmd_thm2(args) -> int:
    h = _load_density(args.cm)
    try:
        hp = HurstParams(args.hurst, d=h.dim)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not 1 <= args.m_min <= args.m_max:
        raise UsageError("need 1 <= --m-min <= --m-max")
    ms = range(args.m_min, args.m_max + 1)
    rep = thm2_check(h, hp, ms, args.grid_depth)
    ts = np.linspace(0.0, 1.0, args.points)
    phi = HoelderFunction.from_cm(h, hp)
    vals, errs = integrate_against_h(phi, h, hp, ts, return_error=True)
    integral = IntegralReport(ts, vals, errs, args.grid_depth, "int_0^t h dh",
                              {"H": hp.H, "d": h.dim})
    out = _outdir(args.out)
    (out / "thm2.json").write_text(rep.to_json() + "\n")
    write_csv(out / "thm2.csv", ["m", "level2_error", "level3_error"],
              zip(rep.m, rep.level2_error, rep.level3_error), {"H": hp.H, "grid_depth": args.grid_depth})
    (out / "integral.json").write_text(integral.to_json() + "\n")
    integral.write_csv(out / "integral.csv")
    write_manifest(out, {"command": "thm2-check", "cm": str(args.cm), "H": hp.H, "m_min": args.m_min,
                         "m_max": args.m_max, "grid_depth": args.grid_depth}, None)
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {args.config}: {exc}") from exc
    try:
        config = ExperimentConfig.from_text(text)
    except ValueError as exc:
        raise UsageError(f"bad config: {exc}") from None
    outpath = args.out or config.output
    if not outpath:
        raise UsageError("no output directory (--out or 'output' in the config)")
    try:
        result = run_study(config)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _outdir(outpath)
    rows = result.rows
    cols = result.columns
    write_csv(out / "table.csv", cols, ([r.get(c, "") for c in cols] for r in rows),
              {"study": config.study, "seed": config.seed})
    summary = {"study": result.study, "summary": result.summary, "flags": result.flags}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")
    write_manifest(out, config.to_dict(), config.seed)
    if SOFT_FLAGS & set(result.flags):
        print(f"statistical soft-failure: {', '.join(sorted(SOFT_FLAGS & set(result.flags)))}",
              file=sys.stderr)
        return EXIT_SOFT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roughfbm", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample one fBm path on a dyadic grid", allow_abbrev=False)
    p.add_argument("--hurst", type=float, required=True, help="Hurst index in (1/4, 1/2)")
    p.add_argument("--depth", type=int, required=True, help="grid depth m (2**m + 1 points)")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", choices=["cholesky", "circulant"], default="cholesky")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("roughpath", help="tensor increments and D_{j,p} norms of a path",
                       allow_abbrev=False)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="path CSV with columns t,x_1..x_d")
    src.add_argument("--cm", help="step-density file 's_start s_end v_1 .. v_d'")
    p.add_argument("--hurst", type=float, help="Hurst index (with --cm)")
    p.add_argument("--depth", type=int, default=8, help="grid depth for --cm")
    p.add_argument("--grid-depth", type=int, default=10, help="level-2 cache depth for --cm")
    p.add_argument("--p", type=float, default=3.5)
    p.add_argument("--gamma", type=float, default=3.5)
    p.add_argument("--n-max", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_roughpath)

    p = sub.add_parser("metrics", help="D_{j,p} and dyadic p-variation distance", allow_abbrev=False)
    p.add_argument("--x", required=True, help="path CSV")
    p.add_argument("--y", help="second path CSV (default: the zero path)")
    p.add_argument("--p", type=float, default=3.5)
    p.add_argument("--gamma", type=float, default=3.5)
    p.add_argument("--n-max", type=int, default=16)
    p.add_argument("--partition-depth", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("thm2-check", help="iterated integrals of h versus those of h(m)",
                       allow_abbrev=False)
    p.add_argument("--cm", required=True, help="step-density file")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--m-min", type=int, default=6)
    p.add_argument("--m-max", type=int, default=11)
    p.add_argument("--grid-depth", type=int, default=10)
    p.add_argument("--points", type=int, default=17, help="t-grid size of the integral report")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_thm2)

    p = sub.add_parser("experiment", help="run a study from a key = value config", allow_abbrev=False)
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides 'output' in the config)")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"roughfbm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"roughfbm {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
