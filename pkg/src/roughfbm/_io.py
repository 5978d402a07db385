"""Small I/O helpers: commented CSV tables, run manifests and config hashing."""

from __future__ import annotations

import hashlib
import io
import json
import platform
import subprocess
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

MANIFEST_NAME = "manifest.json"


def write_csv(path, columns: Iterable[str], rows, meta: Mapping | None = None) -> None:
    """Write a CSV table whose leading ``#`` lines record ``meta``."""
    buf = io.StringIO()
    for key, val in (meta or {}).items():
        buf.write(f"# {key} = {val}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    Path(path).write_text(buf.getvalue())


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def read_csv(path) -> tuple[list[str], np.ndarray, dict]:
    """Read a numeric CSV written by :func:`write_csv`; returns (columns, data, meta)."""
    meta, columns, data = {}, None, []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            if _:
                meta[key.strip()] = val.strip()
            continue
        if columns is None:
            columns = [c.strip() for c in line.split(",")]
            continue
        data.append([float(x) for x in line.split(",")])
    if columns is None:
        raise ValueError(f"{path}: no header row")
    arr = np.array(data, dtype=float).reshape(-1, len(columns))
    return columns, arr, meta


def config_hash(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def git_describe() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def versions() -> dict:
    import scipy

    from . import __version__

    return {
        "roughfbm": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def write_manifest(outdir, config: Mapping, seed) -> Path:
    """Write the single run manifest of an output directory."""
    outdir = Path(outdir)
    manifest = {
        "config": dict(config),
        "seed": seed,
        "config_hash": config_hash(config),
        "versions": versions(),
        "git_describe": git_describe(),
    }
    path = outdir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def read_manifest(outdir) -> dict:
    return json.loads((Path(outdir) / MANIFEST_NAME).read_text())
