"""Surface specification files, configs and deterministic result files."""
from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .catalog import CatalogEntry, from_id
from .errors import ConfigError
from .expr import parse
from .functions import FunctionRep
from .geometry import DefiningSurface, radial_chart


def load_mapping(path) -> dict:
    """Read a YAML or JSON mapping."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return data


def surface_from_spec(spec: dict) -> CatalogEntry:
    """Build a catalog entry from ``{name, cr_dim, rho, catalog_id?, resolution?, extras?}``.

    Surfaces outside the catalog get a radial chart, which needs the surface
    to be star-shaped about the origin with rho(0) < 0.
    """
    if spec.get("catalog_id"):
        return from_id(str(spec["catalog_id"]))
    try:
        n = int(spec["cr_dim"])
        rho_text = str(spec["rho"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError("surface spec needs cr_dim and rho (or catalog_id)") from None
    name = str(spec.get("name", "surface"))
    rho = parse(rho_text, n + 1)
    if not rho.is_real(1e-12):
        raise ConfigError("rho must be real-valued")
    try:
        surf = DefiningSurface(name, n, rho, (radial_chart(rho, n),))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    extras = tuple(parse(e, n + 1) for e in spec.get("extras", []) or [])
    res = spec.get("resolution")
    if isinstance(res, list):
        res = tuple(int(x) for x in res)
    if res is None:
        res = surf.charts[0].default_resolution
    return CatalogEntry(name, surf, (), extras=extras, default_resolution=res)


def load_surface(path) -> CatalogEntry:
    return surface_from_spec(load_mapping(path))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path, obj):
    atomic_write(path, dumps(obj))


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write(path, csv_text(header, rows))


def spectrum_to_dict(result, residuals=None, include_coeffs: bool = False, labels=()) -> dict:
    out = {
        "eigenvalues": [float(x) for x in result.eigenvalues],
        "kernel_dim": result.kernel_dim,
        "kernel_gap": result.kernel_gap,
        "zero_tol": result.zero_tol,
        "cluster_tol": result.cluster_tol,
        "clusters": [
            {"value": c.value, "multiplicity": c.multiplicity, "members": [m + 1 for m in c.members]}
            for c in result.clusters
        ],
    }
    if residuals is not None:
        out["residuals"] = [float(r) for r in residuals]
    if include_coeffs:
        out["basis"] = list(labels)
        out["coeffs_real"] = result.coeffs.real.tolist()
        out["coeffs_imag"] = result.coeffs.imag.tolist()
    return out
