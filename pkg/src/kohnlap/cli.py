"""``kohnlap`` command-line front end."""
from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence, Tuple

from . import catalog
from .errors import ComputationError, ConfigError
from .expr import parse
from .io import csv_text, dumps, load_mapping, load_surface, spectrum_to_dict, atomic_write
from .spectral import CLUSTER_TOL, ZERO_TOL, residual_check, spectrum

COMMANDS = ("spectrum", "deform", "critical", "ratio", "validate", "catalog")


class AssertionFailure(Exception):
    """A requested check ran to completion and did not pass (exit 1)."""


@dataclass
class RunConfig:
    command: str
    catalog: Optional[str] = None
    surface: Optional[str] = None
    deg: Tuple[int, int] = (2, 2)
    res: Optional[int] = None
    tmax: float = 0.05
    tsteps: int = 5
    k: Optional[int] = None
    f: Optional[str] = None
    normalize: bool = False
    h: float = 1e-3
    tol_zero: float = ZERO_TOL
    tol_cluster: float = CLUSTER_TOL
    tol_crit: float = 1e-8
    seed: int = 0
    out: Optional[str] = None
    criteria: Optional[Tuple[int, ...]] = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name in ("tol_zero", "tol_cluster", "tol_crit", "h", "tmax"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if len(self.deg) != 2 or min(self.deg) < 0:
            raise ConfigError("deg needs two nonnegative integers")
        if self.tsteps < 1:
            raise ConfigError("tsteps must be at least 1")
        if self.k is not None and self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.res is not None and self.res < 1:
            raise ConfigError("res must be positive")
        if self.catalog and self.surface:
            raise ConfigError("give either --catalog or --surface, not both")
        return self

    def t_grid(self):
        pos = [self.tmax * (i + 1) / self.tsteps for i in range(self.tsteps)]
        return tuple([-t for t in reversed(pos)] + [0.0] + pos)

    def echo(self):
        d = asdict(self)
        d.pop("out")
        return d


def merge_config(cfg: RunConfig, path) -> RunConfig:
    """Values in the config file override command-line flags."""
    data = load_mapping(path)
    known = {f.name for f in fields(RunConfig)}
    for key, val in data.items():
        name = str(key).replace("-", "_")
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if name in ("deg", "criteria") and val is not None:
            val = tuple(int(x) for x in val)
        setattr(cfg, name, val)
    return cfg


def _entry(cfg: RunConfig):
    if cfg.surface:
        return load_surface(cfg.surface)
    return catalog.from_id(cfg.catalog or "sphere(1)")


def _setup(cfg: RunConfig):
    entry = _entry(cfg)
    P, Q = cfg.deg
    res = cfg.res
    if res is not None and entry.surface.exact_backend != "sphere":
        res = tuple([res] * (2 * entry.n + 1))
    st, basis = entry.setup(P, Q, res)
    return entry, st, basis


def _emit(cfg: RunConfig, files: dict, summary: str):
    if cfg.out:
        out = Path(cfg.out)
        for name, text in sorted(files.items()):
            atomic_write(out / name, text)
    sys.stdout.write(summary)


def cmd_spectrum(cfg: RunConfig) -> int:
    entry, st, basis = _setup(cfg)
    res, _ = spectrum(st, basis, cfg.tol_zero, cfg.tol_cluster)
    resid = [residual_check(st, basis, res, k) for k in range(1, len(res.eigenvalues) + 1)]
    mult = res.multiplicities()
    data = spectrum_to_dict(res, resid, include_coeffs=True, labels=basis.labels)
    data.update(surface=entry.id, nodes=len(st.rule), basis_size=len(basis), config=cfg.echo())
    rows = [(k + 1, float(lam), mult[k], resid[k]) for k, lam in enumerate(res.eigenvalues)]
    table = csv_text(("k", "lambda", "multiplicity", "residual"), rows)
    lines = [f"{entry.id}: basis {len(basis)}, kernel {res.kernel_dim}, nodes {len(st.rule)}\n"]
    lines += [f"{k:4d}  {lam:.12g}  x{m}  residual {r:.1e}\n" for k, lam, m, r in rows]
    _emit(cfg, {"spectrum.json": dumps(data), "eigenvalues.csv": table}, "".join(lines))
    return 0


def _direction(cfg: RunConfig, dim: int):
    if not cfg.f:
        raise ConfigError("this command needs --f <expression>")
    return parse(cfg.f, dim)


def cmd_deform(cfg: RunConfig) -> int:
    from .deformation import continuity_bound_check, eigen_branches, make_path, verify_slopes

    entry, st, basis = _setup(cfg)
    f = _direction(cfg, entry.surface.dim)
    path = make_path(st, f, cfg.normalize)
    ks = list(range(1, (cfg.k or 8) + 1))
    branches = eigen_branches(path, ks, basis, cfg.h, cfg.t_grid(), cfg.tol_zero, cfg.tol_cluster)
    reports = [verify_slopes(path, br.k, basis, cfg.h, branch=br, zero_tol=cfg.tol_zero,
                            cluster_tol=cfg.tol_cluster) for br in branches]
    ends = []
    for t in (-cfg.tmax, cfg.tmax):
        rep = continuity_bound_check(st, path.u(t) - st.u, basis, ks, zero_tol=cfg.tol_zero,
                                     cluster_tol=cfg.tol_cluster)
        ends.append({"t": t, "delta": rep.delta, "delta_prime": rep.delta_prime,
                     "rows": rep.rows, "passed": rep.passed})
    ts = sorted({t for br in branches for t, _ in br.samples})
    vals = {br.k: dict(br.samples) for br in branches}
    rows = [[t] + [vals[k].get(t, float("nan")) for k in ks] for t in ts]
    table = csv_text(["t"] + [f"lambda_{k}" for k in ks], rows)
    passed = all(r.passed for r in reports) and all(e["passed"] for e in ends)
    data = {
        "surface": entry.id, "direction": cfg.f, "config": cfg.echo(),
        "derivatives": [r.as_dict() for r in reports],
        "continuity": ends, "passed": passed,
    }
    lines = [f"{entry.id}, f = {cfg.f}, normalize={cfg.normalize}\n"]
    for r in reports:
        q = ", ".join(f"{x:.6g}" for x in r.qf_eigenvalues)
        lines.append(f"k={r.k}: left {r.left_slope:.8g} right {r.right_slope:.8g} Q_f [{q}] "
                     f"{r.clause} {'ok' if r.passed else 'FAIL'}\n")
    for e in ends:
        lines.append(f"envelope at t={e['t']:g}: delta {e['delta']:.3g} {'ok' if e['passed'] else 'FAIL'}\n")
    _emit(cfg, {"deform.json": dumps(data), "branches.csv": table}, "".join(lines))
    if not passed:
        raise AssertionFailure("derivative or continuity check failed")
    return 0


def _default_index(cfg: RunConfig, entry, res) -> int:
    """--k if given, else the first index of the entry's first known eigenvalue (else 1)."""
    k = cfg.k
    if k is None:
        k = 1
        if entry.known_spectrum:
            target = entry.known_spectrum[0].value
            near = min(res.clusters, key=lambda c: abs(c.value - target))
            if abs(near.value - target) < 1e-3 * max(1.0, target):
                k = near.members[0] + 1
    if k > len(res.eigenvalues):
        raise ConfigError(f"k={k} exceeds the {len(res.eigenvalues)} computed eigenvalues")
    return k


def cmd_critical(cfg: RunConfig) -> int:
    from .criticality import build_bank, indefiniteness_sweep, search_certificate

    entry, st, basis = _setup(cfg)
    res, _ = spectrum(st, basis, cfg.tol_zero, cfg.tol_cluster)
    k = _default_index(cfg, entry, res)
    cluster = res.cluster_of(k)
    cert = search_certificate(st, basis, res, cluster, tol=cfg.tol_crit, seed=cfg.seed)
    data = {"surface": entry.id, "config": cfg.echo(), "lambda": cluster.value,
            "multiplicity": cluster.multiplicity, "certificate": cert.as_dict()}
    verdict = cert.verdict
    if verdict != "certified":
        sweep = indefiniteness_sweep(st, basis, res, cluster, build_bank(st), tol=cfg.tol_crit)
        data["indefiniteness"] = sweep
        if sweep.get("refuted"):
            verdict = "refuted"
    data["verdict"] = verdict
    summary = (f"{entry.id}: lambda_{k} = {cluster.value:.10g} x{cluster.multiplicity}, "
               f"relative variance {cert.variance:.2e}, verdict {verdict}\n")
    _emit(cfg, {"critical.json": dumps(data)}, summary)
    if verdict != "certified":
        raise AssertionFailure(f"no certificate for lambda_{k}")
    return 0


def cmd_ratio(cfg: RunConfig) -> int:
    from .criticality import ratio_certificate

    entry, st, basis = _setup(cfg)
    res, _ = spectrum(st, basis, cfg.tol_zero, cfg.tol_cluster)
    k = cfg.k or 1
    if k > len(res.eigenvalues):
        raise ConfigError(f"k={k} exceeds the {len(res.eigenvalues)} computed eigenvalues")
    ck = res.cluster_of(k)
    nxt = ck.members[-1] + 2
    if nxt > len(res.eigenvalues):
        raise ConfigError("no eigenvalue above the cluster of lambda_k in this basis")
    ck1 = res.cluster_of(nxt)
    rep = ratio_certificate(st, basis, res, ck, ck1, tol=cfg.tol_crit, seed=cfg.seed)
    data = {"surface": entry.id, "config": cfg.echo(), "k": k, "next_index": nxt, "report": rep}
    summary = (f"{entry.id}: ratio lambda {ck1.value:.8g} / {ck.value:.8g}, misfit {rep['misfit']:.2e}, "
               f"scale {rep['scale']:.6g}, verdict {rep['verdict']}\n")
    _emit(cfg, {"ratio.json": dumps(data)}, summary)
    if rep["verdict"] != "certified":
        raise AssertionFailure("no ratio certificate")
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    from .acceptance import run_all

    results = run_all(cfg.criteria)
    lines = [c.line() + "\n" for c in results]
    npass = sum(c.passed for c in results)
    lines.append(f"{npass}/{len(results)} criteria passed\n")
    data = {"criteria": [{"number": c.number, "name": c.name, "passed": c.passed, "detail": c.detail}
                         for c in results], "passed": npass == len(results)}
    _emit(cfg, {"validate.json": dumps(data)}, "".join(lines))
    if npass != len(results):
        raise AssertionFailure("acceptance criteria failed")
    return 0


def cmd_catalog(cfg: RunConfig) -> int:
    rows = catalog.listing()
    text = dumps(rows)
    _emit(cfg, {"catalog.json": text}, text)
    return 0


HANDLERS = {
    "spectrum": cmd_spectrum, "deform": cmd_deform, "critical": cmd_critical,
    "ratio": cmd_ratio, "validate": cmd_validate, "catalog": cmd_catalog,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--catalog", help="catalog id, e.g. 'sphere(1)', 'reinhardt(1,2)'")
    src.add_argument("--surface", help="YAML/JSON surface description file")
    common.add_argument("--deg", nargs=2, type=int, metavar=("P", "Q"), default=(2, 2))
    common.add_argument("--res", type=int, help="quadrature resolution (sphere: exactness degree)")
    common.add_argument("--tmax", type=float, default=0.05)
    common.add_argument("--tsteps", type=int, default=5)
    common.add_argument("--k", type=int, help="eigenvalue index (deform: track 1..k, default 8; "
                        "critical: default is the first catalogued eigenvalue)")
    common.add_argument("--f", help="deformation direction expression")
    common.add_argument("--normalize", action="store_true", help="keep the volume fixed along the path")
    common.add_argument("--h", type=float, default=1e-3, help="finite-difference step")
    common.add_argument("--tol-zero", type=float, default=ZERO_TOL)
    common.add_argument("--tol-cluster", type=float, default=CLUSTER_TOL)
    common.add_argument("--tol-crit", type=float, default=1e-8)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="directory for result files")
    common.add_argument("--config", help="YAML/JSON file whose keys override flags")
    parser = argparse.ArgumentParser(prog="kohnlap", description="Kohn Laplacian spectra on CR hypersurfaces")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "validate":
            sp.add_argument("--criteria", type=int, nargs="+", help="subset of criterion numbers")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        command=ns.command, catalog=ns.catalog, surface=ns.surface, deg=tuple(ns.deg), res=ns.res,
        tmax=ns.tmax, tsteps=ns.tsteps, k=ns.k, f=ns.f, normalize=ns.normalize, h=ns.h,
        tol_zero=ns.tol_zero, tol_cluster=ns.tol_cluster, tol_crit=ns.tol_crit, seed=ns.seed,
        out=ns.out, criteria=tuple(ns.criteria) if getattr(ns, "criteria", None) else None,
    )
    if ns.config:
        merge_config(cfg, ns.config)
    return cfg.validate()


def run(cfg: RunConfig) -> int:
    cfg.validate()
    return HANDLERS[cfg.command](cfg)


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return run(config_from_args(ns))
    except AssertionFailure as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ComputationError as exc:
        print(f"computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
