"""Ready-made surfaces with exact reference spectra."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .expr import parse
from .functions import FunctionRep, require_real, to_string
from .geometry import DefiningSurface, QuadratureRule, build_quadrature, reinhardt_chart, sphere_chart
from .kohn import PseudohermitianStructure
from .spectral import SpectralBasis, build_basis


@dataclass(frozen=True)
class KnownEigenvalue:
    value: float
    multiplicity: int
    description: str
    eigenfunctions: Tuple[FunctionRep, ...] = ()


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    surface: DefiningSurface
    known_spectrum: Tuple[KnownEigenvalue, ...] = ()
    u: Optional[FunctionRep] = None
    extras: Tuple[FunctionRep, ...] = ()
    default_resolution: object = None

    @property
    def n(self):
        return self.surface.cr_dim

    def rule(self, P: int = 2, Q: int = 2, resolution=None) -> QuadratureRule:
        """Quadrature adequate for a (P, Q) basis; deformed entries get extra degree."""
        if resolution is None:
            if self.surface.exact_backend == "sphere":
                resolution = sphere_degree(P, Q, deformed=self.u is not None)
            else:
                resolution = self.default_resolution
        return build_quadrature(self.surface, resolution)

    def setup(self, P: int = 2, Q: int = 2, resolution=None):
        """(structure, basis) for a (P, Q) Galerkin space on this entry."""
        rule = self.rule(P, Q, resolution)
        u = self.u if self.u is not None else FunctionRep.constant(self.surface.dim, 0.0)
        structure = PseudohermitianStructure(self.surface, u, rule)
        basis = build_basis(self.surface, P, Q, self.extras, rule=rule)
        return structure, basis


def sphere_degree(P: int, Q: int, deformed: bool = False) -> int:
    """Exactness degree of the sphere rule for a (P, Q) basis."""
    return 2 * (P + Q) + 2 + (10 if deformed else 0)


def bihomogeneous_dim(n: int, p: int, q: int) -> int:
    """Dimension of bihomogeneous polynomials of bidegree (p, q) on C^{n+1}."""
    if p < 0 or q < 0:
        return 0
    return comb(p + n, n) * comb(q + n, n)


def harmonic_dim(n: int, p: int, q: int) -> int:
    """dim H_{p,q}(S^{2n+1}) by inclusion-exclusion."""
    return bihomogeneous_dim(n, p, q) - bihomogeneous_dim(n, p - 1, q - 1)


def sphere_spectrum(n: int, P: int, Q: int) -> Dict[int, int]:
    """Positive eigenvalue -> multiplicity on the span of bidegrees (p <= P, 1 <= q <= Q)."""
    out: Dict[int, int] = {}
    for p in range(P + 1):
        for q in range(1, Q + 1):
            lam = q * (p + n)
            out[lam] = out.get(lam, 0) + harmonic_dim(n, p, q)
    return dict(sorted(out.items()))


def sphere_kernel_dim(n: int, P: int) -> int:
    return sum(harmonic_dim(n, p, 0) for p in range(P + 1))


def _sphere_rho(n):
    return parse("+".join(f"z{j}*zb{j}" for j in range(1, n + 2)) + "-1", n + 1)


def sphere(n: int) -> CatalogEntry:
    if n < 1:
        raise ConfigError("sphere needs n >= 1")
    dim = n + 1
    surf = DefiningSurface(f"sphere({n})", n, _sphere_rho(n), (sphere_chart(n),), "sphere")
    known = []
    zbars = tuple(FunctionRep.zbar(dim, j) for j in range(dim))
    for p in range(3):
        for q in range(1, 3):
            funcs: Tuple[FunctionRep, ...] = ()
            if (p, q) == (0, 1):
                funcs = zbars
            elif (p, q) == (0, 2):
                funcs = tuple(zbars[i] * zbars[j] for i in range(dim) for j in range(i, dim))
            known.append(KnownEigenvalue(float(q * (p + n)), harmonic_dim(n, p, q), f"H_{{{p},{q}}}", funcs))
    return CatalogEntry(f"sphere({n})", surf, tuple(known))


def reinhardt(n: int, r: float) -> CatalogEntry:
    if n < 1 or not r > 0:
        raise ConfigError("reinhardt needs n >= 1 and r > 0")
    dim = n + 1
    logs = [FunctionRep.logabs2(dim, j) for j in range(dim)]
    rho = FunctionRep.constant(dim, -float(r) ** 2)
    for L in logs:
        rho = rho + L * L
    res = tuple([32] * n + [24] * (n + 1)) if n == 1 else tuple([12] * (2 * n + 1))
    surf = DefiningSurface(f"reinhardt({n},{r:g})", n, rho, (reinhardt_chart(n, float(r), res),))
    v = tuple((1.0 / r) * L for L in logs)
    known = (KnownEigenvalue(n / (2.0 * r * r), n + 1, "v_j = log|z_j|^2 / r", v),)
    return CatalogEntry(f"reinhardt({n},{r:g})", surf, known, extras=tuple(logs), default_resolution=res)


def deformed_sphere(n: int, u: FunctionRep) -> CatalogEntry:
    require_real(u, "conformal factor")
    base = sphere(n)
    return CatalogEntry(f"deformed_sphere({n},{to_string(u)})", base.surface, (), u=u)


_ID = re.compile(r"^\s*(sphere|reinhardt|deformed_sphere)\s*\((.*)\)\s*$")


def from_id(text: str) -> CatalogEntry:
    """Parse ``sphere(n)``, ``reinhardt(n, r)`` or ``deformed_sphere(n, <expr>)``."""
    m = _ID.match(text)
    if not m:
        raise ConfigError(f"unknown catalog id {text!r}")
    kind, args = m.group(1), m.group(2)
    parts = [a.strip() for a in args.split(",", 1 if kind == "deformed_sphere" else -1)]
    try:
        n = int(parts[0])
        if kind == "sphere" and len(parts) == 1:
            return sphere(n)
        if kind == "reinhardt" and len(parts) == 2:
            return reinhardt(n, float(parts[1]))
        if kind == "deformed_sphere" and len(parts) == 2:
            return deformed_sphere(n, parse(parts[1], n + 1))
    except ValueError as exc:
        raise ConfigError(f"bad catalog id {text!r}: {exc}") from None
    raise ConfigError(f"bad arguments in catalog id {text!r}")


def listing() -> List[dict]:
    rows = []
    for e in (sphere(1), sphere(2), reinhardt(1, 1.0), reinhardt(1, 2.0)):
        rows.append({
            "id": e.id,
            "cr_dim": e.n,
            "known_spectrum": [
                {"lambda": k.value, "multiplicity": k.multiplicity, "description": k.description}
                for k in e.known_spectrum
            ],
        })
    rows.append({"id": "deformed_sphere(n, u)", "cr_dim": None, "known_spectrum": []})
    return rows
