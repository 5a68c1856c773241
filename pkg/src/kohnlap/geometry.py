"""Defining-function geometry of a strictly pseudoconvex hypersurface.

Everything here is computed from the ambient defining function ``rho``: the
Levi data (holomorphic gradient, complex Hessian and its inverse), the
tangential pairing of (0,1)-gradients, the volume form of the contact form
``theta = i dbar(rho)`` restricted to M, and quadrature rules on M.

The tangential pairing is realized with the projected inverse-Levi tensor

    T^{jbar k} = rho^{jbar k} - rho^{jbar} rho^{k} / |d rho|^2,

applied to anti-holomorphic gradients of ambient extensions, so no frames
on M are ever constructed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_jacobi

from .errors import ChartDomainError, EvaluationError, OffSurface, SingularLevi
from .functions import FunctionRep, Jet

ON_SURFACE_TOL = 1e-8
CHART_TOL = 1e-10
LEVI_COND_CAP = 1e12


@dataclass(frozen=True)
class Chart:
    """Parametrization of (an open dense part of) M.

    ``map(s)`` takes real parameters of shape (N, 2n+1) and returns ambient
    points (N, n+1); ``jacobian(s)`` returns dz/ds with shape (N, n+1, 2n+1).
    ``domain`` lists ``(lo, hi, periodic)`` per parameter; periodic
    directions get trapezoid nodes, the others Gauss-Legendre.
    """

    param_dim: int
    map: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    domain: Tuple[Tuple[float, float, bool], ...]
    default_resolution: Tuple[int, ...]


@dataclass(frozen=True)
class DefiningSurface:
    """M = {rho = 0} in C^{n+1}.

    ``exact_backend`` is ``"sphere"`` for the unit sphere, which enables the
    exact-monomial quadrature rule.
    """

    name: str
    cr_dim: int
    rho: FunctionRep
    charts: Tuple[Chart, ...] = ()
    exact_backend: Optional[str] = None

    def __post_init__(self):
        if self.cr_dim < 1:
            raise ValueError("CR dimension must be positive")
        if self.rho.dim != self.cr_dim + 1:
            raise ValueError("defining function lives on the wrong ambient space")
        if not self.rho.is_real(1e-12):
            raise ValueError("defining function must be real-valued")

    @property
    def dim(self):
        return self.cr_dim + 1


@dataclass(frozen=True)
class LeviData:
    """Levi data of rho at N points (arrays carry a leading node axis)."""

    rho_j: np.ndarray  # (N, d) holomorphic gradient
    rho_jkbar: np.ndarray  # (N, d, d) H[j, k] = d^2 rho / dz_j dzbar_k
    rho_inv: np.ndarray  # (N, d, d) inverse of H
    rho_up: np.ndarray  # (N, d) rho^{jbar} = (H^{-1} rho_z)_j
    grad_norm_sq: np.ndarray  # (N,) |d rho|^2 = rho_z^* H^{-1} rho_z
    tangential: np.ndarray  # (N, d, d) projected tensor T

    @property
    def n_points(self):
        return self.grad_norm_sq.shape[0]


def levi_from_jet(jet: Jet) -> LeviData:
    """Levi data from a jet of the defining function (no surface checks)."""
    rho_z = jet.d
    # mixed[:, j, k] = d^2/dzbar_j dz_k, so H[j, k] = d^2/dz_j dzbar_k = mixed[:, k, j]
    H = np.swapaxes(jet.mixed, -1, -2)
    H = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    cond = np.linalg.cond(H)
    if not np.all(np.isfinite(cond)) or np.max(cond) > LEVI_COND_CAP:
        raise SingularLevi(f"Levi matrix condition number {np.max(cond):.3g} exceeds cap")
    Hinv = np.linalg.inv(H)
    Hinv = 0.5 * (Hinv + np.conj(np.swapaxes(Hinv, -1, -2)))
    up = np.einsum("njk,nk->nj", Hinv, rho_z)
    gns = np.real(np.einsum("nj,nj->n", np.conj(rho_z), up))
    if np.any(gns <= 0):
        raise SingularLevi("|d rho|^2 must be positive on M")
    T = Hinv - up[:, :, None] * np.conj(up)[:, None, :] / gns[:, None, None]
    return LeviData(rho_z, H, Hinv, up, gns, T)


def levi_data(surface: DefiningSurface, p, tol=ON_SURFACE_TOL) -> LeviData:
    """Levi data of ``surface`` at the points ``p`` (shape (N, n+1) or (n+1,))."""
    pts = np.atleast_2d(np.asarray(p, dtype=complex))
    jet = surface.rho.jet(pts)
    off = np.max(np.abs(jet.val)) if len(pts) else 0.0
    if off > tol:
        raise OffSurface(f"|rho| = {off:.3g} exceeds tolerance {tol:g}")
    return levi_from_jet(jet)


def as_jet(f, p) -> Jet:
    if isinstance(f, Jet):
        return f
    return f.jet(np.atleast_2d(np.asarray(p, dtype=complex)))


def pairing(levi: LeviData, f: Jet, g: Jet) -> np.ndarray:
    """<dbar_b f, dbar_b g> at every node (Hermitian, conjugate-linear in g)."""
    return np.einsum("njk,nj,nk->n", levi.tangential, f.dbar, np.conj(g.dbar))


def mixed_pairing(levi: LeviData, u: Jet, f: Jet) -> np.ndarray:
    """<d_b u, dbar_b f> = T^{jbar k} f_{jbar} u_k."""
    return np.einsum("njk,nj,nk->n", levi.tangential, f.dbar, u.d)


def holo_pairing(levi: LeviData, f: Jet, g: Jet) -> np.ndarray:
    """<d_b f, d_b g> for (1,0)-gradients."""
    return np.einsum("njk,nj,nk->n", levi.tangential, np.conj(f.d), g.d)


def tangential_pairing(surface: DefiningSurface, f, g, p, levi: LeviData | None = None):
    """Pointwise <dbar_b f, dbar_b g> of ambient functions (or jets) at ``p``."""
    levi = levi if levi is not None else levi_data(surface, p)
    fj, gj = as_jet(f, p), as_jet(g, p)
    # averaging both orders makes the result exactly Hermitian in floating point
    return 0.5 * (pairing(levi, fj, gj) + np.conj(pairing(levi, gj, fj)))


def volume_density(levi: LeviData, cr_dim: int) -> np.ndarray:
    """Density of theta ^ (d theta)^n with respect to Euclidean area on M.

    Uses d rho ^ theta ^ (d theta)^n = n! 2^{n+1} det(H) |d rho|^2 dV and
    |grad rho| = 2 |rho_z|.
    """
    n = cr_dim
    det = np.real(np.linalg.det(levi.rho_jkbar))
    norm_z = np.linalg.norm(levi.rho_j, axis=-1)
    return math.factorial(n) * 2.0**n * det * levi.grad_norm_sq / norm_z


def euclidean_area_element(jac: np.ndarray) -> np.ndarray:
    real = np.concatenate([jac.real, jac.imag], axis=1)  # (N, 2d, 2n+1)
    gram = np.einsum("nai,naj->nij", real, real)
    det = np.linalg.det(gram)
    if np.any(det <= 0) or not np.all(np.isfinite(det)):
        raise ChartDomainError("chart jacobian is singular at a quadrature node")
    return np.sqrt(det)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (N, n+1)
    weights: np.ndarray  # (N,) weights for integrals against dvol_theta
    exactness_tag: str  # "exact-monomial" | "chart-product" | "none"
    levi: LeviData = field(repr=False)
    resolution: object = None

    def __len__(self):
        return self.weights.shape[0]

    @property
    def volume(self):
        return float(np.sum(self.weights))


def sphere_moment(a: Sequence[int], b: Sequence[int], n: int) -> float:
    """Normalized moment E[z^a zbar^b] of the invariant probability on S^{2n+1}."""
    if tuple(a) != tuple(b):
        return 0.0
    num = math.factorial(n) * math.prod(math.factorial(x) for x in a)
    return num / math.factorial(n + sum(a))


def _simplex_rule(n: int, m: int):
    """Collapsed Gauss-Jacobi rule for the uniform probability on the n-simplex.

    Returns points t with shape (K, n+1) (barycentric, summing to one) and
    weights summing to one; exact for polynomials of degree <= 2m-1 in t.
    """
    grids, wts = [], []
    for i in range(1, n + 1):
        x, w = roots_jacobi(m, n - i, 0)
        grids.append((x + 1) / 2)
        wts.append(w)
    mesh = np.meshgrid(*grids, indexing="ij")
    wmesh = np.meshgrid(*wts, indexing="ij")
    s = np.stack([g.ravel() for g in mesh], axis=-1)
    w = np.prod(np.stack([g.ravel() for g in wmesh], axis=-1), axis=-1)
    t = np.empty((s.shape[0], n + 1))
    rest = np.ones(s.shape[0])
    for i in range(n):
        t[:, i] = rest * s[:, i]
        rest = rest * (1 - s[:, i])
    t[:, n] = rest
    return t, w / w.sum()


def sphere_exact_rule(surface: DefiningSurface, degree: int) -> QuadratureRule:
    """Rule on the unit sphere exact for z^a zbar^b with |a| + |b| <= degree."""
    n = surface.cr_dim
    degree = max(int(degree), 1)
    n_phi = degree + 1
    m = (degree // 2) // 2 + 1
    t, wt = _simplex_rule(n, m)
    phis = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    phase_grid = np.stack([g.ravel() for g in np.meshgrid(*([phis] * (n + 1)), indexing="ij")], -1)
    nodes = (np.sqrt(t)[:, None, :] * np.exp(1j * phase_grid)[None, :, :]).reshape(-1, n + 1)
    w = (wt[:, None] * np.full(len(phase_grid), 1.0 / len(phase_grid))[None, :]).ravel()
    levi = levi_data(surface, nodes, tol=CHART_TOL)
    # total mass: constant density at one node times the Euclidean area
    area = 2 * np.pi ** (n + 1) / math.factorial(n)
    dens = volume_density(levi, n)
    vol = float(dens[0]) * area
    return QuadratureRule(nodes, w * vol, "exact-monomial", levi, resolution=degree)


def chart_rule(surface: DefiningSurface, chart: Chart, resolution=None) -> QuadratureRule:
    if resolution is None:
        res = chart.default_resolution
    elif np.isscalar(resolution):
        res = (int(resolution),) * chart.param_dim
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != chart.param_dim:
        raise ChartDomainError("resolution does not match chart dimension")
    grids, wts = [], []
    for (lo, hi, periodic), k in zip(chart.domain, res):
        if not hi > lo or k < 1:
            raise ChartDomainError("empty chart domain")
        if periodic:
            x = lo + (hi - lo) * (np.arange(k) + 0.5) / k
            w = np.full(k, (hi - lo) / k)
        else:
            x, w = np.polynomial.legendre.leggauss(k)
            x = lo + (hi - lo) * (x + 1) / 2
            w = w * (hi - lo) / 2
        grids.append(x)
        wts.append(w)
    s = np.stack([g.ravel() for g in np.meshgrid(*grids, indexing="ij")], -1)
    ws = np.prod(np.stack([g.ravel() for g in np.meshgrid(*wts, indexing="ij")], -1), -1)
    nodes = chart.map(s)
    levi = levi_data(surface, nodes, tol=CHART_TOL)
    dens = volume_density(levi, surface.cr_dim)
    area = euclidean_area_element(chart.jacobian(s))
    return QuadratureRule(nodes, ws * dens * area, "chart-product", levi, resolution=res)


def build_quadrature(surface: DefiningSurface, resolution=None, backend: str = "auto") -> QuadratureRule:
    """Quadrature rule for integrals against dvol_theta on M.

    ``backend="auto"`` uses the exact-monomial sphere rule when available
    (``resolution`` is then the polynomial degree of exactness) and the
    first chart otherwise (``resolution`` is points per direction, either
    an int or a tuple).
    """
    if backend in ("auto", "exact") and surface.exact_backend == "sphere":
        return sphere_exact_rule(surface, 12 if resolution is None else resolution)
    if backend == "exact":
        raise ChartDomainError(f"{surface.name} has no exact-monomial backend")
    if not surface.charts:
        raise ChartDomainError(f"{surface.name} has no chart")
    return chart_rule(surface, surface.charts[0], resolution)


def _values(f, rule: QuadratureRule):
    if isinstance(f, FunctionRep):
        return f(rule.nodes)
    if isinstance(f, Jet):
        return f.val
    v = np.asarray(f)
    if v.shape != rule.weights.shape:
        raise EvaluationError("values do not match the quadrature nodes")
    return v


def integrate(f, rule: QuadratureRule, weight: np.ndarray | None = None) -> complex:
    """Integral of ``f`` (FunctionRep, Jet, or node values) against dvol_theta."""
    w = rule.weights if weight is None else rule.weights * weight
    vals = _values(f, rule)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("integrand not finite at a quadrature node")
    return complex(np.dot(w, vals))


def sup_norm(f, rule: QuadratureRule) -> float:
    return float(np.max(np.abs(_values(f, rule)))) if len(rule) else 0.0


def sup_tangential_norm(f, rule: QuadratureRule, scale: np.ndarray | None = None) -> float:
    """max over nodes of |dbar_b f|; ``scale`` multiplies the squared norm pointwise."""
    jet = f if isinstance(f, Jet) else f.jet(rule.nodes, second=False)
    sq = np.real(pairing(rule.levi, jet, jet))
    if scale is not None:
        sq = sq * scale
    return float(np.sqrt(max(np.max(sq), 0.0)))


# ---------------------------------------------------------------------------
# charts


def _spherical(angles: np.ndarray):
    """Unit vectors on S^m from m angles, with derivatives.

    x_k = (prod_{i<k} sin a_i) cos a_k for k < m, x_m = prod_{i<m} sin a_i.
    Returns x (N, m+1) and dx/da (N, m+1, m).
    """
    N, m = angles.shape
    s, c = np.sin(angles), np.cos(angles)
    x = np.empty((N, m + 1))
    dx = np.zeros((N, m + 1, m))
    prefix = np.ones(N)
    for k in range(m + 1):
        last = k == m
        x[:, k] = prefix * (1.0 if last else c[:, k])
        for i in range(min(k, m)):
            # derivative in a_i of the prefix factor sin a_i
            others = np.ones(N)
            for l in range(k):
                if l != i:
                    others = others * s[:, l]
            dx[:, k, i] = others * c[:, i] * (1.0 if last else c[:, k])
        if not last:
            dx[:, k, k] = -prefix * s[:, k]
            prefix = prefix * s[:, k]
    return x, dx


def sphere_chart(n: int) -> Chart:
    """z_j = x_j e^{i phi_j} with x in the open positive orthant of S^n."""

    def split(s):
        return s[:, :n], s[:, n:]

    def fmap(s):
        ang, phi = split(s)
        x, _ = _spherical(ang)
        return x * np.exp(1j * phi)

    def jac(s):
        ang, phi = split(s)
        x, dx = _spherical(ang)
        e = np.exp(1j * phi)
        J = np.zeros((s.shape[0], n + 1, 2 * n + 1), dtype=complex)
        J[:, :, :n] = dx * e[:, :, None]
        for j in range(n + 1):
            J[:, j, n + j] = 1j * x[:, j] * e[:, j]
        return J

    domain = tuple([(0.0, np.pi / 2, False)] * n + [(0.0, 2 * np.pi, True)] * (n + 1))
    return Chart(2 * n + 1, fmap, jac, domain, tuple([24] * n + [24] * (n + 1)))


def reinhardt_chart(n: int, r: float, resolution: Tuple[int, ...] | None = None) -> Chart:
    """z_j = exp(xi_j/2 + i phi_j) with xi on the radius-r sphere in R^{n+1}, so log|z_j|^2 = xi_j.

    The log-space sphere uses n-1 polar angles (Gauss-Legendre) and one
    azimuth (trapezoid); the phases live on the (n+1)-torus.
    """

    def fmap(s):
        x, _ = _spherical(s[:, :n])
        xi = r * x
        return np.exp(xi / 2 + 1j * s[:, n:])

    def jac(s):
        x, dx = _spherical(s[:, :n])
        z = np.exp(r * x / 2 + 1j * s[:, n:])
        J = np.zeros((s.shape[0], n + 1, 2 * n + 1), dtype=complex)
        J[:, :, :n] = 0.5 * z[:, :, None] * r * dx
        for j in range(n + 1):
            J[:, j, n + j] = 1j * z[:, j]
        return J

    domain = tuple([(0.0, np.pi, False)] * (n - 1) + [(0.0, 2 * np.pi, True)] * (n + 2))
    default = resolution or tuple([32] * n + [24] * (n + 1))
    return Chart(2 * n + 1, fmap, jac, domain, default)


def radial_chart(rho: FunctionRep, n: int, r_max: float = 1e3) -> Chart:
    """Radial projection of the unit-sphere chart onto {rho = 0}.

    Valid for hypersurfaces star-shaped about the origin with rho < 0 at 0;
    the radius is found by bracketed Newton iteration and its derivative by
    implicit differentiation.
    """
    base = sphere_chart(n)

    def _drho_dR(omega, R):
        jet = rho.jet(R[:, None] * omega, second=False)
        return jet.val.real, 2 * np.real(np.einsum("nj,nj->n", jet.d, omega)), jet

    def radius(omega):
        N = omega.shape[0]
        lo, hi = np.zeros(N), np.ones(N)
        for _ in range(60):
            v = rho(hi[:, None] * omega).real
            if np.all(v > 0):
                break
            hi = np.where(v > 0, hi, 2 * hi)
            if np.any(hi > r_max):
                raise ChartDomainError("radial chart: surface is not star-shaped about 0")
        R = 0.5 * (lo + hi)
        for _ in range(200):
            v, dv, _ = _drho_dR(omega, R)
            lo = np.where(v < 0, R, lo)
            hi = np.where(v > 0, R, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = R - v / dv
            bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
            step = np.where(bad, 0.5 * (lo + hi), step)
            if np.max(np.abs(step - R)) < 1e-15 * np.max(np.abs(R)):
                R = step
                break
            R = step
        return R

    def fmap(s):
        omega = base.map(s)
        return radius(omega)[:, None] * omega

    def jac(s):
        omega = base.map(s)
        domega = base.jacobian(s)
        R = radius(omega)
        _, dv, jet = _drho_dR(omega, R)
        # d/ds rho(R omega) = 0  =>  dR = -2 Re(rho_z . R domega) / dv
        num = 2 * np.real(np.einsum("nj,nji->ni", jet.d, R[:, None, None] * domega))
        dR = -num / dv[:, None]
        return dR[:, None, :] * omega[:, :, None] + R[:, None, None] * domega

    return Chart(2 * n + 1, fmap, jac, base.domain, base.default_resolution)
