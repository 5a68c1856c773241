"""The acceptance suite: one function per criterion, each returning a Criterion."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import catalog
from .criticality import search_certificate
from .deformation import continuity_bound_check, eigen_branches, make_path, verify_slopes
from .functions import FunctionRep
from .geometry import levi_data
from .kohn import PseudohermitianStructure, conformal_apply, d0_distance, rescaled_box
from .spectral import assemble, kernel_angle, maxmini_quotient, residual_check, solve_spectrum, spectrum
from .spectral import monomial_exponents


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} [{self.number}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def random_real_function(dim: int, degree: int, rng, scale: float = 1.0, mean_free_const: bool = True) -> FunctionRep:
    """Real part of a random complex combination of monomials z^a zbar^b with 1 <= |a|+|b| <= degree."""
    out = FunctionRep(dim)
    for a in monomial_exponents(dim, degree):
        for b in monomial_exponents(dim, degree):
            if 0 < sum(a) + sum(b) <= degree:
                c = complex(rng.standard_normal(), rng.standard_normal())
                out = out + FunctionRep.monomial(a, b, c)
    return (out.real * scale) if mean_free_const else out.real * scale + float(rng.standard_normal())


def random_function(dim: int, degree: int, rng) -> FunctionRep:
    out = FunctionRep(dim)
    for a in monomial_exponents(dim, degree):
        for b in monomial_exponents(dim, degree):
            if sum(a) + sum(b) <= degree:
                out = out + FunctionRep.monomial(a, b, complex(rng.standard_normal(), rng.standard_normal()))
    return out


def random_sphere_points(n: int, count: int, rng) -> np.ndarray:
    z = rng.standard_normal((count, n + 1)) + 1j * rng.standard_normal((count, n + 1))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def scaled_to_sup(f: FunctionRep, rule, target: float) -> FunctionRep:
    s = float(np.max(np.abs(f(rule.nodes))))
    return f * (target / s)


def _timed(number, name, fn) -> Criterion:
    t0 = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # reported as a failure line, never swallowed silently
        passed, detail = False, f"error: {type(exc).__name__}: {exc}"
    return Criterion(number, name, bool(passed), detail, time.perf_counter() - t0)


def _clusters_match(res, expected: dict, rel: float):
    got = [(c.value, c.multiplicity) for c in res.clusters]
    exp = list(expected.items())
    if len(got) != len(exp):
        return False, float("inf"), got
    err = max(abs(g[0] - e[0]) / e[0] for g, e in zip(got, exp))
    mult_ok = all(g[1] == e[1] for g, e in zip(got, exp))
    return mult_ok and err < rel, err, got


def c1_sphere_spectrum():
    t0 = time.perf_counter()
    entry = catalog.sphere(1)
    st, basis = entry.setup(3, 3)
    res, _ = spectrum(st, basis)
    expected = catalog.sphere_spectrum(1, 3, 3)
    ok, err, got = _clusters_match(res, expected, 1e-8)
    # each eigenvalue individually
    ind = max(abs(l - c.value) / c.value for c in res.clusters for l in res.eigenvalues[list(c.members)])
    ok = ok and ind < 1e-8 and res.kernel_dim == catalog.sphere_kernel_dim(1, 3)
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 30
    return ok, f"clusters {got}, max rel err {max(err, ind):.2e}, kernel {res.kernel_dim}, {elapsed:.1f}s < 30s"


def c2_first_eigenvalue():
    t0 = time.perf_counter()
    parts, ok = [], True
    for n in (1, 2):
        st, basis = catalog.sphere(n).setup(2, 2)
        res, _ = spectrum(st, basis)
        c = res.clusters[0]
        err = max(abs(res.eigenvalues[list(c.members)] - n)) / n
        good = c.multiplicity == n + 1 and err < 1e-8
        ok &= good
        parts.append(f"n={n}: lambda_1={c.value:.12g} x{c.multiplicity} (rel err {err:.1e})")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 60
    return ok, "; ".join(parts) + f", {elapsed:.1f}s < 60s"


def c3_reinhardt():
    t0 = time.perf_counter()
    parts, ok = [], True
    for r in (1.0, 2.0):
        entry = catalog.reinhardt(1, r)
        st, basis = entry.setup(1, 1)
        res, _ = spectrum(st, basis)
        target = 1 / (2 * r * r)
        near = [c for c in res.clusters if abs(c.value - target) < 1e-3 * target]
        if not near:
            ok = False
            parts.append(f"r={r:g}: no cluster near {target}")
            continue
        c = near[0]
        resid = max(residual_check(st, basis, res, m + 1) for m in c.members)
        good = c.multiplicity >= 2 and resid < 1e-3
        ok &= good
        parts.append(f"r={r:g}: lambda={c.value:.10g} x{c.multiplicity}, residual {resid:.1e}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 300
    return ok, "; ".join(parts) + f", {elapsed:.1f}s < 300s"


def c4_conformal_law(seed: int = 4):
    rng = np.random.default_rng(seed)
    entry = catalog.sphere(1)
    rule = entry.rule(1, 1)
    worst = 0.0
    for _ in range(10):
        u = random_real_function(2, 3, rng, scale=0.3)
        f = random_function(2, 3, rng)
        pts = random_sphere_points(1, 200, rng)
        st = PseudohermitianStructure(entry.surface, u, rule)
        a = conformal_apply(st, f, pts)
        b = rescaled_box(st, f, pts)
        scale = np.maximum(1.0, np.abs(a))
        worst = max(worst, float(np.max(np.abs(a - b) / scale)))
    return worst < 1e-8, f"max scaled residual vs rescaled defining function {worst:.2e} < 1e-8"


def c5_continuity(seed: int = 5):
    rng = np.random.default_rng(seed)
    entry = catalog.deformed_sphere(1, FunctionRep.constant(2, 0.0))
    st, basis = entry.setup(2, 2)
    worst = np.inf
    for _ in range(10):
        u = scaled_to_sup(random_real_function(2, 2, rng), st.rule, 0.2 * rng.uniform(0.3, 1.0))
        rep = continuity_bound_check(st, u, basis, range(1, 9))
        m = min(min(r["lower_margin"], r["upper_margin"]) for r in rep.rows)
        worst = min(worst, m)
        if not rep.passed:
            return False, f"violation with delta={rep.delta:.3f}, margin {m:.2e}"
    return worst >= -1e-9, f"min margin {worst:.3e} over 10 deformations, k<=8"


def c6_derivative(seed: int = 6, h: float = 1e-3):
    rng = np.random.default_rng(seed)
    entry = catalog.deformed_sphere(1, FunctionRep.constant(2, 0.0))
    st, basis = entry.setup(2, 2)
    tol = 10 * h
    worst, ok = 0.0, True
    for _ in range(5):
        f = random_real_function(2, 2, rng, scale=0.5)
        path = make_path(st, f, normalize=True)
        branches = eigen_branches(path, range(1, 9), basis, h)
        for br in branches:
            rep = verify_slopes(path, br.k, basis, h, tol=tol, branch=br)
            dist = max(min(abs(rep.qf_eigenvalues - rep.left_slope)), min(abs(rep.qf_eigenvalues - rep.right_slope)))
            if br.k == 1:
                dist = max(abs(rep.left_slope - rep.qf_eigenvalues.max()), abs(rep.right_slope - rep.qf_eigenvalues.min()))
            worst = max(worst, dist)
            ok &= rep.passed
    return ok and worst < tol, f"max slope mismatch {worst:.2e} < 10h = {tol:g} (k=1 max/min, k<=8 first/last ordering and membership)"


def c7_certificates():
    parts, ok = [], True
    st, basis = catalog.sphere(1).setup(2, 2)
    res, _ = spectrum(st, basis)
    for c in res.clusters[:2]:
        cert = search_certificate(st, basis, res, c, tol=1e-8)
        ok &= cert.verdict == "certified"
        parts.append(f"S3 lambda={c.value:g}: {cert.verdict} var {cert.variance:.1e}")
    entry = catalog.reinhardt(1, 1.0)
    st, basis = entry.setup(1, 1)
    res, _ = spectrum(st, basis)
    c = [c for c in res.clusters if abs(c.value - 0.5) < 1e-3][0]
    cert = search_certificate(st, basis, res, c, tol=1e-4)
    ok &= cert.verdict == "certified"
    parts.append(f"Reinhardt lambda=0.5: {cert.verdict} var {cert.variance:.1e}")
    return ok, "; ".join(parts)


def c8_semicontinuity(seed: int = 8):
    rng = np.random.default_rng(seed)
    entry = catalog.deformed_sphere(1, FunctionRep.constant(2, 0.0))
    st, basis = entry.setup(2, 2)
    r0, _ = spectrum(st, basis)
    m0 = r0.multiplicities()[:8]
    worst_d0 = 0.0
    for _ in range(20):
        u = random_real_function(2, 2, rng)
        d = d0_distance(st.with_u(u), st)
        u = u * (0.049 * rng.uniform(0.2, 1.0) / d)
        hat = st.with_u(u)
        worst_d0 = max(worst_d0, d0_distance(hat, st))
        r1, _ = spectrum(hat, basis)
        m1 = r1.multiplicities()[:8]
        if any(a > b for a, b in zip(m1, m0)):
            return False, f"multiplicity increased: {m1} vs {m0}"
    return worst_d0 < 0.05, f"m_k never increased (k<=8), max d0 {worst_d0:.3f} < 0.05"


def c9_maxmini(seed: int = 9):
    rng = np.random.default_rng(seed)
    st, basis = catalog.sphere(1).setup(2, 2)
    mats = assemble(st, basis)
    res = solve_spectrum(mats)
    m = len(basis)
    worst_low, worst_eq = np.inf, 0.0
    for k in range(1, 5):
        lam = res.eigenvalues[k - 1]
        eq = maxmini_quotient(mats, res.coeffs[:, :k], k, res)
        worst_eq = max(worst_eq, abs(eq - lam) / lam)
        for _ in range(50):
            V = rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))
            q = maxmini_quotient(mats, V, k, res)
            worst_low = min(worst_low, q - lam)
    ok = worst_low >= -1e-8 and worst_eq < 1e-6
    return ok, f"min(Lambda - lambda_k) {worst_low:.3e} >= -1e-8; eigenvector subspaces rel err {worst_eq:.1e}"


def c10_weak_strong():
    parts, ok = [], True
    for entry, (P, Q) in ((catalog.sphere(1), (3, 3)), (catalog.reinhardt(1, 1.0), (1, 1))):
        st, basis = entry.setup(P, Q)
        mats = assemble(st, basis)
        res = solve_spectrum(mats)
        rel = float(np.max(np.abs(mats.strong - mats.dirichlet)) / np.max(np.abs(mats.dirichlet)))
        thresh = res.zero_tol * float(res.eigenvalues[-1])
        holo = [i for i, bd in enumerate(basis.bidegrees) if bd[1] == 0 and i < len(basis)
                and basis.labels[i].find("zb") < 0 and not basis.labels[i].startswith("extra")]
        q = max(float((mats.dirichlet[i, i] / mats.mass[i, i]).real) for i in holo)
        good = rel < 1e-6 and q < thresh
        ok &= good
        parts.append(f"{entry.id}: Gram rel diff {rel:.1e}, max holomorphic quotient {q:.1e} < {thresh:.1e}")
    return ok, "; ".join(parts)


CRITERIA: List[tuple] = [
    (1, "sphere spectrum q(p+n) on S3, P=Q=3", c1_sphere_spectrum),
    (2, "first eigenvalue lambda_1 = n, n=1,2", c2_first_eigenvalue),
    (3, "Reinhardt eigenvalue n/(2r^2), r=1,2", c3_reinhardt),
    (4, "conformal transformation law", c4_conformal_law),
    (5, "continuity envelope", c5_continuity),
    (6, "one-sided derivatives vs Q_f", c6_derivative),
    (7, "criticality certificates", c7_certificates),
    (8, "multiplicity semicontinuity", c8_semicontinuity),
    (9, "max-mini principle", c9_maxmini),
    (10, "weak/strong consistency and CR kernel", c10_weak_strong),
]


def run_criterion(number: int) -> Criterion:
    for num, name, fn in CRITERIA:
        if num == number:
            return _timed(num, name, fn)
    raise KeyError(number)


def run_all(numbers=None) -> List[Criterion]:
    return [run_criterion(num) for num, _, _ in CRITERIA if numbers is None or num in numbers]
