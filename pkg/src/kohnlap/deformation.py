"""Conformal deformations theta_t = e^{u_t} theta, eigenvalue branches and Q_f.

Branches are sampled on a symmetric stencil t in {0, +-h/2, +-h, +-2h} and
one-sided slopes use the three-point formula at h and h/2 followed by
Richardson extrapolation.  On a computed cluster E_k with B-orthonormal
basis psi_a, the first-variation form is the Hermitian matrix

    Q[a, b] = Q_f(psi_b, psi_a) = -int f L(psi_b, psi_a) dvol_theta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import BranchMatchFailure, NonRealDeformation
from .functions import FunctionRep, Jet, require_real
from .geometry import holo_pairing, mixed_pairing, pairing, sup_norm, sup_tangential_norm
from .kohn import PseudohermitianStructure, conformal_apply, box_from_levi
from .spectral import (
    CLUSTER_TOL,
    ZERO_TOL,
    Cluster,
    SpectralBasis,
    SpectrumResult,
    _chunks,
    assemble,
    evaluate_basis,
    solve_spectrum,
)

OVERLAP_MIN = 0.5


@dataclass(frozen=True)
class DeformationPath:
    """u_t = sum_m t^m terms[m-1], optionally rescaled to keep the volume fixed."""

    base: PseudohermitianStructure
    terms: Tuple[FunctionRep, ...]
    volume_normalized: bool = False

    def __post_init__(self):
        for f in self.terms:
            require_real(f, "deformation coefficient")

    @property
    def n(self):
        return self.base.n

    def raw_u(self, t: float) -> FunctionRep:
        out = FunctionRep.constant(self.base.surface.dim, 0.0)
        for m, f in enumerate(self.terms, start=1):
            out = out + (t**m) * f
        return out

    def normalizing_constant(self, t: float) -> float:
        """-(1/(n+1)) log(vol(e^{u_t} theta) / vol(theta)); zero without normalization."""
        if not self.volume_normalized or t == 0:
            return 0.0
        w = self.base.volume_weights()
        ut = self.raw_u(t)(self.base.rule.nodes).real
        ratio = np.sum(w * np.exp((self.n + 1) * ut)) / np.sum(w)
        return -math.log(ratio) / (self.n + 1)

    def u(self, t: float) -> FunctionRep:
        """Conformal factor of theta(t) relative to the base structure."""
        return self.raw_u(t) + self.normalizing_constant(t)

    def structure(self, t: float) -> PseudohermitianStructure:
        return self.base.with_u(self.base.u + self.u(t))

    def first_derivative(self) -> FunctionRep:
        """d/dt u_t at 0: the first term, minus its theta-mean when normalized."""
        f = self.terms[0] if self.terms else FunctionRep.constant(self.base.surface.dim, 0.0)
        if self.volume_normalized:
            w = self.base.volume_weights()
            mean = float(np.sum(w * f(self.base.rule.nodes).real) / np.sum(w))
            f = f - mean
        return f


def make_path(base: PseudohermitianStructure, f: FunctionRep, normalize: bool = False) -> DeformationPath:
    require_real(f, "deformation direction")
    return DeformationPath(base, (f,), bool(normalize))


@dataclass(frozen=True)
class EigenBranch:
    k: int  # 1-based eigenvalue index at t = 0
    samples: Tuple[Tuple[float, float], ...]
    left_slope: float
    right_slope: float
    left_err: float
    right_err: float
    envelope_ok: bool = True


@dataclass(frozen=True)
class HermitianForm:
    matrix: np.ndarray
    basis_ref: Tuple[str, ...] = ()

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def hermitian_defect(self) -> float:
        M = self.matrix
        return float(np.max(np.abs(M - M.conj().T), initial=0.0))


def stencil(h: float) -> Tuple[float, ...]:
    return (-2 * h, -h, -h / 2, 0.0, h / 2, h, 2 * h)


def one_sided_slope(l0: float, l_half: float, l_h: float, l_2h: float, h: float) -> Tuple[float, float]:
    """Richardson-extrapolated forward slope and its error estimate.

    D(h) = (-3 l0 + 4 l_h - l_2h) / (2h) has O(h^2) error, so
    (4 D(h/2) - D(h)) / 3 removes the leading term.
    """
    d_h = (-3 * l0 + 4 * l_h - l_2h) / (2 * h)
    d_half = (-3 * l0 + 4 * l_half - l_h) / h
    rich = (4 * d_half - d_h) / 3
    return rich, abs(d_half - d_h) / 3


def envelope(lam: float, n: int, delta: float, delta_p: float) -> Tuple[float, float]:
    """Lower and upper bounds for lambda_k(e^u theta) given sup|u| and sup|dbar_b u|_theta."""
    s = math.sqrt(max(lam, 0.0))
    lo = max(math.exp(-(n - 0.5) * delta) * s - n * delta_p * math.exp(n * delta), 0.0)
    hi = math.exp((n - 0.5) * delta) * s + n * delta_p * math.exp((n - 0.5) * delta)
    return lo * lo, hi * hi


def relative_d0(base: PseudohermitianStructure, u: FunctionRep) -> Tuple[float, float]:
    """(sup|u|, sup|dbar_b u|_theta) with theta the base structure."""
    scale = base.conformal_weight(-1.0)
    return sup_norm(u, base.rule), sup_tangential_norm(u, base.rule, scale=scale)


def _match(prev_vecs, cur_vecs, B, prev_vals, cur_vals, cluster_tol):
    """Permutation of the current eigenvectors that best continues the previous ones."""
    O = np.abs(prev_vecs.conj().T @ B @ cur_vecs) ** 2
    rows, cols = linear_sum_assignment(-O)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    for i in range(len(perm)):
        if O[i, perm[i]] >= OVERLAP_MIN:
            continue
        # inside a near-degenerate group eigenvectors are arbitrary, so only
        # the overlap with the whole group has to be decisive
        scale = max(1.0, abs(prev_vals[i]))
        group = np.abs(cur_vals - cur_vals[perm[i]]) < max(cluster_tol, 1e-3) * scale
        if np.sum(O[i, group]) >= OVERLAP_MIN:
            continue
        raise BranchMatchFailure(f"ambiguous eigenvector overlap {O[i, perm[i]]:.3f} for branch {i + 1}")
    if len(set(perm.tolist())) != len(perm):
        raise BranchMatchFailure("branch assignment is not one-to-one")
    return perm


def eigen_branches(
    path: DeformationPath,
    k_range: Sequence[int],
    basis: SpectralBasis,
    h: float = 1e-3,
    t_grid: Sequence[float] = (),
    zero_tol: float = ZERO_TOL,
    cluster_tol: float = CLUSTER_TOL,
) -> List[EigenBranch]:
    """Track eigenvalue branches through t = 0 and estimate one-sided slopes.

    Samples on the Richardson stencil are always computed; extra ``t_grid``
    points are tracked outward from the stencil for the branch tables.
    """
    grid = sorted(set(stencil(h)) | set(float(t) for t in t_grid))
    if any(abs(t + s) > 1e-15 for t, s in zip(grid, grid[::-1])):
        raise ValueError("t grid must be symmetric around 0")
    kmax = max(k_range)
    spectra: Dict[float, SpectrumResult] = {}
    masses: Dict[float, np.ndarray] = {}
    for t in grid:
        mats = assemble(path.structure(t), basis, with_box=False)
        spectra[t] = solve_spectrum(mats, zero_tol, cluster_tol)
        masses[t] = mats.mass
        if len(spectra[t].eigenvalues) < kmax:
            raise BranchMatchFailure(f"only {len(spectra[t].eigenvalues)} eigenvalues at t={t}")
    # order[t][i] = column of spectra[t] carrying branch i
    width = min(len(s.eigenvalues) for s in spectra.values())
    order = {0.0: np.arange(width)}
    for side in (1, -1):
        ts = [t for t in grid if side * t > 0]
        ts.sort(key=abs)
        prev = 0.0
        for t in ts:
            s_prev, s_cur = spectra[prev], spectra[t]
            if prev == 0.0:
                # degenerate clusters at t = 0 split: continue by sorted order
                order[t] = np.arange(width)
            else:
                pv = s_prev.coeffs[:, order[prev]][:, :width]
                perm = _match(pv, s_cur.coeffs[:, :width], masses[t],
                              s_prev.eigenvalues[order[prev]][:width], s_cur.eigenvalues[:width], cluster_tol)
                order[t] = perm
            prev = t
    lam = {t: spectra[t].eigenvalues[order[t]] for t in grid}
    branches = []
    for k in k_range:
        i = k - 1
        l0 = lam[0.0][i]
        right, rerr = one_sided_slope(l0, lam[h / 2][i], lam[h][i], lam[2 * h][i], h)
        fwd_left, lerr = one_sided_slope(l0, lam[-h / 2][i], lam[-h][i], lam[-2 * h][i], h)
        ok = True
        for t in grid:
            d, dp = relative_d0(path.base, path.u(t))
            lo, hi = envelope(spectra[0.0].eigenvalues[i], path.n, d, dp)
            sorted_val = spectra[t].eigenvalues[i]
            ok &= lo - 1e-9 <= sorted_val <= hi + 1e-9
        branches.append(EigenBranch(k, tuple((t, float(lam[t][i])) for t in grid),
                                    float(-fwd_left), float(right), float(lerr), float(rerr), bool(ok)))
    return branches


def _cluster_values(structure: PseudohermitianStructure, basis: SpectralBasis, coeffs: np.ndarray, g=None):
    """M_val[a, b] = int g psi_b conj(psi_a) dvol and M_grad[a, b] = int g e^{-u} <dbar psi_b, dbar psi_a> dvol."""
    rule = structure.rule
    n = structure.n
    k = coeffs.shape[1]
    Mv = np.zeros((k, k), dtype=complex)
    Mg = np.zeros((k, k), dtype=complex)
    for sl in _chunks(len(rule)):
        jets, levi, uj, E, _ = evaluate_basis(structure, basis, sl)
        gv = np.ones(E.shape[0]) if g is None else g(rule.nodes[sl]).real
        wv = rule.weights[sl] * np.exp((n + 1) * uj.val.real) * gv
        psi = E @ coeffs
        Mv += psi.conj().T @ (wv[:, None] * psi)
        G = np.einsum("mnj,ma->naj", jets.dbar, coeffs)  # (N, k, d)
        TG = np.einsum("njl,naj->nal", levi.tangential, G)
        wg = wv * np.exp(-uj.val.real)
        Mg += np.einsum("n,nal,nbl->ab", wg, np.conj(G), TG)
    return Mv, Mg


def qf_matrix(structure: PseudohermitianStructure, f: FunctionRep, basis: SpectralBasis,
              coeffs: np.ndarray, lam: float) -> HermitianForm:
    """Q_f on the span of the B-orthonormal coefficient columns (an eigenspace of ``lam``)."""
    n = structure.n
    Mv, Mg = _cluster_values(structure, basis, coeffs, f)
    Q = -((n + 1) * lam * Mv - n * Mg)
    return HermitianForm(Q, tuple(f"psi{a}" for a in range(coeffs.shape[1])))


def qf_on_cluster(structure, f, basis, result: SpectrumResult, cluster: Cluster) -> HermitianForm:
    return qf_matrix(structure, f, basis, result.cluster_coeffs(cluster), cluster.value)


def qtilde_matrix(structure, f, basis, result: SpectrumResult, ck: Cluster, ck1: Cluster) -> HermitianForm:
    """Q~_f on E_k (x) E_{k+1}: lambda_{k+1} Q^(k) (x) I - lambda_k I (x) Q^(k+1)."""
    Qk = qf_on_cluster(structure, f, basis, result, ck).matrix
    Qk1 = qf_on_cluster(structure, f, basis, result, ck1).matrix
    I1, I2 = np.eye(Qk.shape[0]), np.eye(Qk1.shape[0])
    M = ck1.value * np.kron(Qk, I2) - ck.value * np.kron(I1, Qk1)
    refs = tuple(f"v{a}*w{b}" for a in range(Qk.shape[0]) for b in range(Qk1.shape[0]))
    return HermitianForm(M, refs)


@dataclass
class SlopeReport:
    k: int
    left_slope: float
    right_slope: float
    slope_err: float
    qf_eigenvalues: np.ndarray
    clause: str  # "first", "last", "first+last" or "interior" (position of k in its cluster)
    tolerance: float
    membership_ok: bool
    ordering_ok: bool
    ordering_matched: str  # which (left, right) orientation matched
    envelope_ok: bool

    @property
    def passed(self):
        return self.membership_ok and self.ordering_ok and self.envelope_ok

    def as_dict(self):
        return {
            "k": self.k,
            "left_slope": self.left_slope,
            "right_slope": self.right_slope,
            "slope_err": self.slope_err,
            "qf_eigenvalues": [float(x) for x in self.qf_eigenvalues],
            "clause": self.clause,
            "tolerance": self.tolerance,
            "membership_ok": self.membership_ok,
            "ordering_ok": self.ordering_ok,
            "ordering_matched": self.ordering_matched,
            "envelope_ok": self.envelope_ok,
            "passed": self.passed,
        }


def verify_slopes(path: DeformationPath, k: int, basis: SpectralBasis, h: float = 1e-3,
                 tol: float | None = None, branch: EigenBranch | None = None,
                 zero_tol=ZERO_TOL, cluster_tol=CLUSTER_TOL) -> SlopeReport:
    """Compare one-sided slopes of lambda_k(t) with the spectrum of Q_f on E_k.

    When k is first in its cluster (k = 1 or lambda_{k-1} < lambda_k) the
    prediction is left = max, right = min; when k is last in its cluster
    (lambda_k < lambda_{k+1}) it is left = min, right = max.  Inside a cluster only membership in
    the Q_f spectrum is checked.
    """
    tol = 10 * h if tol is None else tol
    base = path.base
    result = solve_spectrum(assemble(base, basis, with_box=False), zero_tol, cluster_tol)
    cl = result.cluster_of(k)
    f = path.first_derivative()
    ev = qf_on_cluster(base, f, basis, result, cl).eigenvalues()
    if branch is None:
        branch = eigen_branches(path, [k], basis, h, zero_tol=zero_tol, cluster_tol=cluster_tol)[0]
    L, R = branch.left_slope, branch.right_slope
    err = max(branch.left_err, branch.right_err)
    member = min(abs(ev - L)) <= tol and min(abs(ev - R)) <= tol
    first, last = k - 1 == cl.members[0], k - 1 == cl.members[-1]
    lo, hi = ev.min(), ev.max()
    max_min = abs(L - hi) <= tol and abs(R - lo) <= tol
    min_max = abs(L - lo) <= tol and abs(R - hi) <= tol
    if first and last:
        clause, ordering = "first+last", max_min and min_max
    elif first:
        clause, ordering = "first", max_min
    elif last:
        clause, ordering = "last", min_max
    else:
        clause, ordering = "interior", True
    matched = "+".join(name for name, ok in (("max-min", max_min), ("min-max", min_max)) if ok) or "none"
    return SlopeReport(k, L, R, err, ev, clause, tol, bool(member), bool(ordering), matched, branch.envelope_ok)


@dataclass
class ContinuityReport:
    delta: float
    delta_prime: float
    rows: List[dict] = field(default_factory=list)

    @property
    def passed(self):
        return all(r["lower_ok"] and r["upper_ok"] for r in self.rows)


def continuity_bound_check(theta: PseudohermitianStructure, u: FunctionRep, basis: SpectralBasis,
                           k_range: Sequence[int], slack: float = 1e-9,
                           zero_tol=ZERO_TOL, cluster_tol=CLUSTER_TOL) -> ContinuityReport:
    """Check both sides of the continuity envelope for theta_hat = e^u theta."""
    require_real(u, "conformal factor")
    hat = theta.with_u(theta.u + u)
    s0 = solve_spectrum(assemble(theta, basis, with_box=False), zero_tol, cluster_tol)
    s1 = solve_spectrum(assemble(hat, basis, with_box=False), zero_tol, cluster_tol)
    d, dp = relative_d0(theta, u)
    n = theta.n
    rep = ContinuityReport(d, dp)
    for k in k_range:
        lam, lam_hat = float(s0.eigenvalues[k - 1]), float(s1.eigenvalues[k - 1])
        s, sh = math.sqrt(lam), math.sqrt(lam_hat)
        lower = max(math.exp(-(n - 0.5) * d) * s - n * dp * math.exp(n * d), 0.0)
        upper = math.exp((n - 0.5) * d) * s + n * dp * math.exp((n - 0.5) * d)
        rep.rows.append({
            "k": k, "lambda": lam, "lambda_hat": lam_hat,
            "lower_margin": sh - lower, "upper_margin": upper - sh,
            "lower_ok": sh - lower >= -slack, "upper_ok": upper - sh >= -slack,
        })
    return rep


def pointwise_conjugated(structure: PseudohermitianStructure, u: Jet, phi: Jet, levi, paper_form: bool = False):
    """e^{u} P phi for the conjugated operator P = e^{(n+1)u} box_theta e^{-(n+1)u}.

    ``structure`` supplies the reference theta_0 and ``u`` is the conformal
    factor of theta relative to it.  The default coefficient of |d_b u|^2 is
    the one obtained from the product rule; ``paper_form`` switches to the
    alternative coefficient -(n-1) for comparison.
    """
    n = structure.n
    box_phi = box_from_levi(levi, phi, n)
    box_u = box_from_levi(levi, u, n)
    grad_sq = np.real(holo_pairing(levi, u, u))
    coeff = -(n - 1) if paper_form else 1.0
    return (box_phi + mixed_pairing(levi, u, phi) + (n + 1) * mixed_pairing(levi, phi, u)
            - (n + 1) * (box_u + coeff * grad_sq) * phi.val)


def conjugated_apply(path: DeformationPath, t: float, phi, p=None, paper_form: bool = False) -> np.ndarray:
    """P_t phi at ``p`` (default: nodes), for u_t relative to the path's base structure.

    Requires a base structure with u = 0 so that box_b is the ambient operator.
    """
    base = path.base
    if not base.u.is_zero() and not np.allclose(base.u(base.rule.nodes), 0):
        raise ValueError("conjugated_apply needs a base structure with u = 0")
    if p is None:
        pts, levi = base.rule.nodes, base.rule.levi
    else:
        from .geometry import levi_data

        pts = np.atleast_2d(np.asarray(p, dtype=complex))
        levi = levi_data(base.surface, pts)
    uj = path.u(t).jet(pts)
    pj = phi if isinstance(phi, Jet) else phi.jet(pts)
    return np.exp(-uj.val.real) * pointwise_conjugated(base, uj, pj, levi, paper_form)


def conjugated_spectrum(path: DeformationPath, t: float, basis: SpectralBasis, paper_form: bool = False,
                        zero_tol: float = ZERO_TOL) -> np.ndarray:
    """Positive eigenvalues of the Petrov-Galerkin discretization of P_t.

    Trial functions e^{(n+1)u_t} e_j, test functions e_i, theta_0 weights;
    mass is int conj(e_i) e^{(n+1)u_t} e_j dvol_0.
    """
    import scipy.linalg as sla

    base = path.base
    rule = base.rule
    n = base.n
    m = len(basis)
    M = np.zeros((m, m), dtype=complex)
    Bm = np.zeros((m, m), dtype=complex)
    ut = path.u(t)
    for sl in _chunks(len(rule)):
        jets, levi, _, E, _ = evaluate_basis(base, basis, sl)
        uj = ut.jet(rule.nodes[sl])
        a = (uj * (n + 1.0)).exp()
        w = rule.weights[sl]
        cols = []
        for j in range(m):
            trial = a * jets[j]
            cols.append(np.exp(-uj.val.real) * pointwise_conjugated(base, uj, trial, levi, paper_form))
        PX = np.stack(cols, axis=1)
        M += E.conj().T @ (w[:, None] * PX)
        Bm += E.conj().T @ ((w * a.val.real)[:, None] * E)
    vals = sla.eig(M, Bm, right=False)
    vals = np.sort(vals.real)
    return vals[vals > zero_tol * max(vals.max(), 1.0)]
