"""Galerkin discretization of the Kohn Laplacian and its generalized eigenproblem.

Trial spaces are spanned by restrictions of monomials z^a zbar^b (plus
optional extras).  Restriction identities such as |z|^2 = 1 make the raw
family dependent on M; they are removed by an ordered Cholesky sweep of the
mass matrix that keeps the first member of every dependent chain, so the
constant and low-degree monomials always survive.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateBasis, IndefiniteMass, KernelOverlap
from .functions import FunctionRep, Jet, JetStack, to_string
from .geometry import DefiningSurface, QuadratureRule, build_quadrature, mixed_pairing
from .kohn import PseudohermitianStructure, box_from_levi

RANK_DROP_TOL = 1e-10
ZERO_TOL = 1e-6
CLUSTER_TOL = 1e-4
CHUNK = 4096


@dataclass(frozen=True)
class SpectralBasis:
    functions: Tuple[FunctionRep, ...]
    bidegrees: Tuple[Tuple[int, int], ...]
    labels: Tuple[str, ...] = ()
    dropped: Tuple[str, ...] = ()

    def __len__(self):
        return len(self.functions)

    def combination(self, coeffs) -> FunctionRep:
        """The FunctionRep sum_i coeffs[i] e_i."""
        out = FunctionRep(self.functions[0].dim)
        for c, f in zip(np.asarray(coeffs).ravel(), self.functions):
            if c != 0:
                out = out + complex(c) * f
        return out


@dataclass(frozen=True)
class GramMatrices:
    mass: np.ndarray  # B[i, j] = <e_j, e_i>
    dirichlet: np.ndarray  # A[i, j] = int <dbar_b e_j, dbar_b e_i>
    box_gram: np.ndarray  # C[i, j] = <box e_j, box e_i>
    strong: np.ndarray  # S[i, j] = <box e_j, e_i>


@dataclass(frozen=True)
class Cluster:
    value: float
    multiplicity: int
    members: Tuple[int, ...]  # 0-based positions in SpectrumResult.eigenvalues


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray  # ascending positive eigenvalues
    coeffs: np.ndarray  # (m, len(eigenvalues)), B-orthonormal columns
    kernel_dim: int
    kernel_coeffs: np.ndarray  # (m, kernel_dim)
    clusters: Tuple[Cluster, ...]
    zero_tol: float
    cluster_tol: float
    kernel_gap: float = field(default=np.nan)  # smallest positive / largest kernel eigenvalue

    def cluster_of(self, k: int) -> Cluster:
        """Cluster containing the 1-based eigenvalue index ``k``."""
        for c in self.clusters:
            if k - 1 in c.members:
                return c
        raise IndexError(f"eigenvalue index {k} not computed")

    def cluster_coeffs(self, cluster: Cluster) -> np.ndarray:
        return self.coeffs[:, list(cluster.members)]

    def multiplicities(self) -> List[int]:
        """m_k for every 1-based index k."""
        out = []
        for c in self.clusters:
            out.extend([c.multiplicity] * c.multiplicity)
        return out


def monomial_exponents(dim: int, degree: int):
    """All multi-indices in dim variables with total degree <= degree, graded."""
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), total):
            a = [0] * dim
            for j in combo:
                a[j] += 1
            out.append(tuple(a))
    return out


def _label(a, b):
    parts = []
    for j, e in enumerate(a):
        if e:
            parts.append(f"z{j+1}" + (f"**{e}" if e > 1 else ""))
    for j, e in enumerate(b):
        if e:
            parts.append(f"zb{j+1}" + (f"**{e}" if e > 1 else ""))
    return "*".join(parts) or "1"


def raw_monomials(dim: int, P: int, Q: int):
    items = []
    for a in monomial_exponents(dim, P):
        for b in monomial_exponents(dim, Q):
            items.append((sum(a) + sum(b), (sum(a), sum(b)), a, b))
    items.sort(key=lambda t: (t[0], t[1][1], t[1][0]))
    return [(FunctionRep.monomial(a, b), bd, _label(a, b)) for _, bd, a, b in items]


def ordered_rank_filter(B: np.ndarray, tol: float = RANK_DROP_TOL) -> List[int]:
    """Indices kept by a sequential Cholesky sweep of the Hermitian matrix B.

    Column j is dropped when its Schur complement against the kept columns is
    below ``tol * B[j, j]``.
    """
    m = B.shape[0]
    kept: List[int] = []
    L = np.zeros((m, m), dtype=complex)
    for j in range(m):
        if len(kept) == 0:
            v = np.zeros(0, dtype=complex)
        else:
            Lk = L[: len(kept), : len(kept)]
            v = sla.solve_triangular(Lk, B[kept, j], lower=True)
        schur = float(np.real(B[j, j] - np.vdot(v, v)))
        if B[j, j].real <= 0 or schur <= tol * B[j, j].real:
            continue
        r = len(kept)
        L[r, :r] = np.conj(v)
        L[r, r] = np.sqrt(schur)
        kept.append(j)
    return kept


def _mass(funcs, rule: QuadratureRule):
    m = len(funcs)
    B = np.zeros((m, m), dtype=complex)
    for sl in _chunks(len(rule)):
        E = np.stack([f(rule.nodes[sl]) for f in funcs], axis=1)
        B += np.conj(E).T @ (rule.weights[sl, None] * E)
    return 0.5 * (B + B.conj().T)


def build_basis(
    surface: DefiningSurface,
    P: int,
    Q: int,
    extras: Sequence[FunctionRep] = (),
    rule: Optional[QuadratureRule] = None,
    tol: float = RANK_DROP_TOL,
) -> SpectralBasis:
    """Restricted monomials with |a| <= P, |b| <= Q plus ``extras``, rank-filtered on M."""
    if P < 0 or Q < 0:
        raise ValueError("basis degrees must be nonnegative")
    items = raw_monomials(surface.dim, P, Q)
    for f in extras:
        items.append((f, f.bidegree, "extra:" + to_string(f)))
    if rule is None:
        deg = 2 * (P + Q) + 2
        rule = build_quadrature(surface, deg if surface.exact_backend == "sphere" else None)
    funcs = [t[0] for t in items]
    B = _mass(funcs, rule)
    kept = ordered_rank_filter(B, tol)
    if not kept:
        raise DegenerateBasis("rank filtering removed every basis function")
    dropped = tuple(items[i][2] for i in range(len(items)) if i not in set(kept))
    return SpectralBasis(
        tuple(items[i][0] for i in kept),
        tuple(tuple(items[i][1]) for i in kept),
        tuple(items[i][2] for i in kept),
        dropped,
    )


def _chunks(N, size=CHUNK):
    for s in range(0, N, size):
        yield slice(s, min(N, s + size))


def basis_jets(basis: SpectralBasis, nodes) -> JetStack:
    return JetStack.from_functions(basis.functions, nodes)


def _box_stack(structure: PseudohermitianStructure, jets: JetStack, levi, uj: Jet) -> np.ndarray:
    """(N, m) array of box_theta e_j at the chunk nodes."""
    n = structure.n
    second = np.einsum("njk,mnjk->nm", levi.tangential, jets.mixed)
    first = np.einsum("nk,mnk->nm", levi.rho_up, jets.dbar) / levi.grad_norm_sq[:, None]
    box0 = -second + n * first
    mix = np.einsum("njk,mnj,nk->nm", levi.tangential, jets.dbar, uj.d)
    return np.exp(-uj.val.real)[:, None] * (box0 - n * mix)


def _levi_slice(levi, sl):
    from .geometry import LeviData

    return LeviData(*(getattr(levi, f)[sl] for f in
                      ("rho_j", "rho_jkbar", "rho_inv", "rho_up", "grad_norm_sq", "tangential")))


def evaluate_basis(structure: PseudohermitianStructure, basis: SpectralBasis, sl=slice(None)):
    """Values and box_theta values of the basis at (a slice of) the nodes, shape (N, m)."""
    rule = structure.rule
    nodes = rule.nodes[sl]
    jets = basis_jets(basis, nodes)
    levi = _levi_slice(rule.levi, sl)
    uj = structure.u.jet(nodes)
    return jets, levi, uj, jets.val.T, _box_stack(structure, jets, levi, uj)


def assemble(structure: PseudohermitianStructure, basis: SpectralBasis, with_box: bool = True) -> GramMatrices:
    """Mass, Dirichlet, box-Gram and strong matrices for theta = e^u theta_0."""
    rule = structure.rule
    n = structure.n
    m = len(basis)
    B = np.zeros((m, m), dtype=complex)
    A = np.zeros_like(B)
    C = np.zeros_like(B)
    S = np.zeros_like(B)
    for sl in _chunks(len(rule)):
        jets, levi, uj, E, BX = evaluate_basis(structure, basis, sl)
        eu = uj.val.real
        wv = rule.weights[sl] * np.exp((n + 1) * eu)
        wd = rule.weights[sl] * np.exp(n * eu)
        B += np.conj(E).T @ (wv[:, None] * E)
        G = np.transpose(jets.dbar, (1, 0, 2))  # (N, m, d)
        TG = np.einsum("nab,nja->njb", levi.tangential, G)
        A += _herm_pair(G, TG, wd)
        if with_box:
            C += np.conj(BX).T @ (wv[:, None] * BX)
            S += np.conj(E).T @ (wv[:, None] * BX)
    herm = lambda M: 0.5 * (M + M.conj().T)
    return GramMatrices(herm(B), herm(A), herm(C), S)


def _herm_pair(G, TG, w):
    """sum_n w_n sum_b TG[n, j, b] conj(G[n, i, b]) as an (m, m) matrix [i, j]."""
    N, m, d = G.shape
    X = np.transpose(np.conj(G), (0, 2, 1)).reshape(N * d, m)  # rows (n, b), cols i
    Y = (w[:, None, None] * np.transpose(TG, (0, 2, 1))).reshape(N * d, m)
    return X.T @ Y


def solve_spectrum(mats: GramMatrices, zero_tol: float = ZERO_TOL, cluster_tol: float = CLUSTER_TOL) -> SpectrumResult:
    """Solve A v = lambda B v, split off the kernel and cluster multiplicities."""
    A, B = mats.dirichlet, mats.mass
    try:
        np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        raise IndefiniteMass("mass matrix is not positive definite") from None
    w, V = sla.eigh(A, B)
    lam_max = max(float(w[-1]), 0.0)
    thresh = zero_tol * lam_max if lam_max > 0 else zero_tol
    ker = w < thresh
    kdim = int(np.sum(ker))
    pos = ~ker
    vals, coeffs = w[pos], V[:, pos]
    gap = float(vals[0] / max(w[ker].max(), np.finfo(float).tiny)) if kdim and len(vals) else np.nan
    return SpectrumResult(vals, coeffs, kdim, V[:, ker], cluster_eigenvalues(vals, cluster_tol), zero_tol, cluster_tol, gap)


def cluster_eigenvalues(vals: np.ndarray, cluster_tol: float = CLUSTER_TOL) -> Tuple[Cluster, ...]:
    """Greedy ascending clustering: join while within cluster_tol*max(1, mean) of the mean."""
    clusters = []
    cur: List[int] = []
    for i, v in enumerate(vals):
        if cur:
            mean = float(np.mean(vals[cur + [i]]))
            if all(abs(vals[j] - mean) < cluster_tol * max(1.0, mean) for j in cur + [i]):
                cur.append(i)
                continue
            clusters.append(cur)
        cur = [i]
    if cur:
        clusters.append(cur)
    return tuple(Cluster(float(np.mean(vals[c])), len(c), tuple(c)) for c in clusters)


def spectrum(structure: PseudohermitianStructure, basis: SpectralBasis, zero_tol=ZERO_TOL, cluster_tol=CLUSTER_TOL):
    """Convenience: assemble and solve."""
    mats = assemble(structure, basis, with_box=False)
    return solve_spectrum(mats, zero_tol, cluster_tol), mats


def residual_check(structure: PseudohermitianStructure, basis: SpectralBasis, result: SpectrumResult, k) -> float:
    """||box psi_k - lambda_k psi_k|| / ||psi_k|| with the strong form at the nodes.

    ``k`` is a 1-based eigenvalue index or a coefficient vector paired with
    ``lam`` via ``(coeffs, lam)``.
    """
    if isinstance(k, tuple):
        c, lam = np.asarray(k[0], dtype=complex), float(k[1])
    else:
        c, lam = result.coeffs[:, k - 1], float(result.eigenvalues[k - 1])
    return coefficient_residual(structure, basis, c, lam)


def coefficient_residual(structure, basis, c, lam) -> float:
    rule = structure.rule
    wv = structure.volume_weights()
    num = den = 0.0
    for sl in _chunks(len(rule)):
        _, _, _, E, BX = evaluate_basis(structure, basis, sl)
        f, bf = E @ c, BX @ c
        num += float(np.sum(wv[sl] * np.abs(bf - lam * f) ** 2))
        den += float(np.sum(wv[sl] * np.abs(f) ** 2))
    return float(np.sqrt(num / den))


def b_orthonormalize(V: np.ndarray, B: np.ndarray) -> np.ndarray:
    G = V.conj().T @ B @ V
    G = 0.5 * (G + G.conj().T)
    w, U = np.linalg.eigh(G)
    if w.min() <= 1e-14 * max(w.max(), 1e-300):
        raise KernelOverlap("subspace is rank deficient")
    return V @ U / np.sqrt(w)


def kernel_angle(result: SpectrumResult, mats: GramMatrices, subspace: np.ndarray) -> float:
    """Smallest sine of the B-angle between the subspace and the computed kernel complement test.

    Returns the smallest singular value of the subspace's component
    orthogonal to the kernel; zero means the subspace meets the kernel.
    """
    B = mats.mass
    V = b_orthonormalize(np.atleast_2d(subspace.T).T if subspace.ndim == 1 else subspace, B)
    K = result.kernel_coeffs
    if K.shape[1] == 0:
        return 1.0
    Kperp = V - K @ (K.conj().T @ B @ V)
    G = Kperp.conj().T @ B @ Kperp
    return float(np.sqrt(max(np.linalg.eigvalsh(0.5 * (G + G.conj().T)).min(), 0.0)))


def maxmini_quotient(mats: GramMatrices, subspace: np.ndarray, k: int | None = None,
                     result: SpectrumResult | None = None, angle_tol: float = 1e-8) -> float:
    """sup over the subspace of ||box f||^2 / ||dbar_b f||^2.

    Largest generalized eigenvalue of (V^* C V, V^* A V).  With ``result``
    given, the subspace is first checked against the computed kernel.
    """
    V = subspace[:, None] if subspace.ndim == 1 else subspace
    if k is not None and V.shape[1] != k:
        raise ValueError("subspace dimension does not match k")
    if result is not None and kernel_angle(result, mats, V) < angle_tol:
        raise KernelOverlap("subspace meets the kernel of box_b")
    Cs = V.conj().T @ mats.box_gram @ V
    As = V.conj().T @ mats.dirichlet @ V
    Cs, As = 0.5 * (Cs + Cs.conj().T), 0.5 * (As + As.conj().T)
    try:
        w = sla.eigh(Cs, As, eigvals_only=True)
    except np.linalg.LinAlgError:
        raise KernelOverlap("Dirichlet form is singular on the subspace") from None
    return float(w[-1])
