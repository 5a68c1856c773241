"""Criticality tests and certificates for eigenvalue functionals.

A finite family of eigenfunctions in a cluster E_k corresponds to a
positive semidefinite matrix H on a B-orthonormal cluster basis psi_a via

    sum_j L(psi'_j) = sum_{a,b} H[a, b] L(psi_a, psi_b),

with psi'_j = sum_a F[j, a] psi_a and H[a, b] = sum_j F[j, a] conj(F[j, b]).
Certificates minimize the relative node variance of this function over
H = G^* G with L-BFGS and seeded random restarts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import KindViolation, NotPSD
from .functions import FunctionRep
from .geometry import holo_pairing, pairing
from .kohn import PseudohermitianStructure
from .spectral import (
    Cluster,
    SpectralBasis,
    SpectrumResult,
    _chunks,
    evaluate_basis,
    monomial_exponents,
    ordered_rank_filter,
)

DEFAULT_RESTARTS = 10


@dataclass(frozen=True)
class CriticalityCertificate:
    k: int
    coeff: np.ndarray  # PSD Hermitian H on the cluster basis, trace 1
    constant_value: float
    variance: float  # weighted variance of sum L divided by its squared mean
    verdict: str  # certified | refuted | inconclusive
    tol: float
    seeds: tuple = ()
    restarts: List[float] = field(default_factory=list)

    def family(self) -> np.ndarray:
        return psd_factor(self.coeff)

    def as_dict(self):
        return {
            "k": self.k,
            "verdict": self.verdict,
            "constant_value": self.constant_value,
            "variance": self.variance,
            "tol": self.tol,
            "seeds": list(self.seeds),
            "restart_objectives": list(self.restarts),
            "H_real": self.coeff.real.tolist(),
            "H_imag": self.coeff.imag.tolist(),
        }


def psd_factor(H: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Rows F with H[a, b] = sum_j F[j, a] conj(F[j, b])."""
    w, U = np.linalg.eigh(0.5 * (H + H.conj().T))
    if w.min(initial=0.0) < -tol * max(1.0, abs(w).max(initial=0.0)):
        raise NotPSD(f"matrix has eigenvalue {w.min():.3g}")
    w = np.clip(w, 0.0, None)
    keep = w > tol * max(w.max(initial=0.0), 1e-300)
    return (U[:, keep] * np.sqrt(w[keep])).T


def node_L_tensor(structure: PseudohermitianStructure, basis: SpectralBasis, coeffs: np.ndarray, lam: float):
    """Lt[x, a, b] = L(psi_a, psi_b) at every node, plus the node values psi (N, k)."""
    rule = structure.rule
    n = structure.n
    out, vals = [], []
    for sl in _chunks(len(rule)):
        jets, levi, uj, E, _ = evaluate_basis(structure, basis, sl)
        psi = E @ coeffs
        G = np.einsum("mnj,ma->naj", jets.dbar, coeffs)
        TG = np.einsum("njl,naj->nal", levi.tangential, G)
        grad = np.einsum("nal,nbl->nab", TG, np.conj(G))
        val = psi[:, :, None] * np.conj(psi)[:, None, :]
        out.append((n + 1) * lam * val - n * np.exp(-uj.val.real)[:, None, None] * grad)
        vals.append(psi)
    return np.concatenate(out), np.concatenate(vals)


def sum_L_values(structure, basis, coeffs, lam, H, check_psd: bool = True) -> np.ndarray:
    """x -> sum_{a,b} H[a, b] L(psi_a, psi_b)(x) at all nodes (real)."""
    H = np.asarray(H, dtype=complex)
    if check_psd:
        psd_factor(H)
    Lt, _ = node_L_tensor(structure, basis, coeffs, lam)
    return _apply_H(Lt, H)


def _apply_H(Lt, H):
    v = np.einsum("ab,nab->n", H, Lt)
    return v.real


def constancy_test(values, weights=None, tol: float = 1e-8):
    """(is_constant, mean): max deviation from the weighted mean below tol * max(1, |mean|)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("constancy test needs values")
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)
    mean = float(np.sum(w * v) / np.sum(w))
    dev = float(np.max(np.abs(v - mean)))
    return dev < tol * max(1.0, abs(mean)), mean


def relative_variance(values, weights) -> float:
    mean = np.sum(weights * values) / np.sum(weights)
    var = np.sum(weights * (values - mean) ** 2) / np.sum(weights)
    return float(var / mean**2) if mean != 0 else np.inf


def _unpack(x, k):
    return (x[: k * k] + 1j * x[k * k:]).reshape(k, k)


def _grad_G(G, Gamma):
    # dJ = 2 Re tr(dG Gamma G^*) for H = G^* G and Hermitian Gamma
    X = (Gamma @ G.conj().T).T
    return np.concatenate([2 * X.real.ravel(), -2 * X.imag.ravel()])


def _variance_objective(Lt, w):
    W = np.sum(w)
    LtT = np.transpose(Lt, (0, 2, 1))  # M_x = L_x^T, so v_x = tr(H M_x)

    def fun(x, k):
        G = _unpack(x, k)
        H = G.conj().T @ G
        v = _apply_H(Lt, H)
        m = np.sum(w * v) / W
        var = np.sum(w * (v - m) ** 2) / W
        if m == 0:
            return 1e30, np.zeros_like(x)
        J = var / m**2
        g = 2 * w * (v - m) / W / m**2 - 2 * var / m**3 * w / W
        Gamma = np.einsum("n,nab->ab", g, LtT)
        Gamma = 0.5 * (Gamma + Gamma.conj().T)
        return J, _grad_G(G, Gamma)

    return fun


def search_certificate(structure: PseudohermitianStructure, basis: SpectralBasis, result: SpectrumResult,
                       cluster: Cluster, tol: float = 1e-8, restarts: int = DEFAULT_RESTARTS,
                       seed: int = 0) -> CriticalityCertificate:
    """Search a PSD H on E_k with sum L constant; certified iff relative variance < tol and C > 0."""
    coeffs = result.cluster_coeffs(cluster)
    lam = cluster.value
    Lt, _ = node_L_tensor(structure, basis, coeffs, lam)
    w = structure.volume_weights()
    k = coeffs.shape[1]
    fun = _variance_objective(Lt, w)
    rng = np.random.default_rng(seed)
    best, best_x, history = np.inf, None, []
    for r in range(restarts):
        x0 = rng.standard_normal(2 * k * k)
        res = minimize(fun, x0, args=(k,), jac=True, method="L-BFGS-B",
                       options={"maxiter": 2000, "ftol": 1e-30, "gtol": 1e-16})
        history.append(float(res.fun))
        if res.fun < best:
            best, best_x = float(res.fun), res.x
    G = _unpack(best_x, k)
    H = G.conj().T @ G
    H = H / np.trace(H).real
    v = _apply_H(Lt, H)
    C = float(np.sum(w * v) / np.sum(w))
    var = relative_variance(v, w)
    verdict = "certified" if var < tol and C > 0 else "inconclusive"
    first = cluster.members[0] + 1
    return CriticalityCertificate(first, H, C, var, verdict, tol, (seed, restarts), history)


@dataclass(frozen=True)
class TestFunctionBank:
    functions: tuple
    labels: tuple = ()

    __test__ = False  # not a pytest class

    def __len__(self):
        return len(self.functions)


def build_bank(structure: PseudohermitianStructure, degree: int = 2, tol: float = 1e-10) -> TestFunctionBank:
    """Real and imaginary parts of restricted monomials with |a|, |b| <= degree, mean-subtracted."""
    dim = structure.surface.dim
    w = structure.volume_weights()
    W = np.sum(w)
    cands, labels = [], []
    for a in monomial_exponents(dim, degree):
        for b in monomial_exponents(dim, degree):
            if a == b and sum(a) == 0:
                continue
            mono = FunctionRep.monomial(a, b)
            for part, tag in ((mono.real, "re"), (mono.imag, "im")):
                if part.is_zero():
                    continue
                mean = float(np.sum(w * part(structure.rule.nodes).real) / W)
                cands.append(part - mean)
                labels.append(f"{tag}(z^{a} zb^{b})")
    vals = np.stack([f(structure.rule.nodes).real for f in cands], axis=1)
    B = vals.T @ (w[:, None] * vals)
    kept = ordered_rank_filter(B.astype(complex), tol)
    return TestFunctionBank(tuple(cands[i] for i in kept), tuple(labels[i] for i in kept))


def indefiniteness_sweep(structure, basis, result, cluster, bank: TestFunctionBank, tol: float = 1e-8):
    """Q_f spectra on E_k for every f in the bank; a definite Q_f refutes criticality."""
    from .deformation import qf_on_cluster

    rows = []
    scale = max(cluster.value, 1.0) ** 2
    for f, label in zip(bank.functions, bank.labels or [repr(f) for f in bank.functions]):
        ev = qf_on_cluster(structure, f, basis, result, cluster).eigenvalues()
        lo, hi = float(ev.min()), float(ev.max())
        definite = lo * hi > tol * scale
        rows.append({"f": label, "min": lo, "max": hi, "definite": bool(definite)})
    return {
        "cluster": cluster.value,
        "multiplicity": cluster.multiplicity,
        "rows": rows,
        "refuted": any(r["definite"] for r in rows),
        "note": "a finite bank can refute criticality but cannot prove it",
    }


def _family_data(structure, family: Sequence[FunctionRep]):
    rule = structure.rule
    jets = [f.jet(rule.nodes) for f in family]
    return rule.levi, jets


def square_sum_check(structure: PseudohermitianStructure, family: Sequence[FunctionRep], lam: float,
                  kind: str, tol: float = 1e-8):
    """Check the real / anti-CR shortcut: sum |psi_j|^2 constant implies sum L(psi_j) constant."""
    if kind not in ("real", "anti-CR"):
        raise ValueError("kind must be 'real' or 'anti-CR'")
    levi, jets = _family_data(structure, family)
    n = structure.n
    for f, j in zip(family, jets):
        scale = max(1.0, float(np.max(np.abs(j.val))))
        if kind == "real":
            bad = np.max(np.abs(j.val.imag)) > 1e-10 * scale
        else:
            bad = np.max(np.real(holo_pairing(levi, j, j))) > 1e-10 * scale**2
        if bad:
            raise KindViolation(f"{f!r} is not {kind}")
    w = structure.volume_weights()
    phi = sum(np.abs(j.val) ** 2 for j in jets)
    eu = np.exp(-structure.u(structure.rule.nodes).real)
    sL = sum(((n + 1) * lam * np.abs(j.val) ** 2 - n * eu * np.real(pairing(levi, j, j))) for j in jets)
    phi_const, phi_mean = constancy_test(phi, w, tol)
    L_const, L_mean = constancy_test(sL, w, tol)
    return {
        "kind": kind,
        "phi_mean": phi_mean,
        "phi_variance": relative_variance(phi, w),
        "phi_constant": phi_const,
        "sum_L_mean": L_mean,
        "sum_L_variance": relative_variance(sL, w),
        "sum_L_constant": L_const,
        "conclusion_holds": (not phi_const) or L_const,
    }


def gradient_inequality_check(structure: PseudohermitianStructure, family: Sequence[FunctionRep], lam: float | None = None,
               tol: float = 1e-8):
    """Compare int |sum conj(psi_j) d_b psi_j|^2 with int |sum conj(psi_j) dbar_b psi_j|^2."""
    levi, jets = _family_data(structure, family)
    T = levi.tangential
    alpha = sum(np.conj(j.val)[:, None] * j.d for j in jets)
    beta = sum(np.conj(j.val)[:, None] * j.dbar for j in jets)
    eu = np.exp(-structure.u(structure.rule.nodes).real)
    a2 = eu * np.real(np.einsum("njk,nj,nk->n", T, np.conj(alpha), alpha))
    b2 = eu * np.real(np.einsum("njk,nj,nk->n", T, beta, np.conj(beta)))
    w = structure.volume_weights()
    left, right = float(np.sum(w * a2)), float(np.sum(w * b2))
    holds = left <= right + tol * max(1.0, abs(right))
    out = {"left": left, "right": right, "inequality_holds": bool(holds)}
    if lam is not None:
        n = structure.n
        sL = sum(((n + 1) * lam * np.abs(j.val) ** 2 - n * eu * np.real(pairing(levi, j, j))) for j in jets)
        L_const, _ = constancy_test(sL, w, tol)
        phi = sum(np.abs(j.val) ** 2 for j in jets)
        phi_const, _ = constancy_test(phi, w, tol)
        out.update({"sum_L_constant": L_const, "phi_constant": phi_const})
        if holds and L_const:
            out["conclusion_holds"] = bool(phi_const)
    return out


def _ratio_objective(Lh, Lk, w):
    W = np.sum(w)
    LhT, LkT = np.transpose(Lh, (0, 2, 1)), np.transpose(Lk, (0, 2, 1))

    def fun(x, k1, k2):
        G1 = _unpack(x[: 2 * k1 * k1], k1)
        G2 = _unpack(x[2 * k1 * k1:], k2)
        vh = _apply_H(Lh, G1.conj().T @ G1)
        vk = _apply_H(Lk, G2.conj().T @ G2)
        nh = np.sum(w * vh * vh) / W
        nk = np.sum(w * vk * vk) / W
        if nh == 0 or nk == 0:
            return 1e30, np.zeros_like(x)
        s = max(np.sum(w * vh * vk) / W / nk, 0.0)
        r = vh - s * vk
        J = np.sum(w * r * r) / W / nh
        gh = (2 * w * r / W - 2 * J * w * vh / W) / nh
        gk = -2 * s * w * r / W / nh
        Gh = np.einsum("n,nab->ab", gh, LhT)
        Gk = np.einsum("n,nab->ab", gk, LkT)
        Gh, Gk = 0.5 * (Gh + Gh.conj().T), 0.5 * (Gk + Gk.conj().T)
        return J, np.concatenate([_grad_G(G1, Gh), _grad_G(G2, Gk)])

    return fun


def ratio_certificate(structure, basis, result: SpectrumResult, ck: Cluster, ck1: Cluster,
                      tol: float = 1e-8, restarts: int = DEFAULT_RESTARTS, seed: int = 0):
    """Search PSD H on E_k, K on E_{k+1} and s > 0 with sum H L = s sum K L pointwise."""
    ch, cK = result.cluster_coeffs(ck), result.cluster_coeffs(ck1)
    Lh, _ = node_L_tensor(structure, basis, ch, ck.value)
    Lk, _ = node_L_tensor(structure, basis, cK, ck1.value)
    w = structure.volume_weights()
    k1, k2 = ch.shape[1], cK.shape[1]
    fun = _ratio_objective(Lh, Lk, w)
    rng = np.random.default_rng(seed)
    best, best_x, history = np.inf, None, []
    for _ in range(restarts):
        x0 = rng.standard_normal(2 * (k1 * k1 + k2 * k2))
        res = minimize(fun, x0, args=(k1, k2), jac=True, method="L-BFGS-B",
                       options={"maxiter": 3000, "ftol": 1e-30, "gtol": 1e-16})
        history.append(float(res.fun))
        if res.fun < best:
            best, best_x = float(res.fun), res.x
    G1 = _unpack(best_x[: 2 * k1 * k1], k1)
    G2 = _unpack(best_x[2 * k1 * k1:], k2)
    H, K = G1.conj().T @ G1, G2.conj().T @ G2
    H, K = H / np.trace(H).real, K / np.trace(K).real
    vh, vk = _apply_H(Lh, H), _apply_H(Lk, K)
    s = float(np.sum(w * vh * vk) / np.sum(w * vk * vk))
    mis = float(np.sum(w * (vh - s * vk) ** 2) / np.sum(w * vh * vh))
    return {
        "lambda_k": ck.value,
        "lambda_k1": ck1.value,
        "scale": s,
        "misfit": mis,
        "tol": tol,
        "verdict": "certified" if mis < tol and s > 0 else "inconclusive",
        "H_real": H.real.tolist(), "H_imag": H.imag.tolist(),
        "K_real": K.real.tolist(), "K_imag": K.imag.tolist(),
        "seeds": [seed, restarts],
        "restart_objectives": history,
    }
