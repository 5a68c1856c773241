import math

import numpy as np
import pytest
from hypothesis import given, strategies as hst

from kohnlap import catalog
from kohnlap.errors import DegenerateBasis, IndefiniteMass, KernelOverlap
from kohnlap.expr import parse
from kohnlap.functions import FunctionRep
from kohnlap.kohn import PseudohermitianStructure
from kohnlap.spectral import (
    GramMatrices, assemble, build_basis, cluster_eigenvalues, coefficient_residual, maxmini_quotient,
    monomial_exponents, ordered_rank_filter, residual_check, solve_spectrum, spectrum,
)

S1 = catalog.sphere(1)


def _exps(dim, d):
    return [e for e in monomial_exponents(dim, d) if sum(e) == d]


def brute_force_harmonic_dim(n, p, q):
    """Kernel dimension of sum_j d^2/dz_j dzbar_j from bidegree (p, q) to (p-1, q-1)."""
    dim = n + 1
    src = [(a, b) for a in _exps(dim, p) for b in _exps(dim, q)]
    if p == 0 or q == 0:
        return len(src)
    dst = {(a, b): i for i, (a, b) in enumerate((a, b) for a in _exps(dim, p - 1) for b in _exps(dim, q - 1))}
    M = np.zeros((len(dst), len(src)))
    for col, (a, b) in enumerate(src):
        for j in range(dim):
            if a[j] and b[j]:
                a2 = tuple(x - (i == j) for i, x in enumerate(a))
                b2 = tuple(x - (i == j) for i, x in enumerate(b))
                M[dst[(a2, b2)], col] += a[j] * b[j]
    return len(src) - np.linalg.matrix_rank(M)


@pytest.mark.parametrize("n,p,q", [(1, p, q) for p in range(4) for q in range(4)] + [(2, 1, 2), (2, 2, 2), (3, 1, 1)])
def test_harmonic_dim_brute_force(n, p, q):
    assert catalog.harmonic_dim(n, p, q) == brute_force_harmonic_dim(n, p, q)
    if n == 1:
        assert catalog.harmonic_dim(1, p, q) == p + q + 1


def test_basis_examples():
    surf = S1.surface
    b01 = build_basis(surf, 0, 1)
    assert len(b01) == 3 and b01.labels[0] == "1"
    b11 = build_basis(surf, 1, 1)
    assert len(b11) == 8 and len(b11.dropped) == 1
    entry = catalog.reinhardt(1, 1.0)
    br = build_basis(entry.surface, 1, 1, entry.extras, rule=entry.rule())
    assert sum(lab.startswith("extra:") for lab in br.labels) == 2


def test_rank_filter_drops_dependent_column():
    v = np.array([[1.0, 2.0, 3.0], [0.0, 1.0, 1.0]]).T
    B = np.column_stack([v, v[:, 0] + v[:, 1]])
    B = (B.T @ B).astype(complex)
    assert ordered_rank_filter(B) == [0, 1]


def test_degenerate_basis():
    with pytest.raises(DegenerateBasis):
        build_basis(S1.surface, 0, 0, (), tol=2.0)


def test_assemble_first_eigenspace_example():
    st_, basis = S1.setup(0, 1)
    sub = basis.__class__(basis.functions[1:], basis.bidegrees[1:], basis.labels[1:])
    mats = assemble(st_, sub)
    np.testing.assert_allclose(mats.dirichlet, 1.0 * mats.mass, atol=1e-14)


def test_assemble_constant_rescaling():
    st_, basis = S1.setup(1, 1)
    m0 = assemble(st_, basis)
    c = 0.4
    m1 = assemble(st_.with_u(FunctionRep.constant(2, c)), basis)
    np.testing.assert_allclose(m1.mass, math.exp(2 * c) * m0.mass, atol=1e-12)
    np.testing.assert_allclose(m1.dirichlet, math.exp(c) * m0.dirichlet, atol=1e-12)


def test_assemble_mass_proportional_to_identity():
    st_, _ = S1.setup(0, 2)
    fams = [parse("zb1**2", 2), parse("sqrt(2)*zb1*zb2", 2), parse("zb2**2", 2)]
    from kohnlap.spectral import SpectralBasis
    mats = assemble(st_, SpectralBasis(tuple(fams), ((0, 2),) * 3, ("a", "b", "c")))
    np.testing.assert_allclose(mats.mass, mats.mass[0, 0] * np.eye(3), atol=1e-13)
    # against the chart rule
    chart = catalog.build_quadrature(S1.surface, backend="chart")
    st_c = PseudohermitianStructure(S1.surface, FunctionRep.constant(2, 0.0), chart)
    mc = assemble(st_c, SpectralBasis(tuple(fams), ((0, 2),) * 3, ("a", "b", "c")))
    np.testing.assert_allclose(mc.mass, mats.mass, rtol=1e-6, atol=1e-9)


def test_gram_invariants(s3_spectrum):
    res, mats = s3_spectrum
    for M in (mats.mass, mats.dirichlet, mats.box_gram, mats.strong):
        assert np.max(np.abs(M - M.conj().T)) <= 1e-12 * np.max(np.abs(M))
    assert np.linalg.eigvalsh(mats.dirichlet).min() > -1e-10 * np.abs(mats.dirichlet).max()
    V = res.coeffs
    np.testing.assert_allclose(V.conj().T @ mats.mass @ V, np.eye(V.shape[1]), atol=1e-8)


def test_solve_examples():
    st_, basis = S1.setup(0, 1)
    res, _ = spectrum(st_, basis)
    assert res.kernel_dim == 1
    np.testing.assert_allclose(res.eigenvalues, [1.0, 1.0], rtol=1e-12)
    st2, b2 = catalog.sphere(2).setup(0, 1)
    r2, _ = spectrum(st2, b2)
    assert r2.clusters[0].multiplicity == 3 and r2.clusters[0].value == pytest.approx(2.0, rel=1e-12)


def test_sphere_p2q2_spectrum(s3_spectrum):
    res, _ = s3_spectrum
    assert res.multiplicities()[:8] == [2, 2, 6, 6, 6, 6, 6, 6]
    np.testing.assert_allclose(res.eigenvalues[:8], [1, 1, 2, 2, 2, 2, 2, 2], rtol=1e-12)
    expected = catalog.sphere_spectrum(1, 2, 2)
    assert [(round(c.value, 9), c.multiplicity) for c in res.clusters] == list(expected.items())


def test_cluster_invariant(s3_spectrum):
    res, _ = s3_spectrum
    for c in res.clusters:
        vals = res.eigenvalues[list(c.members)]
        assert np.max(np.abs(vals - c.value)) < res.cluster_tol * max(1.0, c.value)


def test_cluster_eigenvalues_greedy():
    cl = cluster_eigenvalues(np.array([1.0, 1.00000001, 2.0, 2.0, 2.5]))
    assert [c.multiplicity for c in cl] == [2, 2, 1]
    assert cl[1].members == (2, 3)


def test_indefinite_mass():
    A = np.eye(2, dtype=complex)
    B = np.diag([1.0, -1.0]).astype(complex)
    with pytest.raises(IndefiniteMass):
        solve_spectrum(GramMatrices(B, A, A, A))


def test_residual_examples(s3):
    st_, basis = s3
    res, _ = spectrum(st_, basis)
    coeffs = np.zeros(len(basis), dtype=complex)
    coeffs[basis.labels.index("zb1")] = 1.0
    assert coefficient_residual(st_, basis, coeffs, 1.0) < 1e-8
    assert residual_check(st_, basis, None, (coeffs, 1.0)) < 1e-8
    eig = max(residual_check(st_, basis, res, k) for k in range(1, 9))
    rnd = np.random.default_rng(0).standard_normal(len(basis)) + 0j
    bad = residual_check(st_, basis, None, (rnd, 1.0))
    assert bad > 0.1 and bad > 10 * eig


def test_residual_reinhardt_cluster(reinhardt1):
    st_, basis = reinhardt1
    res, _ = spectrum(st_, basis)
    c = min(res.clusters, key=lambda c: abs(c.value - 0.5))
    assert max(residual_check(st_, basis, res, m + 1) for m in c.members) < 1e-3


def test_rayleigh_identity(s3_spectrum):
    res, mats = s3_spectrum
    for v, lam in zip(res.coeffs.T, res.eigenvalues):
        q = (v.conj() @ mats.dirichlet @ v) / (v.conj() @ mats.mass @ v)
        assert q.real == pytest.approx(lam, rel=1e-10)


def test_holomorphic_monomials_in_kernel(s3_spectrum, s3):
    res, mats = s3_spectrum
    _, basis = s3
    thresh = res.zero_tol * res.eigenvalues.max()
    for i, (p, q) in enumerate(basis.bidegrees):
        if q == 0:
            assert (mats.dirichlet[i, i] / mats.mass[i, i]).real < thresh


def test_galerkin_monotonicity():
    prev = None
    for P in (1, 2, 3):
        st_, basis = S1.setup(P, P, resolution=catalog.sphere_degree(3, 3))
        vals, _ = spectrum(st_, basis)
        vals = vals.eigenvalues
        if prev is not None:
            k = min(len(prev), len(vals))
            assert np.all(vals[:k] <= prev[:k] + 1e-10)
        prev = vals


def test_constant_rescaling_spectrum(s3):
    st_, basis = s3
    c = -0.3
    r0, _ = spectrum(st_, basis)
    r1, _ = spectrum(st_.with_u(FunctionRep.constant(2, c)), basis)
    np.testing.assert_allclose(r1.eigenvalues, math.exp(-c) * r0.eigenvalues, rtol=1e-9)


def test_maxmini_examples(s3_spectrum):
    res, mats = s3_spectrum
    for k in range(1, 5):
        assert maxmini_quotient(mats, res.coeffs[:, :k], k, res) == pytest.approx(res.eigenvalues[k - 1], rel=1e-6)
    assert maxmini_quotient(mats, res.coeffs[:, 2:3], 1, res) == pytest.approx(2.0, rel=1e-10)
    with pytest.raises(KernelOverlap):
        maxmini_quotient(mats, res.kernel_coeffs[:, :1], 1, res)


@given(seed=hst.integers(0, 10**6), k=hst.integers(1, 4))
def test_maxmini_lower_bound(seed, k, s3_spectrum):
    res, mats = s3_spectrum
    r = np.random.default_rng(seed)
    V = r.standard_normal((mats.mass.shape[0], k)) + 1j * r.standard_normal((mats.mass.shape[0], k))
    assert maxmini_quotient(mats, V, k, res) >= res.eigenvalues[k - 1] - 1e-8


def test_weak_strong_consistency(s3_spectrum):
    _, mats = s3_spectrum
    assert np.max(np.abs(mats.strong - mats.dirichlet)) <= 1e-6 * np.max(np.abs(mats.dirichlet))
