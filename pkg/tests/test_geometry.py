import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import sphere_points
from kohnlap import catalog
from kohnlap.errors import ChartDomainError, OffSurface, SingularLevi
from kohnlap.expr import parse
from kohnlap.functions import FunctionRep
from kohnlap.geometry import (
    DefiningSurface, build_quadrature, chart_rule, integrate, levi_data, radial_chart, sphere_exact_rule,
    sphere_moment, sup_norm, sup_tangential_norm, tangential_pairing, volume_density,
)
from kohnlap.spectral import monomial_exponents

S1 = catalog.sphere(1).surface
S2 = catalog.sphere(2).surface


def _hessian_fd(rho, p, h=1e-5):
    """rho_{j kbar} by central differences in real coordinates."""
    dim = p.shape[0]
    f = lambda q: float(np.real(rho(q[None, :])[0]))

    def d2(u, v):
        return (f(p + h * u + h * v) - f(p + h * u - h * v) - f(p - h * u + h * v) + f(p - h * u - h * v)) / (4 * h * h)

    H = np.zeros((dim, dim), dtype=complex)
    E = np.eye(dim)
    for j in range(dim):
        for k in range(dim):
            xx = d2(E[j], E[k])
            yy = d2(1j * E[j], 1j * E[k])
            xy = d2(E[j], 1j * E[k])
            yx = d2(1j * E[j], E[k])
            H[j, k] = 0.25 * (xx + yy + 1j * (xy - yx))
    return H


def _dbar_along(f, p, a, h=1e-6):
    """sum_k a_k df/dzbar_k by finite differences along tangent directions."""
    c = np.conj(a)
    D = lambda v: (f(p + h * v) - f(p - h * v)) / (2 * h)
    return 0.5 * (D(c) + 1j * D(1j * c))


def test_levi_sphere_identity():
    ld = levi_data(S1, np.array([1.0, 0.0]))
    np.testing.assert_allclose(ld.rho_jkbar[0], np.eye(2), atol=1e-15)
    assert ld.grad_norm_sq[0] == pytest.approx(1.0)


def test_levi_sphere_rho_up_is_conjugate(rng):
    p = sphere_points(2, 5, rng)
    ld = levi_data(S2, p)
    np.testing.assert_allclose(ld.rho_up, np.conj(p), atol=1e-14)
    np.testing.assert_allclose(ld.rho_inv @ ld.rho_jkbar, np.broadcast_to(np.eye(3), (5, 3, 3)), atol=1e-10)


def test_levi_reinhardt_matches_finite_differences():
    # log coordinates (1, 0) on the r = 1 log-sphere: |z1|^2 = e, |z2|^2 = 1
    surf = catalog.reinhardt(1, 1.0).surface
    p = np.array([math.exp(0.5) * np.exp(0.3j), np.exp(-1.1j)])
    ld = levi_data(surf, p)
    H = ld.rho_jkbar[0]
    # rho = sum (log|z_j|^2)^2 - r^2 gives rho_{j jbar} = 2 / |z_j|^2 and no cross terms
    np.testing.assert_allclose(H, np.diag([2 / math.e, 2.0]), atol=1e-12)
    np.testing.assert_allclose(H, _hessian_fd(surf.rho, p), atol=1e-5)
    contraction = np.real(np.conj(ld.rho_j[0]) @ ld.rho_inv[0] @ ld.rho_j[0])
    assert ld.grad_norm_sq[0] == pytest.approx(contraction, rel=1e-12)


def test_levi_errors():
    with pytest.raises(OffSurface):
        levi_data(S1, np.array([1.0, 1.0]))
    flat = DefiningSurface("flat", 1, parse("z1*zb1 - 1 + 0*z2", 2), (), "sphere")
    with pytest.raises(SingularLevi):
        levi_data(flat, np.array([1.0, 0.0]))


def test_pairing_sphere_example():
    p = np.array([[0.0, 1.0]])
    zb1 = FunctionRep.zbar(2, 0)
    assert tangential_pairing(S1, zb1, zb1, p)[0] == pytest.approx(1.0)


def test_pairing_matches_tangential_finite_differences(rng):
    p = sphere_points(1, 6, rng)
    f = parse("zb1**2*z2 + 3*re(z1*zb2) + zb2", 2)
    g = parse("z1*zb2**2 - zb1", 2)
    got = tangential_pairing(S1, f, g, p)
    for i, q in enumerate(p):
        a = np.array([q[1], -q[0]])  # the (0,1) field z2 d/dzb1 - z1 d/dzb2, unit Levi length
        Lf = _dbar_along(lambda x: f(x[None])[0], q, a)
        Lg = _dbar_along(lambda x: g(x[None])[0], q, a)
        assert got[i] == pytest.approx(Lf * np.conj(Lg), abs=1e-7)


def test_pairing_trivial_cases(rng):
    p = sphere_points(1, 10, rng)
    one, g = FunctionRep.constant(2, 1.0), parse("zb1*z2 + z1**2", 2)
    np.testing.assert_allclose(tangential_pairing(S1, one, g, p), 0, atol=1e-15)
    np.testing.assert_allclose(tangential_pairing(S1, FunctionRep.z(2, 0), FunctionRep.zbar(2, 0), p), 0, atol=1e-15)


_mono = st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2), st.integers(0, 2))
_coef = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


def _poly(terms):
    out = FunctionRep(2)
    for (a1, a2, b1, b2), c in terms:
        out = out + FunctionRep.monomial((a1, a2), (b1, b2), c)
    return out


_polys = st.lists(st.tuples(_mono, _coef), min_size=1, max_size=5).map(_poly)


@given(f=_polys, g=_polys)
def test_pairing_hermitian(f, g):
    p = sphere_points(1, 20, np.random.default_rng(3))
    np.testing.assert_array_equal(tangential_pairing(S1, f, g, p), np.conj(tangential_pairing(S1, g, f, p)))


@given(f=_polys)
def test_pairing_positive(f):
    p = sphere_points(1, 20, np.random.default_rng(4))
    v = tangential_pairing(S1, f, f, p)
    assert np.all(v.real >= -1e-12 * max(1.0, np.abs(v).max()))


@given(a=st.tuples(st.integers(0, 3), st.integers(0, 3)), c=_coef)
def test_cr_kernel(a, c):
    p = sphere_points(1, 20, np.random.default_rng(5))
    f = FunctionRep.monomial(a, (0, 0), c)
    assert np.max(np.abs(tangential_pairing(S1, f, f, p))) <= 1e-10


def test_exact_rule_moments():
    rule = build_quadrature(S1, 8)
    assert rule.exactness_tag == "exact-monomial"
    vol = rule.volume
    assert abs(integrate(parse("z1*zb2", 2), rule)) < 1e-14 * vol
    assert integrate(parse("z1*zb1", 2), rule).real / vol == pytest.approx(0.5, rel=1e-14)
    assert integrate(parse("(z1*zb1)**2", 2), rule).real / vol == pytest.approx(1 / 3, rel=1e-14)


def test_moment_formula_values():
    assert sphere_moment((2, 0), (2, 0), 1) == pytest.approx(1 / 3)
    assert sphere_moment((1, 1), (1, 1), 1) == pytest.approx(1 / 6)
    assert sphere_moment((1, 0), (0, 1), 1) == 0.0
    assert sphere_moment((1, 0, 0), (1, 0, 0), 2) == pytest.approx(1 / 3)


def test_exact_and_chart_rules_agree_up_to_33():
    exact = build_quadrature(S1, 12)
    chart = chart_rule(S1, S1.charts[0], 24)
    assert chart.exactness_tag == "chart-product"
    assert chart.volume == pytest.approx(exact.volume, rel=1e-6)
    worst = 0.0
    for a in monomial_exponents(2, 3):
        for b in monomial_exponents(2, 3):
            f = FunctionRep.monomial(a, b)
            e, c = integrate(f, exact), integrate(f, chart)
            worst = max(worst, abs(e - c) / exact.volume)
    assert worst < 1e-6


def test_exact_rule_against_moment_formula_high_degree():
    rule = build_quadrature(S2, 10)
    vol = rule.volume
    for a in monomial_exponents(3, 3):
        for b in monomial_exponents(3, 3):
            expect = sphere_moment(a, b, 2)
            got = integrate(FunctionRep.monomial(a, b), rule) / vol
            assert abs(got - expect) < 1e-13


def test_volume_form_matches_pullback():
    # theta = i dbar rho on S^3 gives vol = 2 * 2 pi^2 (twice the Euclidean volume)
    rule = build_quadrature(S1, 6)
    assert rule.volume == pytest.approx(2 * 2 * math.pi**2, rel=1e-12)


def test_chart_residency_and_weights():
    for entry in (catalog.sphere(1), catalog.reinhardt(1, 1.0), catalog.reinhardt(1, 2.0)):
        rule = entry.rule(1, 1)
        assert np.all(rule.weights > 0)
        assert np.max(np.abs(entry.surface.rho(rule.nodes))) <= 1e-10


def test_reinhardt_resolution_doubling():
    surf = catalog.reinhardt(1, 1.0).surface
    base = build_quadrature(surf, (32, 24, 24))
    fine = build_quadrature(surf, (64, 48, 48))
    assert fine.volume == pytest.approx(base.volume, rel=1e-6)


def test_reinhardt_sum_v_squared_is_one():
    entry = catalog.reinhardt(1, 1.0)
    rule = entry.rule()
    v1, v2 = entry.known_spectrum[0].eigenfunctions
    assert integrate(v1 * v1 + v2 * v2, rule).real == pytest.approx(rule.volume, rel=1e-12)


def test_radial_chart_ellipsoid():
    rho = parse("z1*zb1 + 2*z2*zb2 - 1", 2)
    surf = DefiningSurface("ellipsoid", 1, rho, (radial_chart(rho, 1),))
    rule = build_quadrature(surf, 16)
    assert np.max(np.abs(rho(rule.nodes))) < 1e-10
    finer = build_quadrature(surf, 32)
    assert finer.volume == pytest.approx(rule.volume, rel=1e-6)


def test_chart_domain_errors():
    with pytest.raises(ChartDomainError):
        chart_rule(S1, S1.charts[0], 0)


def test_integrate_linear_and_conjugation(rng):
    rule = build_quadrature(S1, 8)
    f, g = parse("z1*zb1**2*z2 + zb2", 2), parse("abs2(z1) + i*z1*zb2", 2)
    a, b = 0.3 - 1.2j, 2.0 + 0.5j
    assert integrate(a * f + b * g, rule) == pytest.approx(a * integrate(f, rule) + b * integrate(g, rule))
    assert integrate(g.conj(), rule) == pytest.approx(np.conj(integrate(g, rule)))
    assert integrate(FunctionRep.constant(2, 0.0), rule) == 0


def test_sup_norms():
    rule = build_quadrature(S1, backend="chart")
    assert sup_norm(FunctionRep.constant(2, 0.0), rule) == 0
    assert sup_norm(parse("z1*zb1", 2), rule) == pytest.approx(1.0, abs=1e-3)
    # node maxima are lower bounds and grow under refinement
    coarse = build_quadrature(S1, 8, backend="chart")
    assert sup_norm(parse("z1*zb1", 2), coarse) <= sup_norm(parse("z1*zb1", 2), rule)
    c = FunctionRep.constant(2, -2.5)
    assert sup_norm(c, rule) == pytest.approx(2.5)
    assert sup_tangential_norm(c, rule) == 0


def test_volume_density_scales_with_rho(rng):
    # rescaling rho by a constant c scales theta by c and the volume by c^(n+1)
    p = sphere_points(1, 4, rng)
    ld = levi_data(S1, p)
    scaled = DefiningSurface("s3x3", 1, S1.rho * 3.0, S1.charts, None)
    ld3 = levi_data(scaled, p)
    np.testing.assert_allclose(volume_density(ld3, 1), 9 * volume_density(ld, 1), rtol=1e-12)
