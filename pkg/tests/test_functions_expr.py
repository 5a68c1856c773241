import numpy as np
import pytest
from hypothesis import given, strategies as st

from kohnlap.errors import ConfigError, EvaluationError, NonRealDeformation
from kohnlap.expr import parse
from kohnlap.functions import FunctionRep, Jet, require_real, to_string

coef = st.floats(-2, 2, allow_nan=False)


def _pts(rng, count=7, dim=2):
    return rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim)) + 0.5


def test_parse_sphere_rho(rng):
    rho = parse("z1*zb1 + z2*zb2 - 1", 2)
    p = _pts(rng)
    np.testing.assert_allclose(rho(p), np.sum(np.abs(p) ** 2, axis=1) - 1, atol=1e-13)
    assert rho.is_real()


def test_parse_functions(rng):
    p = _pts(rng)
    z1, z2 = p[:, 0], p[:, 1]
    cases = {
        "re(z1*zb2)": (z1 * np.conj(z2)).real,
        "im(z1*zb2)": (z1 * np.conj(z2)).imag,
        "abs2(z1 + i*z2)": np.abs(z1 + 1j * z2) ** 2,
        "conj(z1**2)": np.conj(z1) ** 2,
        "L1**2 + logabs2(z2)": np.log(np.abs(z1) ** 2) ** 2 + np.log(np.abs(z2) ** 2),
        "sqrt(2)*exp(1)*pi*z1": np.sqrt(2) * np.e * np.pi * z1,
        "zb1/z1": np.conj(z1) / z1,
        "-z2 / 2": -z2 / 2,
    }
    for text, expected in cases.items():
        np.testing.assert_allclose(parse(text, 2)(p), expected, rtol=1e-12, atol=1e-12, err_msg=text)


@pytest.mark.parametrize("text", ["z3", "foo(z1)", "z1 +", "sqrt(z1)", "z1**0.5", "logabs2(z1*z2)", "1/(z1+z2)"])
def test_parse_rejects(text):
    with pytest.raises(ConfigError):
        parse(text, 2)


def test_to_string_round_trip(rng):
    f = parse("0.5*re(z1*zb2) - 3*zb1**2*z2 + L1*z1 + 2", 2)
    g = parse(to_string(f), 2)
    p = _pts(rng)
    np.testing.assert_allclose(f(p), g(p), rtol=1e-13)


def test_derivatives_against_finite_differences(rng):
    f = parse("z1**2*zb2 + 3*zb1*z2*L1 - zb2**2", 2)
    p = _pts(rng, 3)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1
        dx = (f(p + h * e) - f(p - h * e)) / (2 * h)
        dy = (f(p + 1j * h * e) - f(p - 1j * h * e)) / (2 * h)
        np.testing.assert_allclose(f.dz(j)(p), 0.5 * (dx - 1j * dy), rtol=1e-7, atol=1e-7)
        np.testing.assert_allclose(f.dzbar(j)(p), 0.5 * (dx + 1j * dy), rtol=1e-7, atol=1e-7)


def test_jet_matches_symbolic_derivatives(rng):
    f = parse("z1**2*zb2 + zb1*z2*L2 + 1", 2)
    p = _pts(rng)
    jet = f.jet(p)
    for j in range(2):
        np.testing.assert_allclose(jet.d[:, j], f.dz(j)(p), rtol=1e-12)
        np.testing.assert_allclose(jet.dbar[:, j], f.dzbar(j)(p), rtol=1e-12)
        for k in range(2):
            np.testing.assert_allclose(jet.mixed[:, j, k], f.dzbar(j).dz(k)(p), rtol=1e-12, atol=1e-14)


@given(a=coef, b=coef, c=coef)
def test_jet_algebra_matches_function_algebra(a, b, c):
    rng = np.random.default_rng(0)
    p = _pts(rng, 4)
    f = parse("z1*zb2 + zb1", 2) * a + c
    g = parse("z2**2 - zb2*z1", 2) * b
    prod = (f * g).jet(p)
    jp = f.jet(p) * g.jet(p)
    for name in ("val", "d", "dbar", "mixed"):
        np.testing.assert_allclose(getattr(jp, name), getattr(prod, name), atol=1e-10)


def test_jet_exp_chain_rule(rng):
    u = parse("0.3*re(z1*zb2) + 0.1*abs2(z1)", 2)
    p = _pts(rng, 4) * 0.5
    e = u.jet(p).exp()
    h = 1e-6
    ex = lambda q: np.exp(u(q))
    for j in range(2):
        d = np.zeros(2)
        d[j] = 1
        dx = (ex(p + h * d) - ex(p - h * d)) / (2 * h)
        dy = (ex(p + 1j * h * d) - ex(p - 1j * h * d)) / (2 * h)
        np.testing.assert_allclose(e.dbar[:, j], 0.5 * (dx + 1j * dy), rtol=1e-6)


@given(x=coef, y=coef)
def test_real_imag_parts(x, y):
    f = parse("z1*zb2", 2) * complex(x, y)
    assert f.real.is_real() and f.imag.is_real()
    p = _pts(np.random.default_rng(1), 3)
    np.testing.assert_allclose(f.real(p) + 1j * f.imag(p), f(p), atol=1e-12)


def test_require_real():
    require_real(parse("re(z1)", 2))
    with pytest.raises(NonRealDeformation):
        require_real(parse("z1", 2))
    assert issubclass(NonRealDeformation, ConfigError)


def test_log_at_zero_coordinate():
    with pytest.raises(EvaluationError):
        FunctionRep.logabs2(2, 0)(np.array([[0.0, 1.0]]))


def test_bidegree_and_degree():
    f = parse("z1**2*zb2 + zb1", 2)
    assert f.bidegree == (2, 1)
    assert f.degree == 3
    assert FunctionRep.constant(2, 0).is_zero()


def test_jet_constant_shape():
    j = Jet.constant(2.0, 5, 3)
    assert j.val.shape == (5,) and j.mixed.shape == (5, 3, 3)
