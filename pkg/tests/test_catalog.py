import math

import numpy as np
import pytest

from kohnlap import catalog
from kohnlap.errors import ConfigError, NonRealDeformation
from kohnlap.expr import parse
from kohnlap.functions import FunctionRep
from kohnlap.kohn import PseudohermitianStructure, apply_box_strong
from kohnlap.spectral import spectrum


def _strong_residual(entry, f, lam):
    rule = entry.rule(2, 2)
    st_ = PseudohermitianStructure(entry.surface, FunctionRep.constant(entry.surface.dim, 0.0), rule)
    v = f(rule.nodes)
    r = apply_box_strong(st_, f) - lam * v
    return math.sqrt(np.sum(rule.weights * np.abs(r) ** 2) / np.sum(rule.weights * np.abs(v) ** 2))


@pytest.mark.parametrize("entry", [catalog.sphere(1), catalog.sphere(2), catalog.reinhardt(1, 1.0),
                                   catalog.reinhardt(1, 2.0)], ids=lambda e: e.id)
def test_known_eigenfunctions_residual(entry):
    for known in entry.known_spectrum:
        for f in known.eigenfunctions:
            assert _strong_residual(entry, f, known.value) < 1e-6


def test_sphere_known_values():
    s1 = {k.value: k.multiplicity for k in catalog.sphere(1).known_spectrum}
    assert s1[1.0] == 2 and s1[2.0] == 6 - 3 and catalog.sphere_spectrum(1, 2, 2)[2] == 6
    s2 = catalog.sphere(2).known_spectrum[0]
    assert (s2.value, s2.multiplicity) == (2.0, 3)


@pytest.mark.parametrize("n", [1, 2])
def test_sphere_known_spectrum_found(n):
    entry = catalog.sphere(n)
    st_, basis = entry.setup(2, 2)
    res, _ = spectrum(st_, basis)
    for known in entry.known_spectrum:
        near = [c for c in res.clusters if abs(c.value - known.value) < 1e-6 * known.value]
        assert near and near[0].multiplicity >= known.multiplicity


def test_sphere_eigenvalue_law_p3q3():
    entry = catalog.sphere(1)
    st_, basis = entry.setup(3, 3)
    res, _ = spectrum(st_, basis)
    assert {round(c.value, 8) for c in res.clusters} == {float(q * (p + 1)) for p in range(4) for q in range(1, 4)}


@pytest.mark.parametrize("r", [1.0, 2.0])
def test_reinhardt_eigenvalue(r):
    entry = catalog.reinhardt(1, r)
    st_, basis = entry.setup(1, 1)
    res, _ = spectrum(st_, basis)
    target = 1 / (2 * r * r)
    near = [c for c in res.clusters if abs(c.value - target) < 1e-3 * target]
    assert near and near[0].multiplicity >= 2
    assert entry.known_spectrum[0].value == target


@pytest.mark.parametrize("r", [1.0, 2.0])
def test_reinhardt_no_homogeneous_shortcut(r):
    entry = catalog.reinhardt(1, r)
    rule = entry.rule()
    assert entry.surface.exact_backend is None and rule.exactness_tag == "chart-product"
    # locally homogeneous: |d rho|^2 = 2 sum (log|z_j|^2)^2 = 2 r^2 everywhere
    np.testing.assert_allclose(rule.levi.grad_norm_sq, 2 * r * r, rtol=1e-12)


def test_deformed_sphere_examples():
    base = catalog.sphere(1)
    st0, b0 = base.setup(2, 2)
    r0, _ = spectrum(st0, b0)
    zero = catalog.deformed_sphere(1, FunctionRep.constant(2, 0.0))
    st1, b1 = zero.setup(2, 2)
    np.testing.assert_allclose(spectrum(st1, b1)[0].eigenvalues, r0.eigenvalues, rtol=1e-10)
    c = 0.2
    stc, bc = catalog.deformed_sphere(1, FunctionRep.constant(2, c)).setup(2, 2)
    np.testing.assert_allclose(spectrum(stc, bc)[0].eigenvalues, math.exp(-c) * r0.eigenvalues, rtol=1e-9)
    stu, bu = catalog.deformed_sphere(1, parse("0.1*re(z1*zb2)", 2)).setup(2, 2)
    ru, _ = spectrum(stu, bu)
    assert ru.multiplicities()[0] <= 2
    with pytest.raises(NonRealDeformation):
        catalog.deformed_sphere(1, parse("z1", 2))


def test_from_id_and_listing():
    assert catalog.from_id("sphere(2)").n == 2
    assert catalog.from_id(" reinhardt(1, 2) ").id == "reinhardt(1,2)"
    d = catalog.from_id("deformed_sphere(1, 0.1*re(z1*zb2))")
    assert d.u is not None and d.u.is_real()
    for bad in ("torus(1)", "sphere(x)", "sphere(0)", "reinhardt(1)", "reinhardt(1,-1)"):
        with pytest.raises(ConfigError):
            catalog.from_id(bad)
    ids = [row["id"] for row in catalog.listing()]
    assert "sphere(1)" in ids and "reinhardt(1,1)" in ids


def test_sphere_kernel_dim():
    assert catalog.sphere_kernel_dim(1, 3) == 1 + 2 + 3 + 4
