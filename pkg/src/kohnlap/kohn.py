"""Strong-form Kohn Laplacian, conformal transformation law and the form L.

The contact form is ``theta_0 = i dbar(rho)`` restricted to M; a
pseudohermitian structure is ``theta = e^u theta_0`` with ``u`` real.  With
``T`` the projected inverse-Levi tensor (see :mod:`kohnlap.geometry`),

    box_0 f = -T^{jbar k} f_{jbar k} + n |d rho|^{-2} rho^{kbar} f_{kbar},

    box_theta f = e^{-u} (box_0 f - n <d_b u, dbar_b f>).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonRealDeformation, SingularLevi, SurfaceMismatch
from .functions import FunctionRep, Jet, require_real
from .geometry import (
    DefiningSurface,
    LeviData,
    QuadratureRule,
    as_jet,
    integrate,
    levi_data,
    mixed_pairing,
    pairing,
    sup_norm,
    sup_tangential_norm,
)


@dataclass(frozen=True)
class PseudohermitianStructure:
    """``theta = e^u theta_0`` on ``surface`` together with a quadrature rule."""

    surface: DefiningSurface
    u: FunctionRep
    rule: QuadratureRule

    def __post_init__(self):
        try:
            require_real(self.u, "conformal factor")
        except NonRealDeformation:
            raise
        vals = self.u(self.rule.nodes)
        if np.max(np.abs(vals.imag), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(vals.real), initial=0.0)):
            raise NonRealDeformation("conformal factor is not real on the nodes")

    @classmethod
    def standard(cls, surface, rule):
        return cls(surface, FunctionRep.constant(surface.dim, 0.0), rule)

    @property
    def n(self):
        return self.surface.cr_dim

    def with_u(self, u: FunctionRep) -> "PseudohermitianStructure":
        return PseudohermitianStructure(self.surface, u, self.rule)

    def u_jet(self, p=None) -> Jet:
        p = self.rule.nodes if p is None else p
        return self.u.jet(np.atleast_2d(p))

    def conformal_weight(self, power: float) -> np.ndarray:
        """e^{power * u} at the quadrature nodes."""
        return np.exp(power * self.u(self.rule.nodes).real)

    def volume_weights(self) -> np.ndarray:
        return self.rule.weights * self.conformal_weight(self.n + 1)


def box_from_levi(levi: LeviData, f: Jet, n: int) -> np.ndarray:
    """Ambient formula for box_0 f given Levi data and a second-order jet."""
    second = np.einsum("njk,njk->n", levi.tangential, f.mixed)
    first = np.einsum("nk,nk->n", levi.rho_up, f.dbar) / levi.grad_norm_sq
    return -second + n * first


def _levi(structure, p):
    if p is None:
        return structure.rule.levi, structure.rule.nodes
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    return levi_data(structure.surface, p), p


def apply_box_strong(structure: PseudohermitianStructure, f, p=None) -> np.ndarray:
    """box_{theta_0} f at ``p`` (default: the quadrature nodes).  ``u`` is ignored."""
    levi, pts = _levi(structure, p)
    return box_from_levi(levi, as_jet(f, pts), structure.n)


def conformal_apply(structure: PseudohermitianStructure, f, p=None) -> np.ndarray:
    """box_theta f for theta = e^u theta_0."""
    levi, pts = _levi(structure, p)
    fj = as_jet(f, pts)
    uj = structure.u.jet(pts)
    box0 = box_from_levi(levi, fj, structure.n)
    return np.exp(-uj.val.real) * (box0 - structure.n * mixed_pairing(levi, uj, fj))


def L_form(structure: PseudohermitianStructure, psi, eta, lam: float, p=None) -> np.ndarray:
    """L(psi, eta) = (n+1) lam psi conj(eta) - n <dbar_b psi, dbar_b eta>_theta.

    ``box_theta psi`` is replaced by ``lam * psi`` (eigenspace substitution).
    """
    levi, pts = _levi(structure, p)
    pj, ej = as_jet(psi, pts), as_jet(eta, pts)
    n = structure.n
    scale = np.exp(-structure.u(pts).real)
    return (n + 1) * lam * pj.val * np.conj(ej.val) - n * scale * pairing(levi, pj, ej)


def d0_distance(a: PseudohermitianStructure, b: PseudohermitianStructure) -> float:
    """sup|u_a - u_b| + sup|dbar_b(u_a - u_b)|_{theta_0} over the nodes."""
    if a.surface is not b.surface and a.surface.rho != b.surface.rho:
        raise SurfaceMismatch("structures live on different surfaces")
    if a.rule is not b.rule and not np.array_equal(a.rule.nodes, b.rule.nodes):
        raise SurfaceMismatch("structures use different quadrature rules")
    w = a.u - b.u
    return sup_norm(w, a.rule) + sup_tangential_norm(w, a.rule)


def volume(structure: PseudohermitianStructure) -> float:
    """Integral of e^{(n+1)u} against dvol_{theta_0}."""
    return float(np.sum(structure.volume_weights()))


def rescaled_box(structure: PseudohermitianStructure, f, p=None) -> np.ndarray:
    """box_theta f from the ambient formula applied to the defining function e^u rho.

    On M, i dbar(e^u rho) = e^u theta_0, so this is an operator-independent
    route to the conformal law (used as a test oracle).
    """
    from .geometry import levi_from_jet

    pts = structure.rule.nodes if p is None else np.atleast_2d(np.asarray(p, dtype=complex))
    rho_t = structure.u.jet(pts).exp() * structure.surface.rho.jet(pts)
    # rho + c rho^2 restricts to the same contact form; large c makes the
    # ambient Hessian definite when e^u rho alone is not
    for c in (0.0, 1.0, 10.0, 100.0, 1000.0):
        try:
            levi = levi_from_jet(rho_t + c * (rho_t * rho_t))
        except SingularLevi:
            continue
        if np.all(np.linalg.eigvalsh(levi.rho_jkbar) > 0):
            break
    else:
        raise SingularLevi("no definite Hessian for the rescaled defining function")
    return box_from_levi(levi, as_jet(f, pts), structure.n)
