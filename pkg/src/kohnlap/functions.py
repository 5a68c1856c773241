"""Ambient function algebra and numeric jets.

A :class:`FunctionRep` is a finite sum of terms

    c * z^a * conj(z)^b * prod_j (log|z_j|^2)^m_j

with integer (possibly negative) exponents ``a``, ``b`` and nonnegative log
powers ``m``.  The set is closed under sums, products, conjugation and the
Wirtinger derivatives d/dz_j and d/dzbar_j, so every first and mixed second
derivative needed by the Kohn Laplacian is available exactly.

A :class:`Jet` holds the numeric value of a function together with its
first and mixed second Wirtinger derivatives at an array of points.  Jets
support the same arithmetic plus ``exp``, which lets conformal factors such
as ``exp((n+1) u)`` enter pointwise formulas without leaving the algebra.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from .errors import EvaluationError, NonRealDeformation

Key = Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]


def _add_tuple(t, j, delta):
    out = list(t)
    out[j] += delta
    return tuple(out)


class FunctionRep:
    """Symbolic ambient function on C^{dim}.

    Parameters
    ----------
    dim : int
        Number of ambient complex coordinates (``n + 1``).
    terms : mapping
        ``{(a, b, m): coefficient}``.
    """

    __slots__ = ("dim", "terms", "__dict__")

    def __init__(self, dim: int, terms: Mapping[Key, complex] | None = None):
        self.dim = int(dim)
        clean: Dict[Key, complex] = {}
        for key, c in (terms or {}).items():
            a, b, m = (tuple(int(x) for x in part) for part in key)
            if not (len(a) == len(b) == len(m) == self.dim):
                raise ValueError(f"term {key} does not match dimension {dim}")
            if any(x < 0 for x in m):
                raise ValueError("log powers must be nonnegative")
            c = complex(c)
            if c != 0:
                k = (a, b, m)
                clean[k] = clean.get(k, 0) + c
        self.terms = {k: c for k, c in clean.items() if c != 0}

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, dim, c=1.0):
        zero = (0,) * dim
        return cls(dim, {(zero, zero, zero): c})

    @classmethod
    def monomial(cls, a, b, c=1.0, m=None):
        dim = len(a)
        m = (0,) * dim if m is None else tuple(m)
        return cls(dim, {(tuple(a), tuple(b), m): c})

    @classmethod
    def z(cls, dim, j):
        e = tuple(int(i == j) for i in range(dim))
        return cls.monomial(e, (0,) * dim)

    @classmethod
    def zbar(cls, dim, j):
        e = tuple(int(i == j) for i in range(dim))
        return cls.monomial((0,) * dim, e)

    @classmethod
    def logabs2(cls, dim, j):
        """``log|z_j|^2``."""
        e = tuple(int(i == j) for i in range(dim))
        zero = (0,) * dim
        return cls(dim, {(zero, zero, e): 1.0})

    # algebra --------------------------------------------------------------
    def _check(self, other):
        if isinstance(other, FunctionRep):
            if other.dim != self.dim:
                raise ValueError("dimension mismatch")
            return other
        return FunctionRep.constant(self.dim, complex(other))

    def __add__(self, other):
        other = self._check(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0) + c
        return FunctionRep(self.dim, terms)

    __radd__ = __add__

    def __neg__(self):
        return FunctionRep(self.dim, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def __mul__(self, other):
        if not isinstance(other, FunctionRep):
            c = complex(other)
            return FunctionRep(self.dim, {k: c * v for k, v in self.terms.items()})
        other = self._check(other)
        terms: Dict[Key, complex] = {}
        for (a1, b1, m1), c1 in self.terms.items():
            for (a2, b2, m2), c2 in other.terms.items():
                k = (
                    tuple(x + y for x, y in zip(a1, a2)),
                    tuple(x + y for x, y in zip(b1, b2)),
                    tuple(x + y for x, y in zip(m1, m2)),
                )
                terms[k] = terms.get(k, 0) + c1 * c2
        return FunctionRep(self.dim, terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, FunctionRep):
            if len(other.terms) != 1:
                raise ValueError("division only by a single Laurent monomial")
            ((a, b, m), c), = other.terms.items()
            if any(m):
                raise ValueError("division by log terms is not representable")
            inv = FunctionRep(self.dim, {(tuple(-x for x in a), tuple(-x for x in b),
                                          (0,) * self.dim): 1 / c})
            return self * inv
        return self * (1 / complex(other))

    def __pow__(self, k):
        k = int(k)
        if k < 0:
            if len(self.terms) != 1:
                raise ValueError("negative powers only of single monomials")
            return FunctionRep.constant(self.dim) / (self ** (-k))
        out = FunctionRep.constant(self.dim)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conj(self):
        return FunctionRep(self.dim, {(b, a, m): np.conj(c) for (a, b, m), c in self.terms.items()})

    @property
    def real(self):
        return (self + self.conj()) * 0.5

    @property
    def imag(self):
        return (self - self.conj()) * (-0.5j)

    def is_real(self, tol=1e-14):
        diff = self - self.conj()
        return all(abs(c) <= tol for c in diff.terms.values())

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, FunctionRep):
            return NotImplemented
        return self.dim == other.dim and (self - other).is_zero()

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    # calculus ---------------------------------------------------------------
    def dz(self, j):
        terms: Dict[Key, complex] = {}
        for (a, b, m), c in self.terms.items():
            if a[j]:
                k = (_add_tuple(a, j, -1), b, m)
                terms[k] = terms.get(k, 0) + c * a[j]
            if m[j]:
                k = (_add_tuple(a, j, -1), b, _add_tuple(m, j, -1))
                terms[k] = terms.get(k, 0) + c * m[j]
        return FunctionRep(self.dim, terms)

    def dzbar(self, j):
        terms: Dict[Key, complex] = {}
        for (a, b, m), c in self.terms.items():
            if b[j]:
                k = (a, _add_tuple(b, j, -1), m)
                terms[k] = terms.get(k, 0) + c * b[j]
            if m[j]:
                k = (a, _add_tuple(b, j, -1), _add_tuple(m, j, -1))
                terms[k] = terms.get(k, 0) + c * m[j]
        return FunctionRep(self.dim, terms)

    @cached_property
    def _derivs(self):
        d = [self.dz(j) for j in range(self.dim)]
        db = [self.dzbar(j) for j in range(self.dim)]
        # mixed[j][k] = d^2 f / dzbar_j dz_k
        mixed = [[db[j].dz(k) for k in range(self.dim)] for j in range(self.dim)]
        return d, db, mixed

    @property
    def degree(self):
        """Largest ``|a| + |b| + |m|`` over the terms (0 for the zero function)."""
        if not self.terms:
            return 0
        return max(sum(map(abs, a)) + sum(map(abs, b)) + sum(m) for a, b, m in self.terms)

    @property
    def bidegree(self):
        if not self.terms:
            return (0, 0)
        return (max(sum(a) for a, _, _ in self.terms), max(sum(b) for _, b, _ in self.terms))

    # evaluation -------------------------------------------------------------
    def __call__(self, points):
        return _evaluate(self, np.asarray(points, dtype=complex), {})

    def jet(self, points, second=True):
        """Evaluate value and Wirtinger derivatives at ``points`` (shape (N, dim))."""
        pts = np.atleast_2d(np.asarray(points, dtype=complex))
        cache: dict = {}
        d, db, mixed = self._derivs
        val = _evaluate(self, pts, cache)
        dv = np.stack([_evaluate(g, pts, cache) for g in d], axis=-1)
        dbv = np.stack([_evaluate(g, pts, cache) for g in db], axis=-1)
        if second:
            mx = np.stack(
                [np.stack([_evaluate(g, pts, cache) for g in row], axis=-1) for row in mixed],
                axis=-2,
            )
        else:
            mx = None
        return Jet(val, dv, dbv, mx)

    def __repr__(self):
        if not self.terms:
            return "FunctionRep(0)"
        return "FunctionRep(" + to_string(self) + ")"


def _power(arr, e, cache, key):
    if e == 0:
        return None
    k = (key, e)
    hit = cache.get(k)
    if hit is None:
        if e < 0 and np.any(arr == 0):
            raise EvaluationError("negative power of a vanishing coordinate")
        hit = arr ** e
        cache[k] = hit
    return hit


def _evaluate(f: FunctionRep, pts: np.ndarray, cache: dict) -> np.ndarray:
    n_pts = pts.shape[0]
    out = np.zeros(n_pts, dtype=complex)
    if not f.terms:
        return out
    if "zbar" not in cache:
        cache["zbar"] = np.conj(pts)
        cache["z"] = pts
    logs = None
    for (a, b, m), c in f.terms.items():
        term = np.full(n_pts, c, dtype=complex)
        for j in range(f.dim):
            p = _power(cache["z"][:, j], a[j], cache, ("z", j))
            if p is not None:
                term = term * p
            p = _power(cache["zbar"][:, j], b[j], cache, ("zb", j))
            if p is not None:
                term = term * p
            if m[j]:
                if logs is None:
                    logs = cache.get("log")
                    if logs is None:
                        with np.errstate(divide="ignore"):
                            logs = np.log(np.abs(pts) ** 2).astype(complex)
                        cache["log"] = logs
                if not np.all(np.isfinite(logs[:, j])):
                    raise EvaluationError("log|z_j|^2 undefined where z_j = 0")
                term = term * _power(logs[:, j], m[j], cache, ("L", j))
        out += term
    return out


def real_part(f: FunctionRep) -> FunctionRep:
    return f.real


def imag_part(f: FunctionRep) -> FunctionRep:
    return f.imag


def require_real(f: FunctionRep, what="function", tol=1e-12):
    if not f.is_real(tol):
        raise NonRealDeformation(f"{what} must be real-valued")
    return f


def to_string(f: FunctionRep) -> str:
    """Render in the expression grammar accepted by :func:`kohnlap.expr.parse`."""
    parts = []
    for (a, b, m), c in sorted(f.terms.items()):
        factors = []
        for j in range(f.dim):
            for sym, e in ((f"z{j + 1}", a[j]), (f"zb{j + 1}", b[j]), (f"L{j + 1}", m[j])):
                if e == 1:
                    factors.append(sym)
                elif e:
                    factors.append(f"{sym}**{e}" if e > 0 else f"{sym}**({e})")
        cs = repr(c.real) if c.imag == 0 else f"({c.real!r}{c.imag:+r}j)"
        parts.append("*".join([cs] + factors))
    return " + ".join(parts) if parts else "0"


@dataclass
class Jet:
    """Value, d/dz, d/dzbar and mixed d^2/dzbar_j dz_k of a function at N points.

    Shapes: ``val`` (N,), ``d`` and ``dbar`` (N, dim), ``mixed`` (N, dim, dim)
    with ``mixed[:, j, k] = d^2 f / dzbar_j dz_k``.  ``mixed`` may be None
    when only first derivatives were requested.
    """

    val: np.ndarray
    d: np.ndarray
    dbar: np.ndarray
    mixed: np.ndarray | None = None

    @property
    def dim(self):
        return self.d.shape[-1]

    @classmethod
    def constant(cls, c, n_pts, dim):
        c = np.broadcast_to(np.asarray(c, dtype=complex), (n_pts,)).copy()
        z1 = np.zeros((n_pts, dim), dtype=complex)
        return cls(c, z1, z1.copy(), np.zeros((n_pts, dim, dim), dtype=complex))

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.val + other, self.d, self.dbar, self.mixed)
        mixed = None if self.mixed is None or other.mixed is None else self.mixed + other.mixed
        return Jet(self.val + other.val, self.d + other.d, self.dbar + other.dbar, mixed)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.d, -self.dbar, None if self.mixed is None else -self.mixed)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = other
            return Jet(self.val * c, self.d * c, self.dbar * c,
                       None if self.mixed is None else self.mixed * c)
        f, g = self, other
        val = f.val * g.val
        d = f.d * g.val[:, None] + g.d * f.val[:, None]
        db = f.dbar * g.val[:, None] + g.dbar * f.val[:, None]
        mixed = None
        if f.mixed is not None and g.mixed is not None:
            mixed = (
                f.mixed * g.val[:, None, None]
                + g.mixed * f.val[:, None, None]
                + f.dbar[:, :, None] * g.d[:, None, :]
                + g.dbar[:, :, None] * f.d[:, None, :]
            )
        return Jet(val, d, db, mixed)

    __rmul__ = __mul__

    def exp(self):
        e = np.exp(self.val)
        mixed = None
        if self.mixed is not None:
            mixed = e[:, None, None] * (self.mixed + self.dbar[:, :, None] * self.d[:, None, :])
        return Jet(e, self.d * e[:, None], self.dbar * e[:, None], mixed)

    def conj(self):
        mixed = None if self.mixed is None else np.conj(np.swapaxes(self.mixed, -1, -2))
        return Jet(np.conj(self.val), np.conj(self.dbar), np.conj(self.d), mixed)


@dataclass
class JetStack:
    """Jets of m functions at the same N points, stacked on a leading axis."""

    val: np.ndarray  # (m, N)
    d: np.ndarray  # (m, N, dim)
    dbar: np.ndarray  # (m, N, dim)
    mixed: np.ndarray  # (m, N, dim, dim)

    @classmethod
    def from_functions(cls, funcs: Iterable[FunctionRep], points):
        jets = [f.jet(points) for f in funcs]
        return cls(
            np.stack([j.val for j in jets]),
            np.stack([j.d for j in jets]),
            np.stack([j.dbar for j in jets]),
            np.stack([j.mixed for j in jets]),
        )

    def __len__(self):
        return self.val.shape[0]

    def __getitem__(self, i) -> Jet:
        return Jet(self.val[i], self.d[i], self.dbar[i], self.mixed[i])

    def combine(self, coeffs) -> "JetStack":
        """Linear combinations: column c of ``coeffs`` gives sum_i coeffs[i, c] * f_i."""
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        return JetStack(
            np.tensordot(c.T, self.val, axes=1),
            np.tensordot(c.T, self.d, axes=1),
            np.tensordot(c.T, self.dbar, axes=1),
            np.tensordot(c.T, self.mixed, axes=1),
        )

    def subset_nodes(self, idx) -> "JetStack":
        return JetStack(self.val[:, idx], self.d[:, idx], self.dbar[:, idx], self.mixed[:, idx])
