"""Parser for the ambient-function expression grammar.

Grammar (Python operator syntax, parsed with :mod:`ast`)::

    expr     := expr (+|-|*|/) expr | -expr | expr ** INT | atom
    atom     := NUMBER | i | pi | zK | zbK | LK | func(expr)
    func     := conj | re | im | abs2 | logabs2 | sqrt | exp

``zK`` is the K-th coordinate (1-based), ``zbK`` its conjugate and ``LK`` is
``log|zK|^2``.  ``abs2(e)`` is ``e * conj(e)``; ``logabs2(zK)`` is ``LK``.
``sqrt`` and ``exp`` accept constant arguments only.  Division is allowed by
constants and by single Laurent monomials such as ``z1`` or ``z1*zb2``.

Examples: ``z1*zb1 + z2*zb2 - 1``, ``L1**2 + L2**2 - 1``,
``0.1*re(z1*zb2)``, ``sqrt(2)*im(z1*zb2)``.
"""
from __future__ import annotations

import ast
import cmath
import math
import re

from .errors import ConfigError
from .functions import FunctionRep

_VAR = re.compile(r"^(zb|z|L)(\d+)$")


def parse(text: str, dim: int) -> FunctionRep:
    """Parse ``text`` into a :class:`FunctionRep` on C^dim."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    out = _eval(tree.body, dim)
    if not isinstance(out, FunctionRep):
        out = FunctionRep.constant(dim, out)
    return out


def _const(node, dim):
    v = _eval(node, dim)
    if isinstance(v, FunctionRep):
        if v.is_zero():
            return 0.0
        if list(v.terms) != [((0,) * dim,) * 3]:
            raise ConfigError("expected a constant argument")
        return v.terms[((0,) * dim,) * 3]
    return v


def _eval(node, dim):
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float, complex)) and not isinstance(node.value, bool):
            return complex(node.value)
        raise ConfigError(f"unsupported literal {node.value!r}")
    if isinstance(node, ast.Name):
        name = node.id
        if name in ("i", "I"):
            return 1j
        if name == "pi":
            return complex(math.pi)
        m = _VAR.match(name)
        if not m:
            raise ConfigError(f"unknown symbol {name!r}")
        kind, idx = m.group(1), int(m.group(2)) - 1
        if not 0 <= idx < dim:
            raise ConfigError(f"coordinate index out of range in {name!r} (dim={dim})")
        return {"z": FunctionRep.z, "zb": FunctionRep.zbar, "L": FunctionRep.logabs2}[kind](dim, idx)
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, dim)
        if isinstance(node.op, ast.USub):
            return -v
        if isinstance(node.op, ast.UAdd):
            return v
    if isinstance(node, ast.BinOp):
        left, right = _eval(node.left, dim), _eval(node.right, dim)
        op = node.op
        if isinstance(op, ast.Add):
            return left + right
        if isinstance(op, ast.Sub):
            return left - right
        if isinstance(op, ast.Mult):
            return left * right
        if isinstance(op, ast.Div):
            if isinstance(left, complex) and isinstance(right, complex):
                return left / right
            if not isinstance(left, FunctionRep):
                left = FunctionRep.constant(dim, left)
            try:
                return left / right
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if isinstance(op, ast.Pow):
            p = _const(node.right, dim)
            if isinstance(left, complex):
                return left ** p
            if p.imag != 0 or p.real != int(p.real):
                raise ConfigError("exponents of non-constant expressions must be integers")
            try:
                return left ** int(p.real)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and len(node.args) == 1:
        fname = node.func.id
        if fname in ("sqrt", "exp"):
            c = _const(node.args[0], dim)
            return cmath.sqrt(c) if fname == "sqrt" else cmath.exp(c)
        arg = _eval(node.args[0], dim)
        if not isinstance(arg, FunctionRep):
            arg = FunctionRep.constant(dim, arg)
        if fname == "conj":
            return arg.conj()
        if fname == "re":
            return arg.real
        if fname == "im":
            return arg.imag
        if fname == "abs2":
            return arg * arg.conj()
        if fname == "logabs2":
            if len(arg.terms) == 1:
                (a, b, m), c = next(iter(arg.terms.items()))
                if c == 1 and not any(b) and not any(m) and sorted(a) == [0] * (dim - 1) + [1]:
                    return FunctionRep.logabs2(dim, a.index(1))
            raise ConfigError("logabs2 accepts a single coordinate zK")
        raise ConfigError(f"unknown function {fname!r}")
    raise ConfigError(f"unsupported syntax: {ast.dump(node)}")
