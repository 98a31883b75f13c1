"""Independent dense-dict multivariate polynomial arithmetic.

Deliberately minimal and separate from the package's dense-table jets:
exponent-tuple dicts, schoolbook products, symbolic differentiation.  Used
as the oracle for jet coefficient checks.
"""

from __future__ import annotations

import math


def poly_const(c: float, n_vars: int) -> dict:
    return {(0,) * n_vars: c}


def poly_var(i: int, base: float, n_vars: int) -> dict:
    e = tuple(1 if j == i else 0 for j in range(n_vars))
    return {(0,) * n_vars: base, e: 1.0}


def poly_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + v
    return out


def poly_mul(a: dict, b: dict, max_degree: int | None = None) -> dict:
    out: dict = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            if max_degree is not None and sum(k) > max_degree:
                continue
            out[k] = out.get(k, 0.0) + va * vb
    return out


def poly_scale(a: dict, c: float) -> dict:
    return {k: v * c for k, v in a.items()}


def poly_diff(a: dict, i: int) -> dict:
    out: dict = {}
    for k, v in a.items():
        if k[i] == 0:
            continue
        down = list(k)
        down[i] -= 1
        out[tuple(down)] = out.get(tuple(down), 0.0) + v * k[i]
    return out


def poly_eval(a: dict, point) -> float:
    total = 0.0
    for k, v in a.items():
        term = v
        for e, x in zip(k, point):
            term *= x**e
        total += term
    return total


def poly_derivative_at_zero(a: dict, alpha) -> float:
    """The mixed partial d^alpha at the expansion point (offsets zero)."""
    coeff = a.get(tuple(alpha), 0.0)
    return coeff * math.prod(math.factorial(e) for e in alpha)
