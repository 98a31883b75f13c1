"""Truncated multivariate Taylor (jet) arithmetic.

A jet over a :class:`JetContext` with ``space_dim = m`` and
``max_order = K`` stores the coefficients of a polynomial in the m space
variables plus one time variable (index ``m``), truncated at total degree
K.  Coefficient ``alpha`` is the Taylor coefficient, so the mixed partial
derivative at the base point is ``alpha! * coefficient``.

Coefficients are kept as a dense ``(batch, n_terms)`` float64 array in
graded-lexicographic rank order; a batch lane is one evaluation point, and
every operation is vectorized across lanes.  Lanes that hit a domain fault
(log of a non-positive value, division by a zero-value jet, ...) are
poisoned with NaN when ``batch > 1``; single-lane jets raise instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ContextMismatchError, JetDomainError

__all__ = [
    "JetContext",
    "Jet",
    "jet_const",
    "jet_var",
    "jet_add",
    "jet_mul",
    "jet_neg",
    "jet_div",
    "jet_elem",
    "extract_derivative",
    "compose",
    "apply_elem",
    "jpow",
    "jabs",
    "ELEM_FUNCTIONS",
]


@dataclass(frozen=True)
class MulTable:
    ii: np.ndarray
    jj: np.ndarray
    oo: np.ndarray
    seg_starts: np.ndarray
    seg_out: np.ndarray


def _graded_indices(n_vars: int, order: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    for deg in range(order + 1):
        block = [
            alpha
            for alpha in itertools.product(range(deg + 1), repeat=n_vars)
            if sum(alpha) == deg
        ]
        out.extend(sorted(block))
    return out


class JetContext:
    """Shared truncation data: dimensions, index ranks, kernel tables."""

    _cache: dict[tuple[int, int], "JetContext"] = {}

    def __init__(self, space_dim: int, max_order: int):
        if space_dim < 1:
            raise ValueError("space_dim must be >= 1")
        if max_order < 0:
            raise ValueError("max_order must be >= 0")
        self.space_dim = space_dim
        self.max_order = max_order
        self.n_vars = space_dim + 1  # trailing variable is time
        self.indices = _graded_indices(self.n_vars, max_order)
        self.n_terms = len(self.indices)
        self.rank = {alpha: r for r, alpha in enumerate(self.indices)}
        self.degrees = np.array([sum(a) for a in self.indices], dtype=np.int64)
        self.factorials = np.array(
            [math.prod(math.factorial(e) for e in a) for a in self.indices],
            dtype=np.float64,
        )
        self.var_rank = [
            self.rank[tuple(1 if i == v else 0 for i in range(self.n_vars))]
            for v in range(self.n_vars)
        ] if max_order >= 1 else []
        self.mul_table = self._build_mul_table()
        self._shift = [self._build_shift(v) for v in range(self.n_vars)]
        self._t_block: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._mono_parent = self._build_mono_parents()

    @classmethod
    def get(cls, space_dim: int, max_order: int) -> "JetContext":
        key = (space_dim, max_order)
        ctx = cls._cache.get(key)
        if ctx is None:
            ctx = cls(space_dim, max_order)
            cls._cache[key] = ctx
        return ctx

    def _build_mul_table(self) -> MulTable:
        ii, jj, oo = [], [], []
        for ra, alpha in enumerate(self.indices):
            da = sum(alpha)
            for rb, beta in enumerate(self.indices):
                if da + sum(beta) > self.max_order:
                    continue
                ii.append(ra)
                jj.append(rb)
                oo.append(self.rank[tuple(a + b for a, b in zip(alpha, beta))])
        order = np.lexsort((np.array(jj), np.array(ii), np.array(oo)))
        ii = np.array(ii, dtype=np.int64)[order]
        jj = np.array(jj, dtype=np.int64)[order]
        oo = np.array(oo, dtype=np.int64)[order]
        seg_starts = np.flatnonzero(np.diff(oo, prepend=-1))
        return MulTable(ii, jj, oo, seg_starts, oo[seg_starts])

    def _build_shift(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        src = np.zeros(self.n_terms, dtype=np.int64)
        scale = np.zeros(self.n_terms, dtype=np.float64)
        for r, alpha in enumerate(self.indices):
            up = list(alpha)
            up[v] += 1
            key = tuple(up)
            if key in self.rank:
                src[r] = self.rank[key]
                scale[r] = up[v]
        return src, scale

    def t_block_table(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        tab = self._t_block.get(j)
        if tab is None:
            t = self.n_vars - 1
            src = np.zeros(self.n_terms, dtype=np.int64)
            keep = np.zeros(self.n_terms, dtype=np.float64)
            for r, alpha in enumerate(self.indices):
                if alpha[t] != 0:
                    continue
                up = list(alpha)
                up[t] = j
                key = tuple(up)
                if key in self.rank:
                    src[r] = self.rank[key]
                    keep[r] = 1.0
            tab = (src, keep)
            self._t_block[j] = tab
        return tab

    def _build_mono_parents(self) -> np.ndarray:
        # parent[r] = (rank of alpha - e_v, v) for the first nonzero slot v
        parent = np.zeros((self.n_terms, 2), dtype=np.int64)
        for r, alpha in enumerate(self.indices):
            if r == 0:
                continue
            v = next(i for i, e in enumerate(alpha) if e > 0)
            down = list(alpha)
            down[v] -= 1
            parent[r] = (self.rank[tuple(down)], v)
        return parent

    def __repr__(self) -> str:
        return f"JetContext(space_dim={self.space_dim}, max_order={self.max_order})"


def _as_lane(value, batch: int):
    """Coerce a scalar or (batch,) array into something broadcastable."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return arr
    if arr.shape == (batch,) or arr.shape == (1,):
        return arr[:, None][:, 0]  # keep 1-d
    raise ValueError(f"cannot broadcast lane data of shape {arr.shape} to batch {batch}")


class Jet:
    """One truncated Taylor expansion per batch lane."""

    __slots__ = ("ctx", "coeffs")

    def __init__(self, ctx: JetContext, coeffs: np.ndarray):
        self.ctx = ctx
        self.coeffs = coeffs

    # -- introspection -----------------------------------------------------

    @property
    def batch(self) -> int:
        return self.coeffs.shape[0]

    def value(self) -> np.ndarray:
        return self.coeffs[:, 0]

    def coeff(self, alpha) -> np.ndarray:
        r = self.ctx.rank.get(tuple(alpha))
        if r is None:
            raise JetDomainError(f"multi-index {tuple(alpha)} exceeds max_order {self.ctx.max_order}")
        return self.coeffs[:, r]

    def copy(self) -> "Jet":
        return Jet(self.ctx, self.coeffs.copy())

    def __repr__(self) -> str:
        return f"Jet({self.ctx!r}, batch={self.batch})"

    # -- arithmetic --------------------------------------------------------

    def _check(self, other: "Jet") -> None:
        if self.ctx is not other.ctx:
            raise ContextMismatchError(
                f"jets from {self.ctx!r} and {other.ctx!r} combined in one operation"
            )

    def _paired(self, other: "Jet") -> tuple[np.ndarray, np.ndarray]:
        a, b = self.coeffs, other.coeffs
        if a.shape[0] != b.shape[0]:
            batch = max(a.shape[0], b.shape[0])
            if a.shape[0] == 1:
                a = np.ascontiguousarray(np.broadcast_to(a, (batch, a.shape[1])))
            elif b.shape[0] == 1:
                b = np.ascontiguousarray(np.broadcast_to(b, (batch, b.shape[1])))
            else:
                raise ValueError("incompatible jet batch sizes")
        return a, b

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            a, b = self._paired(other)
            return Jet(self.ctx, a + b)
        out = self.coeffs.copy()
        out[:, 0] = out[:, 0] + _as_lane(other, self.batch)
        return Jet(self.ctx, out)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.ctx, -self.coeffs)

    def __sub__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            a, b = self._paired(other)
            return Jet(self.ctx, a - b)
        return self + (-np.asarray(other, dtype=np.float64))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            a, b = self._paired(other)
            out = np.zeros_like(a)
            _kernels.mul_into(out, a, b, self.ctx.mul_table)
            return Jet(self.ctx, out)
        lane = _as_lane(other, self.batch)
        if lane.ndim == 1:
            return Jet(self.ctx, self.coeffs * lane[:, None])
        return Jet(self.ctx, self.coeffs * lane)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return self * other.reciprocal()
        lane = _as_lane(other, self.batch)
        if lane.ndim == 1:
            return Jet(self.ctx, self.coeffs / lane[:, None])
        return Jet(self.ctx, self.coeffs / lane)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, r):
        return jpow(self, r)

    # -- calculus ----------------------------------------------------------

    def derivative(self, v: int) -> "Jet":
        """Partial derivative with respect to variable v (index m is time).

        The result is carried in the same context; its total degree
        ``max_order`` coefficients are unknown and set to zero, so it is
        valid one order below the input.
        """
        src, scale = self.ctx._shift[v]
        return Jet(self.ctx, self.coeffs[:, src] * scale)

    def t_block(self, j: int) -> "Jet":
        """The coefficient block of t-degree j, as a time-independent jet.

        For a jet of f(x, t) this is the spatial expansion of the function
        ``x -> (1/j!) * d^j f / dt^j`` at the base time; spatial degrees
        above ``max_order - j`` are unknown and zeroed.
        """
        src, keep = self.ctx.t_block_table(j)
        return Jet(self.ctx, self.coeffs[:, src] * keep)

    def with_zero_value(self) -> "Jet":
        out = self.coeffs.copy()
        out[:, 0] = 0.0
        return Jet(self.ctx, out)

    def convert(self, ctx: JetContext) -> "Jet":
        """Re-express in another context of the same space dimension."""
        if ctx is self.ctx:
            return self.copy()
        if ctx.space_dim != self.ctx.space_dim:
            raise ContextMismatchError("convert cannot change space_dim")
        out = np.zeros((self.batch, ctx.n_terms))
        for r, alpha in enumerate(self.ctx.indices):
            tr = ctx.rank.get(alpha)
            if tr is not None:
                out[:, tr] = self.coeffs[:, r]
        return Jet(ctx, out)

    def reciprocal(self) -> "Jet":
        v = self.value()
        bad = (v == 0.0) | ~np.isfinite(v)
        if bad.any():
            if self.batch == 1:
                raise ZeroDivisionError("division by a jet with zero value")
            v = np.where(bad, np.nan, v)
        K = self.ctx.max_order
        series = np.empty((K + 1, self.batch))
        with np.errstate(all="ignore"):
            series[0] = 1.0 / v
            for k in range(1, K + 1):
                series[k] = -series[k - 1] / v
        return _compose_series(series, self)


# -- constructors -----------------------------------------------------------


def jet_const(c, ctx: JetContext, batch: int | None = None) -> Jet:
    arr = np.atleast_1d(np.asarray(c, dtype=np.float64))
    if batch is None:
        batch = arr.shape[0]
    coeffs = np.zeros((batch, ctx.n_terms))
    coeffs[:, 0] = arr
    return Jet(ctx, coeffs)


def jet_var(v: int, base, ctx: JetContext) -> Jet:
    """The coordinate function of variable v expanded at base (index m is t)."""
    if not 0 <= v < ctx.n_vars:
        raise JetDomainError(f"variable index {v} out of range for {ctx!r}")
    arr = np.atleast_1d(np.asarray(base, dtype=np.float64))
    coeffs = np.zeros((arr.shape[0], ctx.n_terms))
    coeffs[:, 0] = arr
    if ctx.max_order >= 1:
        coeffs[:, ctx.var_rank[v]] = 1.0
    return Jet(ctx, coeffs)


def jet_add(a: Jet, b: Jet) -> Jet:
    return a + b


def jet_mul(a: Jet, b: Jet) -> Jet:
    return a * b


def jet_neg(a: Jet) -> Jet:
    return -a


def jet_div(a: Jet, b: Jet) -> Jet:
    return a / b


def extract_derivative(a: Jet, alpha):
    """alpha! times the coefficient: the mixed partial at the base point.

    ``alpha`` ranges over the m space slots plus the trailing time slot; a
    length-m tuple is padded with time degree 0.  Returns a float for a
    single-lane jet, else the per-lane array.
    """
    alpha = tuple(alpha)
    if len(alpha) == a.ctx.n_vars - 1:
        alpha = alpha + (0,)
    out = a.coeff(alpha) * a.ctx.factorials[a.ctx.rank[alpha]]
    if a.batch == 1:
        return float(out[0])
    return out


# -- elementary functions ----------------------------------------------------


def _compose_series(series: np.ndarray, u: Jet) -> Jet:
    """Horner evaluation of sum_k series[k] * (u - u0)^k in the jet ring."""
    K = u.ctx.max_order
    h = u.with_zero_value()
    res = jet_const(series[K], u.ctx, batch=u.batch)
    for k in range(K - 1, -1, -1):
        res = res * h
        res.coeffs[:, 0] += series[k]
    return res


def _poison(u: Jet, bad: np.ndarray, message: str) -> np.ndarray:
    v = u.value()
    if bad.any():
        if u.batch == 1:
            raise JetDomainError(message)
        return np.where(bad, np.nan, v)
    return v


def _elem_exp(u: Jet) -> Jet:
    v = u.value()
    K = u.ctx.max_order
    series = np.empty((K + 1, u.batch))
    series[0] = np.exp(v)
    for k in range(1, K + 1):
        series[k] = series[k - 1] / k
    return _compose_series(series, u)


def _elem_log(u: Jet) -> Jet:
    v = _poison(u, u.value() <= 0.0, "log of a jet with non-positive value")
    K = u.ctx.max_order
    series = np.empty((K + 1, u.batch))
    with np.errstate(all="ignore"):
        series[0] = np.log(v)
        for k in range(1, K + 1):
            series[k] = (-1.0) ** (k - 1) / (k * v**k)
    return _compose_series(series, u)


def _elem_sin(u: Jet) -> Jet:
    return _trig(u, phase=0)


def _elem_cos(u: Jet) -> Jet:
    return _trig(u, phase=1)


def _trig(u: Jet, phase: int) -> Jet:
    v = u.value()
    K = u.ctx.max_order
    cycle = [np.sin(v), np.cos(v), -np.sin(v), -np.cos(v)]
    series = np.empty((K + 1, u.batch))
    fact = 1.0
    for k in range(K + 1):
        if k > 0:
            fact *= k
        series[k] = cycle[(k + phase) % 4] / fact
    return _compose_series(series, u)


def _elem_pow(u: Jet, r: float) -> Jet:
    v = _poison(u, u.value() <= 0.0, f"pow(jet, {r}) needs a positive value")
    K = u.ctx.max_order
    series = np.empty((K + 1, u.batch))
    with np.errstate(all="ignore"):
        series[0] = v**r
        for k in range(1, K + 1):
            series[k] = series[k - 1] * (r - k + 1) / (k * v)
    return _compose_series(series, u)


def _elem_sqrt(u: Jet) -> Jet:
    return _elem_pow(u, 0.5)


def _elem_abs(u: Jet) -> Jet:
    v = u.value()
    bad = v == 0.0
    if bad.any() and u.batch == 1:
        raise JetDomainError("abs of a jet with zero value is not smooth")
    sign = np.where(v > 0, 1.0, np.where(v < 0, -1.0, np.nan))
    return u * sign


ELEM_FUNCTIONS = {
    "sin": _elem_sin,
    "cos": _elem_cos,
    "exp": _elem_exp,
    "log": _elem_log,
    "sqrt": _elem_sqrt,
    "abs": _elem_abs,
}


def jet_elem(name: str, u: Jet, exponent: float | None = None) -> Jet:
    """Apply an elementary function (sin, cos, exp, log, sqrt, abs, pow)."""
    if name == "pow":
        if exponent is None:
            raise ValueError("pow needs an exponent")
        return jpow(u, exponent)
    fn = ELEM_FUNCTIONS.get(name)
    if fn is None:
        raise ValueError(f"unknown elementary function {name!r}")
    return fn(u)


def jpow(u, r: float):
    """u**r for a jet or plain numeric u; integer exponents stay exact."""
    if not isinstance(u, Jet):
        with np.errstate(all="ignore"):
            return np.asarray(u, dtype=np.float64) ** r
    ri = round(r)
    if r == ri and abs(ri) <= 64:
        ri = int(ri)
        if ri == 0:
            return jet_const(1.0, u.ctx, batch=u.batch)
        base = u if ri > 0 else u.reciprocal()
        out = base
        for _ in range(abs(ri) - 1):
            out = out * base
        return out
    return _elem_pow(u, r)


def jabs(u):
    if isinstance(u, Jet):
        return _elem_abs(u)
    return np.abs(np.asarray(u, dtype=np.float64))


_NUMERIC_ELEM = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


def apply_elem(name: str, u):
    """Elementary function dispatch to jets or numpy values."""
    if isinstance(u, Jet):
        return jet_elem(name, u)
    with np.errstate(all="ignore"):
        return _NUMERIC_ELEM[name](np.asarray(u, dtype=np.float64))


# -- composition -------------------------------------------------------------


def compose(poly: Jet, args: list[Jet]) -> Jet:
    """Evaluate a stored jet, as a polynomial, at jet arguments.

    ``args`` supplies one jet per context variable (m space slots then
    time); each must have zero value, i.e. be the offset from the base
    point ``poly`` was expanded at.  Exact under truncation.
    """
    ctx = args[0].ctx
    if len(args) != poly.ctx.n_vars:
        raise ValueError("compose needs one argument jet per variable")
    batch = max(poly.batch, *(a.batch for a in args))
    monomials: list[Jet | None] = [None] * poly.ctx.n_terms
    acc = jet_const(np.broadcast_to(poly.coeffs[:, 0], (batch,)), ctx, batch=batch)
    for r in range(1, poly.ctx.n_terms):
        pr, v = poly.ctx._mono_parent[r]
        mono = args[v] if pr == 0 else monomials[pr] * args[v]
        monomials[r] = mono
        c = poly.coeffs[:, r]
        if not np.any(c):
            continue
        acc = acc + mono * c
    return acc
