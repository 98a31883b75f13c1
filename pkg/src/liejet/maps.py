"""Smooth maps on open boxes, diffeomorphism curves, and their jets.

The base space is a single open box in R^m.  A map's components are
runtime expressions in x1..xm (plus t when time-dependent), so evaluating
them over jets produces all needed derivatives; Newton iteration lifted to
the jet ring inverts diffeomorphisms together with every derivative of the
inverse.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DomainError, SingularJacobianError
from .expr import Expr, parse, evaluate, substitute, variables
from .jet import Jet, JetContext, compose, jet_const, jet_var

__all__ = [
    "Domain",
    "SmoothMap",
    "VectorField",
    "DiffeoCurve",
    "compose_maps",
    "inverse_jets",
    "GUARD_BAND",
]

GUARD_BAND = 1e-9
_DET_FLOOR = 1e-13


class Domain:
    """Open axis-aligned box with a floating-point guard band."""

    def __init__(self, bounds):
        self.lo = np.array([b[0] for b in bounds], dtype=np.float64)
        self.hi = np.array([b[1] for b in bounds], dtype=np.float64)
        if np.any(self.lo >= self.hi):
            raise ValueError("each interval needs lo < hi")

    @classmethod
    def cube(cls, m: int, half_width: float = 1.2) -> "Domain":
        return cls([(-half_width, half_width)] * m)

    @property
    def m(self) -> int:
        return self.lo.shape[0]

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        inside = (x > self.lo + GUARD_BAND) & (x < self.hi - GUARD_BAND)
        return np.all(inside, axis=1) & np.all(np.isfinite(x), axis=1)

    def sample(self, rng: np.random.Generator, n: int, margin: float = 0.3) -> np.ndarray:
        lo = self.lo + margin * (self.hi - self.lo) / 2
        hi = self.hi - margin * (self.hi - self.lo) / 2
        return rng.uniform(lo, hi, size=(n, self.m))

    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2

    def to_list(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]

    def __repr__(self) -> str:
        return f"Domain({self.to_list()})"


def _as_batch(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


def jacobian_block(jets: list[Jet], in_dim: int) -> np.ndarray:
    """(batch, n_out, in_dim) array of first-order spatial coefficients."""
    ctx = jets[0].ctx
    batch = jets[0].batch
    J = np.empty((batch, len(jets), in_dim))
    for a, jet in enumerate(jets):
        for i in range(in_dim):
            J[:, a, i] = jet.coeffs[:, ctx.var_rank[i]]
    return J


def time_coefficient(jets: list[Jet], k: int) -> np.ndarray:
    """(batch, n_out) array of k-th pure-time derivatives (k! included)."""
    ctx = jets[0].ctx
    alpha = tuple([0] * ctx.space_dim) + (k,)
    r = ctx.rank[alpha]
    return np.stack([j.coeffs[:, r] for j in jets], axis=1) * ctx.factorials[r]


class SmoothMap:
    """A smooth map of an open box into R^n with expression components."""

    def __init__(
        self,
        components: list[Expr],
        in_dim: int,
        domain: Domain | None,
        time_dependent: bool = False,
    ):
        self.components = list(components)
        self.in_dim = in_dim
        self.out_dim = len(components)
        self.time_dependent = time_dependent
        self.domain = domain if domain is not None else Domain.cube(max(in_dim, 1))
        allowed = {f"x{i + 1}" for i in range(in_dim)}
        if time_dependent:
            allowed.add("t")
        for comp in self.components:
            extra = variables(comp) - allowed
            if extra:
                raise ValueError(f"component uses unknown variables {sorted(extra)}")

    @classmethod
    def from_strings(
        cls,
        sources: list[str],
        in_dim: int,
        domain: Domain | None = None,
        time_dependent: bool = False,
    ) -> "SmoothMap":
        comps = [parse(src, in_dim, allow_time=time_dependent) for src in sources]
        return cls(comps, in_dim, domain, time_dependent)

    # -- evaluation -------------------------------------------------------

    def _env(self, x_values, t_value) -> dict:
        env = {f"x{i + 1}": x_values[i] for i in range(self.in_dim)}
        if self.time_dependent:
            env["t"] = t_value
        return env

    def evaluate(self, t, x, check_domain: bool = True):
        """Numeric evaluation at one point (m,) or a batch (B, m)."""
        xb, single = _as_batch(x)
        if check_domain:
            ok = self.domain.contains(xb)
            if not ok.all():
                if single:
                    raise DomainError(f"point outside domain {self.domain!r}")
                xb = np.where(ok[:, None], xb, np.nan)
        env = self._env([xb[:, i] for i in range(self.in_dim)], t)
        with np.errstate(all="ignore"):
            cols = [np.broadcast_to(np.asarray(evaluate(c, env), dtype=np.float64), (xb.shape[0],))
                    for c in self.components]
        out = np.stack(cols, axis=1)
        return out[0] if single else out

    def eval_jet(self, t_jet: Jet | None, x_jets: list[Jet]) -> list[Jet]:
        env = self._env(x_jets, t_jet)
        return [evaluate(c, env) for c in self.components]

    def jet_at(self, t0: float, x0, order: int, ctx: JetContext | None = None) -> list[Jet]:
        """Full mixed (space, time) jets of every component at (t0, x0)."""
        if ctx is None:
            ctx = JetContext.get(self.in_dim, order)
        xb, _ = _as_batch(x0)
        batch = xb.shape[0]
        x_jets = [jet_var(i, xb[:, i], ctx) for i in range(self.in_dim)]
        t_val = 0.0 if t0 is None else float(t0)
        t_jet = jet_var(ctx.space_dim, np.full(batch, t_val), ctx)
        out = self.eval_jet(t_jet, x_jets)
        return [o if isinstance(o, Jet) else jet_const(o, ctx, batch=batch) for o in out]

    def spatial_jacobian(self, t, x, order: int = 1):
        xb, single = _as_batch(x)
        J = jacobian_block(self.jet_at(t, xb, order), self.in_dim)
        return J[0] if single else J

    def time_derivative(self, t, x, k: int = 1):
        xb, single = _as_batch(x)
        out = time_coefficient(self.jet_at(t, xb, k), k)
        return out[0] if single else out


class VectorField(SmoothMap):
    """A (possibly time-dependent) vector field: a map of the box to R^m."""

    def __init__(self, components, in_dim, domain=None, time_dependent=False):
        super().__init__(components, in_dim, domain, time_dependent)
        if self.out_dim != self.in_dim:
            raise ValueError("a vector field needs one component per dimension")


def compose_maps(outer: SmoothMap, inner: SmoothMap) -> SmoothMap:
    """outer after inner, composed at the expression level."""
    if outer.in_dim != inner.out_dim:
        raise ValueError("dimension mismatch in composition")
    mapping = {f"x{i + 1}": inner.components[i] for i in range(inner.out_dim)}
    comps = [substitute(c, mapping) for c in outer.components]
    return SmoothMap(
        comps,
        inner.in_dim,
        inner.domain,
        time_dependent=outer.time_dependent or inner.time_dependent,
    )


class DiffeoCurve:
    """A time-dependent family of local diffeomorphisms of the box."""

    def __init__(
        self,
        map: SmoothMap,
        time_window: tuple[float, float] = (-0.5, 0.5),
        through_identity: bool = False,
    ):
        if map.in_dim != map.out_dim:
            raise ValueError("a diffeomorphism curve needs in_dim == out_dim")
        self.map = map
        self.time_window = (float(time_window[0]), float(time_window[1]))
        self.through_identity = through_identity

    @classmethod
    def from_strings(
        cls,
        sources: list[str],
        m: int,
        domain: Domain | None = None,
        time_window=(-0.5, 0.5),
        through_identity: bool = False,
    ) -> "DiffeoCurve":
        smap = SmoothMap.from_strings(sources, m, domain, time_dependent=True)
        return cls(smap, time_window, through_identity)

    @property
    def m(self) -> int:
        return self.map.in_dim

    @property
    def domain(self) -> Domain:
        return self.map.domain

    def evaluate(self, t, x, check_domain: bool = True):
        return self.map.evaluate(t, x, check_domain)

    def eval_jet(self, t_jet, x_jets):
        return self.map.eval_jet(t_jet, x_jets)

    def jet_at(self, t0, x0, order, ctx=None):
        return self.map.jet_at(t0, x0, order, ctx)

    def spatial_jacobian(self, t, x):
        return self.map.spatial_jacobian(t, x)

    def time_derivative(self, t, x, k=1):
        return self.map.time_derivative(t, x, k)

    def identity_defect(self, x) -> float:
        xb, _ = _as_batch(x)
        return float(np.max(np.abs(self.evaluate(0.0, xb) - xb)))

    # -- inversion ----------------------------------------------------------

    def invert_at(self, t, y, guess=None, tol=1e-13, max_iter=50):
        """Solve phi_t(x) = y by Newton iteration; default guess is y."""
        return _newton_invert(self, t, y, guess, tol, max_iter)

    def inverse_jet_at(self, t0, y0, order, frozen_time=False, method="newton"):
        """Mixed jets of (t, y) -> phi_t^{-1}(y); `frozen_time` drops the
        t-direction (spatial jets of the time-t0 inverse only)."""
        return inverse_jets(
            self, t0, y0, order, frozen_time=frozen_time, use_poly=(method == "poly")
        )


def _newton_invert(curve, t, y, guess, tol, max_iter):
    yb, single = _as_batch(y)
    x = yb.copy() if guess is None else _as_batch(guess)[0].copy()
    batch = x.shape[0]
    m = curve.m
    converged = np.zeros(batch, dtype=bool)
    for _ in range(max_iter):
        with np.errstate(all="ignore"):
            fx = curve.evaluate(t, x, check_domain=False)
            res = fx - yb
            lane_err = np.max(np.abs(res), axis=1)
        converged = lane_err <= tol
        alive = np.isfinite(lane_err) & ~converged
        if not alive.any():
            break
        J = curve.spatial_jacobian(t, x)
        with np.errstate(all="ignore"):
            dets = np.linalg.det(np.nan_to_num(J))
        singular = np.abs(dets) < _DET_FLOOR
        if singular.any():
            if single:
                raise SingularJacobianError(
                    "singular Jacobian during inversion: not a diffeomorphism here"
                )
            x[singular & alive] = np.nan
            alive &= ~singular
        inside = curve.domain.contains(x)
        if not inside.all():
            if single and not inside[0]:
                raise DomainError("Newton iterate left the domain")
            x[~inside] = np.nan
            alive &= inside
        if not alive.any():
            break
        J_safe = np.where(np.isfinite(J), J, 0.0)
        J_safe[~alive] = np.eye(m)
        res_safe = np.where(alive[:, None], np.nan_to_num(res), 0.0)
        step = np.linalg.solve(J_safe, res_safe[..., None])[..., 0]
        x = x - step
    else:
        with np.errstate(all="ignore"):
            fx = curve.evaluate(t, x, check_domain=False)
            lane_err = np.max(np.abs(fx - yb), axis=1)
        converged = lane_err <= tol * 10
        if single and not converged[0]:
            raise ConvergenceError(f"inversion did not converge in {max_iter} iterations")
        x[~converged] = np.nan
    if single and not np.isfinite(x).all():
        if not curve.domain.contains(yb)[0]:
            raise DomainError("target point outside domain")
        raise ConvergenceError("inversion failed")
    # lazy diffeomorphism check at the solution itself
    with np.errstate(all="ignore"):
        final_det = np.linalg.det(np.nan_to_num(curve.spatial_jacobian(t, x)))
    degenerate = np.abs(final_det) < _DET_FLOOR
    if degenerate.any():
        if single:
            raise SingularJacobianError(
                "spatial Jacobian is singular at the inverse point: not a diffeomorphism here"
            )
        x[degenerate] = np.nan
    return x[0] if single else x


def inverse_jets(curve, t0, y0, order, frozen_time=False, use_poly=False, tol=1e-10):
    """Jets of the inverse map by Newton iteration lifted to the jet ring.

    Solves curve(t, psi(t, y)) = y order by order with the constant
    base-point Jacobian, gaining at least one exact total degree per sweep.
    With ``use_poly`` the forward map is first frozen into its own jet and
    re-evaluations are truncated-polynomial compositions, which is how
    curves without expression components (numerical flows) are inverted.
    """
    yb, single = _as_batch(y0)
    batch = yb.shape[0]
    m = curve.m
    x_star = _as_batch(curve.invert_at(t0, yb))[0]
    ctx = JetContext.get(m, order)
    t_jet = jet_const(np.full(batch, float(t0)), ctx) if frozen_time else jet_var(
        m, np.full(batch, float(t0)), ctx
    )
    targets = [jet_var(i, yb[:, i], ctx) for i in range(m)]
    psi = [jet_const(x_star[:, i], ctx) for i in range(m)]
    J0 = np.atleast_3d(curve.spatial_jacobian(t0, x_star).reshape(batch, m, m))
    with np.errstate(all="ignore"):
        J0inv = np.linalg.inv(np.where(np.isfinite(J0), J0, np.nan))
    poly = curve.jet_at(t0, x_star, order, ctx=ctx) if use_poly else None

    def forward(psi_jets):
        if poly is None:
            return curve.eval_jet(t_jet, psi_jets)
        args = [psi_jets[i] - x_star[:, i] for i in range(m)] + [t_jet - float(t0)]
        return [compose(poly[a], args) for a in range(m)]

    lane_err = None
    for _ in range(order + 2):
        f = forward(psi)
        resid = [f[a] - targets[a] for a in range(m)]
        with np.errstate(all="ignore"):
            lane_err = np.max(
                np.abs(np.stack([r.coeffs for r in resid], axis=0)), axis=(0, 2)
            )
        if np.nanmax(lane_err, initial=0.0) <= tol:
            break
        psi = [
            psi[i] - sum(resid[a] * J0inv[:, i, a] for a in range(m))
            for i in range(m)
        ]
    bad = ~(lane_err <= tol)
    if bad.any():
        if single:
            raise ConvergenceError("jet inversion did not reach tolerance")
        for p in psi:
            p.coeffs[bad] = np.nan
    return psi
