"""Machine verification of the pullback/push-forward derivative identities.

For a curve of local diffeomorphisms phi_t the two adapted time-dependent
vector fields are

    source field  X_t = T(phi_t)^{-1} o d/dt phi_t      (seen at the source)
    target field  Y_t = (d/dt phi_t) o phi_t^{-1}       (seen at the target)

and the first-order identities state, for every tensor-density section s,

    d/dt phi_t^* s  = phi_t^* (L_{Y_t} s) = L_{X_t} (phi_t^* s)
    d/dt (phi_t)_* s = d/dt (phi_t^{-1})^* s
                     = -(phi_t)_* (L_{X_t} s) = -L_{Y_t} ((phi_t)_* s).

When all time derivatives of phi_t below order k vanish at t0, the k-th
derivative (1/k!) d^k/dt^k phi_t is a well defined vector field Xi along
phi_{t0}; with X = T(phi_{t0})^{-1} o Xi and Y = Xi o phi_{t0}^{-1} the
same chains hold for d^k/dt^k with a factor k!.  Each verifier below
computes every expression of one chain through a separate route (jet
transport of the full pullback pipeline, pointwise fiber maps applied to
analytically computed Lie derivatives, Lie formula applied to sampled
sections) and reports per-point disagreements against tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bundles import induced_map
from .errors import ConfigError, LieJetError
from .jet import Jet, JetContext, jet_var
from .maps import VectorField, _as_batch, jacobian_block, time_coefficient
from .ringmat import ring_inv, ring_matvec
from .sections import (
    PushforwardSectionView,
    as_field,
    lie_derivative_analytic,
    lie_formula_jets,
    pullback_at,
    pullback_jets,
    pushforward_at,
    pushforward_jets,
)

__all__ = [
    "Tolerances",
    "PointRecord",
    "IdentityReport",
    "PreconditionError",
    "SourceCurveField",
    "TargetCurveField",
    "CurveTimeBlockField",
    "curve_fields",
    "first_nonvanishing_derivative",
    "verify_pullback_derivative",
    "verify_pushforward_derivative",
    "verify_identity_curve_derivative",
    "verify_inverse_curve_derivative",
    "verify_bracket_identity",
    "verify_curve_naturality",
    "IDENTITY_IDS",
]

IDENTITY_IDS = (
    "pullback_d1",
    "pushforward_d1",
    "pullback_dk",
    "pushforward_dk",
    "identity_curve_dk",
    "curve_naturality",
    "bracket",
    "inverse_curve",
)


class PreconditionError(LieJetError):
    """Lower-order time derivatives did not vanish where required."""


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-7
    rel_tol: float = 0.0
    eps_zero: float = 1e-9
    definitional: float = 1e-10

    def to_dict(self) -> dict:
        return {
            "abs": self.abs_tol,
            "rel": self.rel_tol,
            "eps_zero": self.eps_zero,
            "definitional": self.definitional,
        }


@dataclass
class PointRecord:
    x: list[float]
    values: dict[str, list[float]]
    abs_err: float
    rel_err: float
    ok: bool
    skipped: bool = False

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "values": self.values,
            "abs_err": self.abs_err,
            "rel_err": self.rel_err,
            "ok": self.ok,
            "skipped": self.skipped,
        }


@dataclass
class IdentityReport:
    identity: str
    scenario_id: str
    t0: float
    k: int
    tolerances: Tolerances
    points: list[PointRecord]
    coverage: float
    max_abs_err: float
    max_rel_err: float
    passed: bool
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    CSV_COLUMNS = ("scenario_id", "identity", "max_abs_err", "max_rel_err", "coverage", "passed")
    MIN_COVERAGE = 0.8

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "scenario_id": self.scenario_id,
            "t0": self.t0,
            "k": self.k,
            "tolerances": self.tolerances.to_dict(),
            "seed": self.seed,
            "coverage": self.coverage,
            "max_abs_err": self.max_abs_err,
            "max_rel_err": self.max_rel_err,
            "passed": self.passed,
            "meta": self.meta,
            "points": [p.to_dict() for p in self.points],
        }

    def csv_row(self) -> list:
        return [
            self.scenario_id,
            self.identity,
            repr(self.max_abs_err),
            repr(self.max_rel_err),
            repr(self.coverage),
            str(self.passed).lower(),
        ]


def _apply_mutation(routes: dict[str, np.ndarray], mutate: str | None) -> None:
    """Regression affordance: flip the sign of one route before comparing."""
    if mutate is None:
        return
    if mutate not in routes:
        raise ConfigError(f"unknown mutation target {mutate!r}; routes: {sorted(routes)}")
    routes[mutate] = -routes[mutate]


def _build_report(
    identity: str,
    xs: np.ndarray,
    route_groups: list[dict[str, np.ndarray]],
    tol: Tolerances,
    *,
    scenario_id: str = "",
    t0: float = 0.0,
    k: int = 1,
    seed: int | None = None,
    meta: dict | None = None,
    extra_pass: bool = True,
) -> IdentityReport:
    batch = xs.shape[0]
    points: list[PointRecord] = []
    max_abs = 0.0
    max_rel = 0.0
    n_ok = 0
    n_live = 0
    for lane in range(batch):
        values: dict[str, list[float]] = {}
        abs_err = 0.0
        scale = 0.0
        finite = True
        for group in route_groups:
            arrays = []
            for name, arr in group.items():
                row = np.atleast_2d(arr)[lane]
                values[name] = [float(v) for v in np.atleast_1d(row)]
                arrays.append(np.atleast_1d(row))
                if not np.all(np.isfinite(row)):
                    finite = False
            for i in range(len(arrays)):
                scale = max(scale, float(np.max(np.abs(arrays[i]), initial=0.0)))
                for j in range(i + 1, len(arrays)):
                    abs_err = max(abs_err, float(np.max(np.abs(arrays[i] - arrays[j]), initial=0.0)))
        if not finite:
            points.append(PointRecord(list(map(float, xs[lane])), values, float("nan"), float("nan"), False, skipped=True))
            continue
        rel_err = abs_err / max(scale, 1e-30)
        ok = abs_err <= tol.abs_tol or (tol.rel_tol > 0 and rel_err <= tol.rel_tol)
        n_live += 1
        n_ok += int(ok)
        max_abs = max(max_abs, abs_err)
        max_rel = max(max_rel, rel_err)
        points.append(PointRecord(list(map(float, xs[lane])), values, abs_err, rel_err, ok))
    coverage = n_live / batch if batch else 0.0
    passed = (
        n_live > 0
        and n_ok == n_live
        and coverage >= IdentityReport.MIN_COVERAGE
        and extra_pass
    )
    return IdentityReport(
        identity=identity,
        scenario_id=scenario_id,
        t0=float(t0),
        k=int(k),
        tolerances=tol,
        points=points,
        coverage=coverage,
        max_abs_err=max_abs,
        max_rel_err=max_rel,
        passed=passed,
        seed=seed,
        meta=meta or {},
    )


# -- adapted vector fields -------------------------------------------------------


class SourceCurveField:
    """X = T(phi_t0)^{-1} o Xi at the source, Xi = (1/k!) d^k/dt^k phi."""

    def __init__(self, curve, t0: float, k: int = 1):
        self.curve = curve
        self.t0 = float(t0)
        self.k = int(k)
        self.m = curve.m
        self.domain = curve.domain

    def jets_at(self, x0, ctx: JetContext) -> list[Jet]:
        xb, _ = _as_batch(x0)
        up = JetContext.get(self.m, ctx.max_order + max(self.k, 1))
        F = self.curve.jet_at(self.t0, xb, up.max_order, ctx=up)
        J = [[f.derivative(i).t_block(0) for i in range(self.m)] for f in F]
        xi = [f.t_block(self.k) for f in F]
        inv, _ = ring_inv(J)
        out = ring_matvec(inv, xi)
        return [o.convert(ctx) for o in out]

    def values(self, x) -> np.ndarray:
        xb, single = _as_batch(x)
        jets = self.jets_at(xb, JetContext.get(self.m, 0))
        out = np.stack([j.value() for j in jets], axis=1)
        return out[0] if single else out


class TargetCurveField:
    """Y = Xi o phi_t0^{-1} at the target, Xi = (1/k!) d^k/dt^k phi."""

    def __init__(self, curve, t0: float, k: int = 1):
        self.curve = curve
        self.t0 = float(t0)
        self.k = int(k)
        self.m = curve.m
        self.domain = curve.domain

    def jets_at(self, y0, ctx: JetContext) -> list[Jet]:
        yb, _ = _as_batch(y0)
        up = JetContext.get(self.m, ctx.max_order + self.k)
        psi = self.curve.inverse_jet_at(self.t0, yb, up.max_order, frozen_time=True)
        t_jet = jet_var(self.m, np.full(yb.shape[0], self.t0), up)
        composed = self.curve.eval_jet(t_jet, psi)
        return [c.t_block(self.k).convert(ctx) for c in composed]

    def values(self, y) -> np.ndarray:
        yb, single = _as_batch(y)
        jets = self.jets_at(yb, JetContext.get(self.m, 0))
        out = np.stack([j.value() for j in jets], axis=1)
        return out[0] if single else out


class CurveTimeBlockField:
    """Xi = (1/k!) d^k/dt^k phi_t, a vector field along phi_t0."""

    def __init__(self, curve, t0: float, k: int):
        self.curve = curve
        self.t0 = float(t0)
        self.k = int(k)
        self.m = curve.m
        self.domain = curve.domain

    def jets_at(self, x0, ctx: JetContext) -> list[Jet]:
        xb, _ = _as_batch(x0)
        up = JetContext.get(self.m, ctx.max_order + self.k)
        F = self.curve.jet_at(self.t0, xb, up.max_order, ctx=up)
        return [f.t_block(self.k).convert(ctx) for f in F]

    def values(self, x) -> np.ndarray:
        xb, single = _as_batch(x)
        jets = self.jets_at(xb, JetContext.get(self.m, 0))
        out = np.stack([j.value() for j in jets], axis=1)
        return out[0] if single else out


def curve_fields(curve, t0: float, k: int = 1) -> tuple[SourceCurveField, TargetCurveField]:
    """The adapted source/target fields of a curve at time t0."""
    return SourceCurveField(curve, t0, k), TargetCurveField(curve, t0, k)


def first_nonvanishing_derivative(
    curve,
    t0: float,
    samples,
    k_max: int = 6,
    eps_zero: float = 1e-9,
):
    """Smallest k >= 1 whose time derivative exceeds eps_zero on the samples.

    Returns (k, Xi, magnitudes) with Xi a :class:`CurveTimeBlockField`, or
    (None, None, magnitudes) when every order up to k_max vanishes.
    """
    xb, _ = _as_batch(samples)
    F = curve.jet_at(t0, xb, k_max)
    magnitudes = []
    for j in range(1, k_max + 1):
        dj = time_coefficient(F, j)
        magnitudes.append(float(np.nanmax(np.abs(dj), initial=0.0)))
    for j, mag in enumerate(magnitudes, start=1):
        if mag > eps_zero:
            return j, CurveTimeBlockField(curve, t0, j), magnitudes
    return None, None, magnitudes


def _certify_vanishing(curve, t0, pts, k, eps_zero) -> dict:
    F = curve.jet_at(t0, pts, max(k, 1))
    lower = {}
    for j in range(1, k):
        lower[j] = float(np.nanmax(np.abs(time_coefficient(F, j)), initial=0.0))
    bad = {j: v for j, v in lower.items() if v > eps_zero}
    if bad:
        raise PreconditionError(
            f"order-precondition violated: time derivatives {bad} exceed eps_zero={eps_zero}"
        )
    return {str(j): v for j, v in lower.items()}


def _dt_read(fiber_jets: list[Jet], k: int) -> np.ndarray:
    """k! times the pure-t^k coefficient of each fiber component."""
    return time_coefficient(fiber_jets, k)


def _pointwise_fiber(M: np.ndarray, comps: np.ndarray) -> np.ndarray:
    return np.einsum("bij,bj->bi", M, np.atleast_2d(comps))


def _fd_pullback_dt(curve, section, t0, pts, pull: bool, h: float = 1e-3) -> np.ndarray:
    """Richardson central difference of the pointwise pullback values."""
    op = pullback_at if pull else pushforward_at
    rows = []
    for i in range(2):
        hi = h / 2**i
        plus = op(curve, t0 + hi, section, pts).components
        minus = op(curve, t0 - hi, section, pts).components
        rows.append((plus - minus) / (2 * hi))
    return (4.0 * rows[1] - rows[0]) / 3.0


# -- identity verifiers -----------------------------------------------------------


def verify_pullback_derivative(
    curve,
    section,
    t0: float,
    points,
    tol: Tolerances = Tolerances(),
    k: int = 1,
    *,
    scenario_id: str = "",
    seed: int | None = None,
    mutate: str | None = None,
    fd_oracle: bool = False,
    order_margin: int = 0,
) -> IdentityReport:
    """d^k/dt^k phi_t^* s = k! phi_t0^*(L_Y s) = k! L_X (phi_t0^* s)."""
    pts, _ = _as_batch(points)
    m = curve.m
    spec = section.spec
    meta: dict = {}
    if k > 1:
        meta["lower_order_max"] = _certify_vanishing(curve, t0, pts, k, tol.eps_zero)
    ctx = JetContext.get(m, k + 1 + order_margin)
    fact = float(math.factorial(k))

    G = pullback_jets(curve, t0, section, pts, ctx)
    route_a = _dt_read(G, k)

    source = SourceCurveField(curve, t0, k)
    X_jets = [x.convert(ctx) for x in source.jets_at(pts, JetContext.get(m, 2))]
    G0 = [g.t_block(0) for g in G]
    lie_G = lie_formula_jets(X_jets, G0, spec)
    route_c = fact * np.stack([l.value() for l in lie_G], axis=1)

    target = TargetCurveField(curve, t0, k)
    y_pts = curve.evaluate(t0, pts, check_domain=False)
    lie_s = lie_derivative_analytic(target, section, y_pts).components
    J = curve.spatial_jacobian(t0, pts)
    with np.errstate(all="ignore"):
        M = induced_map(spec, np.linalg.inv(J))
    route_b = fact * _pointwise_fiber(M, lie_s)

    routes = {
        "jet_dt": route_a,
        "pullback_of_target_lie": route_b,
        "source_lie_of_pullback": route_c,
    }
    if fd_oracle and k == 1:
        routes["fd_dt"] = _fd_pullback_dt(curve, section, t0, pts, pull=True)
    _apply_mutation(routes, mutate)
    identity = "pullback_d1" if k == 1 else "pullback_dk"
    return _build_report(
        identity, pts, [routes], tol,
        scenario_id=scenario_id, t0=t0, k=k, seed=seed, meta=meta,
    )


def verify_pushforward_derivative(
    curve,
    section,
    t0: float,
    points,
    tol: Tolerances = Tolerances(),
    k: int = 1,
    *,
    scenario_id: str = "",
    seed: int | None = None,
    mutate: str | None = None,
    fd_oracle: bool = False,
    order_margin: int = 0,
) -> IdentityReport:
    """d^k/dt^k (phi_t)_* s = d^k/dt^k (phi_t^{-1})^* s
    = -k! (phi_t0)_*(L_X s) = -k! L_Y ((phi_t0)_* s)."""
    pts, _ = _as_batch(points)
    m = curve.m
    spec = section.spec
    meta: dict = {}
    if k > 1:
        meta["lower_order_max"] = _certify_vanishing(curve, t0, pts, k, tol.eps_zero)
    ctx = JetContext.get(m, k + 1 + order_margin)
    fact = float(math.factorial(k))

    H = pushforward_jets(curve, t0, section, pts, ctx, method="newton")
    route_a = _dt_read(H, k)
    H2 = pushforward_jets(curve, t0, section, pts, ctx, method="poly")
    route_a2 = _dt_read(H2, k)
    with np.errstate(all="ignore"):
        def_err = float(np.nanmax(np.abs(route_a - route_a2), initial=0.0))
    meta["definitional_max_err"] = def_err

    source = SourceCurveField(curve, t0, k)
    x_src = _as_batch(curve.invert_at(t0, pts))[0]
    lie_s = lie_derivative_analytic(source, section, x_src).components
    J = curve.spatial_jacobian(t0, x_src)
    with np.errstate(all="ignore"):
        M = induced_map(spec, J)
    route_b = -fact * _pointwise_fiber(M, lie_s)

    target = TargetCurveField(curve, t0, k)
    view = PushforwardSectionView(curve, t0, section)
    ctx2 = JetContext.get(m, 2)
    T_jets = view.jets_at(pts, ctx2)
    Y_jets = target.jets_at(pts, ctx2)
    lie_T = lie_formula_jets(Y_jets, T_jets, spec)
    route_c = -fact * np.stack([l.value() for l in lie_T], axis=1)

    routes = {
        "jet_dt": route_a,
        "inverse_pullback_dt": route_a2,
        "pushforward_of_source_lie": route_b,
        "target_lie_of_pushforward": route_c,
    }
    if fd_oracle and k == 1:
        routes["fd_dt"] = _fd_pullback_dt(curve, section, t0, pts, pull=False)
    _apply_mutation(routes, mutate)
    identity = "pushforward_d1" if k == 1 else "pushforward_dk"
    return _build_report(
        identity, pts, [routes], tol,
        scenario_id=scenario_id, t0=t0, k=k, seed=seed, meta=meta,
        extra_pass=(def_err <= tol.definitional) if mutate is None else True,
    )


def verify_identity_curve_derivative(
    curve,
    section,
    k: int,
    points,
    tol: Tolerances = Tolerances(abs_tol=1e-6),
    *,
    scenario_id: str = "",
    seed: int | None = None,
    mutate: str | None = None,
    order_margin: int = 0,
) -> IdentityReport:
    """For a curve through the identity with vanishing orders below k:
    d^k/dt^k|_0 phi_t^* s = k! L_X s with X = (1/k!) d^k/dt^k|_0 phi_t."""
    pts, _ = _as_batch(points)
    m = curve.m
    meta: dict = {}
    defect = curve.identity_defect(pts)
    if defect > 1e-12:
        raise PreconditionError(f"curve is not through the identity (defect {defect:.3e})")
    meta["identity_defect"] = defect
    if k > 1:
        meta["lower_order_max"] = _certify_vanishing(curve, 0.0, pts, k, tol.eps_zero)
    ctx = JetContext.get(m, k + 1 + order_margin)
    fact = float(math.factorial(k))

    G = pullback_jets(curve, 0.0, section, pts, ctx)
    route_a = _dt_read(G, k)

    xi = CurveTimeBlockField(curve, 0.0, k)
    route_b = fact * lie_derivative_analytic(xi, section, pts).components

    routes = {"jet_dt": route_a, "lie_scaled": route_b}
    _apply_mutation(routes, mutate)
    return _build_report(
        "identity_curve_dk", pts, [routes], tol,
        scenario_id=scenario_id, t0=0.0, k=k, seed=seed, meta=meta,
    )


def verify_inverse_curve_derivative(
    curve,
    t0: float,
    points,
    tol: Tolerances = Tolerances(),
    k: int = 1,
    *,
    scenario_id: str = "",
    seed: int | None = None,
    mutate: str | None = None,
) -> IdentityReport:
    """Derivative identities of the inverse curve psi_t = phi_t^{-1}:

    T(phi_t0) o d^k/dt^k psi = -k! Y    and    (d^k/dt^k psi) o phi_t0 = -k! X,
    plus, at k = 1, d/dt psi = -T(phi)^{-1} o (d/dt phi) o phi^{-1} pointwise.
    """
    pts, _ = _as_batch(points)
    m = curve.m
    meta: dict = {}
    if k > 1:
        meta["lower_order_max"] = _certify_vanishing(curve, t0, pts, k, tol.eps_zero)
    fact = float(math.factorial(k))
    source = SourceCurveField(curve, t0, k)
    target = TargetCurveField(curve, t0, k)

    # group 1, at y in target space: T(phi) o d^k psi = -k! Y
    psi = curve.inverse_jet_at(t0, pts, k)
    dk_psi = time_coefficient(psi, k)
    x_star = np.stack([p.value() for p in psi], axis=1)
    J_star = curve.spatial_jacobian(t0, x_star)
    group1 = {
        "target_transport": np.einsum("bij,bj->bi", J_star, dk_psi),
        "target_field": -fact * target.values(pts),
    }

    # group 2, read at y = phi(x): (d^k psi) o phi = -k! X
    y_img = curve.evaluate(t0, pts, check_domain=False)
    psi2 = curve.inverse_jet_at(t0, y_img, k)
    group2 = {
        "source_read": time_coefficient(psi2, k),
        "source_field": -fact * source.values(pts),
    }

    groups = [group1, group2]
    if k == 1:
        dphi = curve.time_derivative(t0, x_star, 1)
        formula = -np.linalg.solve(J_star, dphi[..., None])[..., 0]
        groups.append({"dt_inverse": dk_psi, "formula": formula})
    if mutate is not None:
        done = False
        for g in groups:
            if mutate in g:
                _apply_mutation(g, mutate)
                done = True
                break
        if not done:
            raise ConfigError(f"unknown mutation target {mutate!r}")
    return _build_report(
        "inverse_curve", pts, groups, tol,
        scenario_id=scenario_id, t0=t0, k=k, seed=seed, meta=meta,
    )


def verify_bracket_identity(
    X: VectorField,
    Y: VectorField,
    section,
    points,
    tol: Tolerances = Tolerances(abs_tol=1e-9),
    *,
    scenario_id: str = "",
    seed: int | None = None,
    mutate: str | None = None,
) -> IdentityReport:
    """L_X L_Y s - L_Y L_X s = L_{[X, Y]} s with [X,Y] = X^a d_a Y - Y^a d_a X."""
    pts, _ = _as_batch(points)
    m = X.in_dim
    spec = section.spec
    ctx = JetContext.get(m, 3)
    Xf, Yf = as_field(X), as_field(Y)
    X_jets = Xf.jets_at(pts, ctx)
    Y_jets = Yf.jets_at(pts, ctx)
    T_jets = section.jets_at(pts, ctx)

    inner_Y = lie_formula_jets(Y_jets, T_jets, spec)
    inner_X = lie_formula_jets(X_jets, T_jets, spec)
    nested = [
        a - b
        for a, b in zip(
            lie_formula_jets(X_jets, inner_Y, spec),
            lie_formula_jets(Y_jets, inner_X, spec),
        )
    ]
    route_lhs = np.stack([n.value() for n in nested], axis=1)

    bracket = [
        sum(X_jets[a] * Y_jets[i].derivative(a) - Y_jets[a] * X_jets[i].derivative(a)
            for a in range(m))
        for i in range(m)
    ]
    lie_br = lie_formula_jets(bracket, T_jets, spec)
    route_rhs = np.stack([l.value() for l in lie_br], axis=1)

    routes = {"nested_commutator": route_lhs, "bracket_field_lie": route_rhs}
    _apply_mutation(routes, mutate)
    return _build_report(
        "bracket", pts, [routes], tol,
        scenario_id=scenario_id, t0=0.0, k=1, seed=seed, meta={},
    )


def verify_curve_naturality(
    path,
    psi,
    k: int,
    tol: Tolerances = Tolerances(rel_tol=1e-9, abs_tol=0.0),
    scalar_battery: list | None = None,
    *,
    scenario_id: str = "",
    seed: int | None = None,
    mutate: str | None = None,
    eps_zero: float = 1e-9,
) -> IdentityReport:
    """First non-vanishing velocity of a path is natural under diffeos:

    if c^(j)(0) = 0 for j < k then (psi o c)^(k)(0) = T psi . c^(k)(0),
    and (f o c)^(k)(0) = df(c^(k)(0)) for scalar expressions f.
    """
    m = psi.in_dim
    ctx = JetContext.get(m, k)
    t_jet = jet_var(m, np.zeros(1), ctx)
    c_jets = path.eval_jet(t_jet, [])
    c_jets = [c if isinstance(c, Jet) else t_jet * 0.0 + c for c in c_jets]
    lower = {
        j: float(np.max(np.abs(time_coefficient(c_jets, j))))
        for j in range(1, k)
    }
    bad = {j: v for j, v in lower.items() if v > eps_zero}
    if bad:
        raise PreconditionError(
            f"path derivatives {bad} below order {k} exceed eps_zero={eps_zero}"
        )
    c0 = np.stack([c.value() for c in c_jets], axis=1)
    ck = time_coefficient(c_jets, k)

    psi_c = psi.eval_jet(None, c_jets)
    chain = time_coefficient(psi_c, k)
    Tpsi = psi.spatial_jacobian(None, c0)
    push = np.einsum("bij,bj->bi", Tpsi, ck)
    groups = [{"jet_chain": chain, "jacobian_push": push}]

    for i, f in enumerate(scalar_battery or []):
        f_jet = _ensure_jet(f_eval(f, c_jets), t_jet)
        f_c = time_coefficient([f_jet], k)
        grad = _scalar_gradient(f, c0, m)
        dual = np.einsum("bj,bj->b", grad, ck)[:, None]
        groups.append({f"scalar_{i}_jet": f_c, f"scalar_{i}_derivation": dual})

    if mutate is not None:
        done = False
        for g in groups:
            if mutate in g:
                _apply_mutation(g, mutate)
                done = True
        if not done:
            raise ConfigError(f"unknown mutation target {mutate!r}")
    meta = {"lower_order_max": {str(j): v for j, v in lower.items()}}
    return _build_report(
        "curve_naturality", c0, groups, tol,
        scenario_id=scenario_id, t0=0.0, k=k, seed=seed, meta=meta,
    )


def f_eval(f, x_jets):
    env = {f"x{i + 1}": x_jets[i] for i in range(len(x_jets))}
    from .expr import evaluate

    return evaluate(f, env)


def _ensure_jet(value, like: Jet) -> Jet:
    return value if isinstance(value, Jet) else like * 0.0 + value


def _scalar_gradient(f, x0: np.ndarray, m: int) -> np.ndarray:
    ctx = JetContext.get(m, 1)
    xb = np.atleast_2d(x0)
    x_jets = [jet_var(i, xb[:, i], ctx) for i in range(m)]
    jet = _ensure_jet(f_eval(f, x_jets), x_jets[0])
    return jacobian_block([jet], m)[:, 0, :]
