"""Numerical flows of vector fields.

The integrator is classical RK4 with step-doubling error control: one full
step is compared against two half steps and the step is accepted when the
difference (scaled by 1/15) fits the local error budget.  The step
sequence is a deterministic function of (field, tolerance), so runs are
reproducible bit for bit.

States are lists of per-component values and the right-hand side is
evaluated through the expression ring, so the same stepper transports
plain points and whole jets; transporting spatial identity jets yields the
flow map's Jacobian (and higher space derivatives), while time derivatives
at a reached time come from the Taylor recurrence

    y_{r+1} = (coefficient of tau^r in X(t0 + tau, y)) / (r + 1),

which is exact given the transported state and adds no step-size error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError
from .jet import Jet, JetContext, compose, jet_const, jet_var
from .maps import Domain, VectorField, _as_batch, inverse_jets, jacobian_block, time_coefficient

__all__ = ["FlowResult", "flow", "flow_curve", "FlowCurve"]

MAX_STEPS = 10**6


@dataclass
class FlowResult:
    endpoint: np.ndarray
    steps_taken: int
    est_error: float


def _rhs(field: VectorField, t, state: list, batch: int) -> list:
    out = field.eval_jet(t if field.time_dependent else None, state)
    fixed = []
    for o in out:
        if isinstance(o, Jet) or isinstance(state[0], Jet):
            fixed.append(o if isinstance(o, Jet) else jet_const(o, state[0].ctx, batch=batch))
        else:
            fixed.append(np.broadcast_to(np.asarray(o, dtype=np.float64), (batch,)).copy())
    return fixed


def _rk4_step(field, t, state, h, batch):
    k1 = _rhs(field, t, state, batch)
    k2 = _rhs(field, t + h / 2, [y + k * (h / 2) for y, k in zip(state, k1)], batch)
    k3 = _rhs(field, t + h / 2, [y + k * (h / 2) for y, k in zip(state, k2)], batch)
    k4 = _rhs(field, t + h, [y + k * h for y, k in zip(state, k3)], batch)
    return [
        y + (k1_ + k2_ * 2 + k3_ * 2 + k4_) * (h / 6)
        for y, k1_, k2_, k3_, k4_ in zip(state, k1, k2, k3, k4)
    ]


def _lane_norm(state: list, batch: int) -> np.ndarray:
    """Per-lane max magnitude over components (and jet coefficients)."""
    rows = []
    for s in state:
        arr = s.coeffs if isinstance(s, Jet) else np.asarray(s).reshape(batch, 1)
        rows.append(np.max(np.abs(arr), axis=1))
    return np.max(np.stack(rows, axis=0), axis=0)


def _values(state: list, batch: int) -> np.ndarray:
    cols = [s.value() if isinstance(s, Jet) else np.asarray(s) for s in state]
    return np.stack(cols, axis=1)


def _integrate(field, t0, t1, state, batch, tol, max_steps, fixed_step, domain):
    """Shared stepper over a ring-valued state; returns (state, steps, err)."""
    span = t1 - t0
    if span == 0.0:
        return state, 0, 0.0
    direction = 1.0 if span > 0 else -1.0
    t = t0
    if fixed_step is not None:
        h = abs(fixed_step) * direction
        steps = 0
        while (t1 - t) * direction > 1e-15:
            step_h = direction * min(abs(h), abs(t1 - t))
            state = _rk4_step(field, t, state, step_h, batch)
            t += step_h
            steps += 1
            if steps > max_steps:
                raise ConvergenceError("flow exceeded the step limit")
        return state, steps, float("nan")

    h = span / 8.0
    steps = 0
    est_error = 0.0
    single = batch == 1
    while (t1 - t) * direction > 1e-15:
        h = direction * min(abs(h), abs(t1 - t))
        big = _rk4_step(field, t, state, h, batch)
        mid = _rk4_step(field, t, state, h / 2, batch)
        two = _rk4_step(field, t + h / 2, mid, h / 2, batch)
        with np.errstate(all="ignore"):
            diff = [b - s for b, s in zip(big, two)]
            lane_err = _lane_norm(diff, batch) / 15.0
            err = float(np.nanmax(lane_err, initial=0.0))
        budget = tol * abs(h) / abs(span)
        if not np.isfinite(err):
            err = 0.0  # every surviving lane already poisoned
        if err <= budget:
            state = two
            t += h
            steps += 1
            est_error += err
            if domain is not None:
                vals = _values(state, batch)
                inside = domain.contains(vals)
                if not inside.all():
                    if single:
                        raise DomainError("flow trajectory left the domain")
                    for s in state:
                        if isinstance(s, Jet):
                            s.coeffs[~inside] = np.nan
                        else:
                            s[~inside] = np.nan
                    if not np.isfinite(vals[inside]).all() or not inside.any():
                        break
            if err == 0.0:
                h *= 5.0
            else:
                h *= min(5.0, max(0.2, 0.9 * (budget / err) ** 0.2))
        else:
            h *= max(0.2, 0.9 * (budget / err) ** 0.2)
        if steps > max_steps:
            raise ConvergenceError("flow exceeded the step limit")
    return state, steps, est_error


def flow(
    field: VectorField,
    t0: float,
    t1: float,
    x,
    tol: float = 1e-10,
    max_steps: int = MAX_STEPS,
    fixed_step: float | None = None,
    check_domain: bool = True,
) -> FlowResult:
    """Integrate y' = X(t, y), y(t0) = x up to t1."""
    xb, single = _as_batch(x)
    if check_domain and not field.domain.contains(xb).all():
        raise DomainError("flow initial point outside domain")
    batch = xb.shape[0]
    state = [xb[:, i].copy() for i in range(field.in_dim)]
    domain = field.domain if check_domain else None
    state, steps, err = _integrate(field, t0, t1, state, batch, tol, max_steps, fixed_step, domain)
    endpoint = _values(state, batch)
    return FlowResult(endpoint[0] if single else endpoint, steps, err)


class FlowCurve:
    """The flow of a vector field packaged as a diffeomorphism curve.

    Quacks like :class:`liejet.maps.DiffeoCurve`: evaluation integrates the
    field, mixed jets come from transporting spatial jets and extending in
    time by the Taylor recurrence, and inversion runs Newton against the
    local polynomial model.
    """

    through_identity = True

    def __init__(self, field: VectorField, time_window=(-0.3, 0.3), tol: float = 1e-12):
        self.field = field
        self.time_window = (float(time_window[0]), float(time_window[1]))
        self.tol = tol

    @property
    def m(self) -> int:
        return self.field.in_dim

    @property
    def domain(self) -> Domain:
        return self.field.domain

    def evaluate(self, t, x, check_domain: bool = True):
        return flow(self.field, 0.0, t, x, tol=self.tol, check_domain=check_domain).endpoint

    def jet_at(self, t0, x0, order, ctx: JetContext | None = None) -> list[Jet]:
        if ctx is None:
            ctx = JetContext.get(self.m, order)
        xb, _ = _as_batch(x0)
        batch = xb.shape[0]
        state = [jet_var(i, xb[:, i], ctx) for i in range(self.m)]
        state, _, _ = _integrate(
            self.field, 0.0, t0, state, batch, self.tol, MAX_STEPS, None, self.domain
        )
        # time extension around t0: partial sums in the mixed jet ring
        tau = jet_var(self.m, np.full(batch, float(t0)), ctx) - float(t0)
        t_jet = tau + float(t0)
        series = list(state)
        tau_pow = None
        for r in range(ctx.max_order):
            rhs = _rhs(self.field, t_jet, series, batch)
            tau_pow = tau if tau_pow is None else tau_pow * tau
            series = [
                y + rhs_c.t_block(r) * (1.0 / (r + 1)) * tau_pow
                for y, rhs_c in zip(series, rhs)
            ]
        return series

    def eval_jet(self, t_jet, x_jets: list[Jet]) -> list[Jet]:
        ctx = x_jets[0].ctx
        t0 = float(np.nanmean(t_jet.value())) if isinstance(t_jet, Jet) else float(t_jet)
        base = np.stack([x.value() for x in x_jets], axis=1)
        poly = self.jet_at(t0, base, ctx.max_order, ctx=ctx)
        t_arg = (t_jet - t0) if isinstance(t_jet, Jet) else jet_const(0.0, ctx, batch=x_jets[0].batch)
        args = [x_jets[i] - base[:, i] for i in range(self.m)] + [t_arg]
        return [compose(poly[a], args) for a in range(self.m)]

    def spatial_jacobian(self, t, x):
        xb, single = _as_batch(x)
        J = jacobian_block(self.jet_at(t, xb, 1), self.m)
        return J[0] if single else J

    def time_derivative(self, t, x, k: int = 1):
        xb, single = _as_batch(x)
        out = time_coefficient(self.jet_at(t, xb, k), k)
        return out[0] if single else out

    def identity_defect(self, x) -> float:
        return 0.0

    def invert_at(self, t, y, guess=None, tol: float = 1e-13, max_iter: int = 50):
        yb, single = _as_batch(y)
        out = flow(self.field, t, 0.0, yb, tol=self.tol, check_domain=True).endpoint
        return out[0] if single else out

    def inverse_jet_at(self, t0, y0, order, frozen_time=False, method="poly"):
        return inverse_jets(self, t0, y0, order, frozen_time=frozen_time, use_poly=True)


def flow_curve(field: VectorField, time_window=(-0.3, 0.3), tol: float = 1e-12) -> FlowCurve:
    return FlowCurve(field, time_window, tol)
