"""Scenario files: schema, validation, execution, and seeded generation.

A scenario file is JSON:

    {"schema": "liejet-scenarios/1",
     "scenarios": [
       {"id": "poly-m2-000", "m": 2, "box": [[-1.2, 1.2], [-1.2, 1.2]],
        "curve": {"kind": "expr", "components": ["x1 + t*(0.1*x2)", "x2"],
                  "time_window": [-0.3, 0.3]},
        "functor": {"p": 0, "q": 1, "w": 0.0},
        "section": ["1", "x1"],
        "t0": [0.0], "k": 1,
        "identities": ["pullback_d1", "pushforward_d1"],
        "points": 20, "seed": 42}]}

Optional scenario fields: ``fields`` ({"x": [..], "y": [..]}) for the
bracket identity, ``naturality`` ({"path", "psi", "k", "scalars"}),
``mutation`` ({"identity", "route"}) for regression fixtures, ``tol_abs``,
``margin``.  A flow curve uses ``{"kind": "flow", "components": [...],
"time_dependent": false}`` and is integrated on demand.

Generation profiles draw identity-plus-perturbation curves whose spatial
Jacobian stays within 0.5 of the identity in sup norm over the box and
window, so invertibility holds everywhere by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .bundles import FunctorSpec
from .calculus import (
    IDENTITY_IDS,
    IdentityReport,
    Tolerances,
    verify_bracket_identity,
    verify_curve_naturality,
    verify_identity_curve_derivative,
    verify_inverse_curve_derivative,
    verify_pullback_derivative,
    verify_pushforward_derivative,
)
from .errors import ConfigError, ExprError
from .expr import parse
from .flows import FlowCurve
from .maps import DiffeoCurve, Domain, SmoothMap, VectorField
from .sections import Section

__all__ = [
    "Scenario",
    "RunOptions",
    "load_config",
    "run_scenario",
    "merge_reports",
    "generate",
    "DEFAULT_ABS_TOL",
    "FUNCTOR_BATTERY",
]

SCHEMA = "liejet-scenarios/1"

DEFAULT_ABS_TOL = {
    "pullback_d1": 1e-7,
    "pushforward_d1": 1e-7,
    "pullback_dk": 1e-6,
    "pushforward_dk": 1e-6,
    "identity_curve_dk": 1e-6,
    "inverse_curve": 1e-8,
    "bracket": 1e-9,
    "curve_naturality": 0.0,  # relative identity, see DEFAULT_REL_TOL
}

DEFAULT_REL_TOL = {"curve_naturality": 1e-9}

FUNCTOR_BATTERY = (
    (0, 0, 0.0),
    (1, 0, 0.0),
    (0, 1, 0.0),
    (1, 1, 0.0),
    (0, 2, 0.0),
    (0, 0, 1.0),
    (0, 0, -1.0),
    (2, 0, 0.5),
)


@dataclass
class RunOptions:
    only: tuple[str, ...] | None = None
    tol_abs: float | None = None
    tol_rel: float | None = None
    fd_oracle: bool = False
    order_margin: int = 0
    tol_scale: float = 1.0

    def to_dict(self) -> dict:
        return {
            "only": list(self.only) if self.only else None,
            "tol_abs": self.tol_abs,
            "tol_rel": self.tol_rel,
            "fd_oracle": self.fd_oracle,
            "order_margin": self.order_margin,
            "tol_scale": self.tol_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunOptions":
        only = d.get("only")
        return cls(
            only=tuple(only) if only else None,
            tol_abs=d.get("tol_abs"),
            tol_rel=d.get("tol_rel"),
            fd_oracle=bool(d.get("fd_oracle", False)),
            order_margin=int(d.get("order_margin", 0)),
            tol_scale=float(d.get("tol_scale", 1.0)),
        )


@dataclass
class Scenario:
    id: str
    m: int
    box: list[list[float]]
    curve: dict | None
    functor: dict | None
    section: list[str] | None
    identities: list[str]
    t0: list[float] = dc_field(default_factory=lambda: [0.0])
    k: int = 1
    points: int = 20
    seed: int = 0
    margin: float = 0.3
    tol_abs: float | None = None
    eps_zero: float = 1e-9
    mutation: dict | None = None
    fields: dict | None = None
    naturality: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "m": self.m,
            "box": self.box,
            "identities": self.identities,
            "t0": self.t0,
            "k": self.k,
            "points": self.points,
            "seed": self.seed,
            "margin": self.margin,
            "eps_zero": self.eps_zero,
        }
        for key in ("curve", "functor", "section", "tol_abs", "mutation", "fields", "naturality"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


def _parse_checked(src: str, dim: int, allow_time: bool, sid: str, where: str):
    try:
        return parse(src, dim, allow_time)
    except ExprError as exc:
        raise ConfigError(
            f"scenario {sid!r}: invalid expression in {where}: {exc}"
        ) from exc


def scenario_from_dict(d: dict) -> Scenario:
    sid = d.get("id")
    if not sid or not isinstance(sid, str):
        raise ConfigError("every scenario needs a string 'id'")
    try:
        m = int(d["m"])
        identities = list(d["identities"])
    except KeyError as exc:
        raise ConfigError(f"scenario {sid!r}: missing field {exc}") from exc
    for ident in identities:
        if ident not in IDENTITY_IDS:
            raise ConfigError(
                f"scenario {sid!r}: unknown identity {ident!r}; known: {', '.join(IDENTITY_IDS)}"
            )
    box = d.get("box") or [[-1.2, 1.2]] * m
    if len(box) != m:
        raise ConfigError(f"scenario {sid!r}: box needs {m} intervals")
    sc = Scenario(
        id=sid,
        m=m,
        box=[[float(a), float(b)] for a, b in box],
        curve=d.get("curve"),
        functor=d.get("functor"),
        section=d.get("section"),
        identities=identities,
        t0=[float(t) for t in d.get("t0", [0.0])],
        k=int(d.get("k", 1)),
        points=int(d.get("points", 20)),
        seed=int(d.get("seed", 0)),
        margin=float(d.get("margin", 0.3)),
        tol_abs=(float(d["tol_abs"]) if "tol_abs" in d and d["tol_abs"] is not None else None),
        eps_zero=float(d.get("eps_zero", 1e-9)),
        mutation=d.get("mutation"),
        fields=d.get("fields"),
        naturality=d.get("naturality"),
    )
    _validate(sc)
    return sc


def _needs_curve(identities) -> bool:
    return any(
        i in ("pullback_d1", "pushforward_d1", "pullback_dk", "pushforward_dk",
              "identity_curve_dk", "inverse_curve")
        for i in identities
    )


def _validate(sc: Scenario) -> None:
    if _needs_curve(sc.identities):
        if not sc.curve or "components" not in sc.curve:
            raise ConfigError(f"scenario {sc.id!r}: curve with components required")
        comps = sc.curve["components"]
        if len(comps) != sc.m:
            raise ConfigError(f"scenario {sc.id!r}: curve needs {sc.m} components")
        kind = sc.curve.get("kind", "expr")
        if kind not in ("expr", "flow"):
            raise ConfigError(f"scenario {sc.id!r}: unknown curve kind {kind!r}")
        time_dep = kind == "expr" or sc.curve.get("time_dependent", False)
        for c in comps:
            _parse_checked(c, sc.m, time_dep, sc.id, "curve")
    needs_section = any(i != "inverse_curve" and i != "curve_naturality" for i in sc.identities)
    if needs_section and _needs_curve(sc.identities) or "bracket" in sc.identities:
        if sc.functor is None or sc.section is None:
            raise ConfigError(f"scenario {sc.id!r}: functor and section required")
        spec = FunctorSpec.from_dict(sc.functor)
        if len(sc.section) != spec.fiber_dim(sc.m):
            raise ConfigError(
                f"scenario {sc.id!r}: section needs {spec.fiber_dim(sc.m)} components"
            )
        for c in sc.section:
            _parse_checked(c, sc.m, False, sc.id, "section")
    if "bracket" in sc.identities:
        if not sc.fields or "x" not in sc.fields or "y" not in sc.fields:
            raise ConfigError(f"scenario {sc.id!r}: bracket needs fields.x and fields.y")
        for key in ("x", "y"):
            comps = sc.fields[key]
            if len(comps) != sc.m:
                raise ConfigError(f"scenario {sc.id!r}: fields.{key} needs {sc.m} components")
            for c in comps:
                _parse_checked(c, sc.m, False, sc.id, f"fields.{key}")
    if "curve_naturality" in sc.identities:
        nat = sc.naturality
        if not nat or "path" not in nat or "psi" not in nat:
            raise ConfigError(f"scenario {sc.id!r}: curve_naturality needs naturality.path/psi")
        if len(nat["path"]) != sc.m or len(nat["psi"]) != sc.m:
            raise ConfigError(f"scenario {sc.id!r}: naturality maps need {sc.m} components")
        for c in nat["path"]:
            _parse_checked(c, 0, True, sc.id, "naturality.path")
        for c in nat["psi"]:
            _parse_checked(c, sc.m, False, sc.id, "naturality.psi")
        for c in nat.get("scalars", []):
            _parse_checked(c, sc.m, False, sc.id, "naturality.scalars")
    if sc.mutation is not None:
        if "identity" not in sc.mutation or "route" not in sc.mutation:
            raise ConfigError(f"scenario {sc.id!r}: mutation needs identity and route")


def load_config(path: str) -> list[Scenario]:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if data.get("schema") != SCHEMA:
        raise ConfigError(f"config schema must be {SCHEMA!r}")
    scenarios = [scenario_from_dict(d) for d in data.get("scenarios", [])]
    if not scenarios:
        raise ConfigError("config contains no scenarios")
    seen = set()
    for sc in scenarios:
        if sc.id in seen:
            raise ConfigError(f"duplicate scenario id {sc.id!r}")
        seen.add(sc.id)
    return scenarios


# -- execution -------------------------------------------------------------------


def _build_curve(sc: Scenario, domain: Domain):
    kind = sc.curve.get("kind", "expr")
    window = tuple(sc.curve.get("time_window", (-0.3, 0.3)))
    if kind == "flow":
        fieldmap = VectorField.from_strings(
            sc.curve["components"], sc.m, domain,
            time_dependent=sc.curve.get("time_dependent", False),
        )
        return FlowCurve(fieldmap, window, tol=float(sc.curve.get("tol", 1e-12)))
    return DiffeoCurve.from_strings(
        sc.curve["components"], sc.m, domain, window,
        through_identity=sc.curve.get("through_identity", False),
    )


def _tolerances(sc: Scenario, identity: str, opts: RunOptions) -> Tolerances:
    abs_tol = DEFAULT_ABS_TOL[identity]
    if sc.tol_abs is not None:
        abs_tol = sc.tol_abs
    if opts.tol_abs is not None:
        abs_tol = opts.tol_abs
    rel_tol = DEFAULT_REL_TOL.get(identity, 0.0)
    if opts.tol_rel is not None:
        rel_tol = opts.tol_rel
    return Tolerances(
        abs_tol=abs_tol * opts.tol_scale,
        rel_tol=rel_tol * opts.tol_scale,
        eps_zero=sc.eps_zero,
        definitional=1e-10 * opts.tol_scale,
    )


def merge_reports(reports: list[IdentityReport]) -> IdentityReport:
    """Collapse per-t0 reports of one (scenario, identity) into one."""
    if len(reports) == 1:
        return reports[0]
    head = reports[0]
    points = [p for r in reports for p in r.points]
    live = [p for p in points if not p.skipped]
    merged = IdentityReport(
        identity=head.identity,
        scenario_id=head.scenario_id,
        t0=head.t0,
        k=head.k,
        tolerances=head.tolerances,
        points=points,
        coverage=len(live) / len(points) if points else 0.0,
        max_abs_err=max((r.max_abs_err for r in reports), default=0.0),
        max_rel_err=max((r.max_rel_err for r in reports), default=0.0),
        passed=all(r.passed for r in reports),
        seed=head.seed,
        meta={"t0_values": [r.t0 for r in reports], **head.meta},
    )
    return merged


def run_scenario(sc: Scenario, opts: RunOptions = RunOptions()) -> list[IdentityReport]:
    domain = Domain(sc.box)
    rng = np.random.default_rng(sc.seed)
    pts = domain.sample(rng, sc.points, sc.margin)
    wanted = [i for i in sc.identities if opts.only is None or i in opts.only]
    curve = _build_curve(sc, domain) if sc.curve and _needs_curve(wanted) else None
    section = None
    if sc.functor is not None and sc.section is not None:
        section = Section.from_strings(
            FunctorSpec.from_dict(sc.functor), sc.section, sc.m, domain
        )
    out: list[IdentityReport] = []
    for identity in wanted:
        tol = _tolerances(sc, identity, opts)
        mutate = None
        if sc.mutation and sc.mutation.get("identity") == identity:
            mutate = sc.mutation["route"]
        common = dict(scenario_id=sc.id, seed=sc.seed, mutate=mutate)
        if identity in ("pullback_d1", "pullback_dk", "pushforward_d1", "pushforward_dk"):
            verify = (
                verify_pullback_derivative
                if identity.startswith("pullback")
                else verify_pushforward_derivative
            )
            k = sc.k if identity.endswith("dk") else 1
            reports = [
                verify(
                    curve, section, t0, pts, tol, k=k,
                    fd_oracle=opts.fd_oracle, order_margin=opts.order_margin, **common,
                )
                for t0 in sc.t0
            ]
            out.append(merge_reports(reports))
        elif identity == "identity_curve_dk":
            out.append(
                verify_identity_curve_derivative(
                    curve, section, sc.k, pts, tol,
                    order_margin=opts.order_margin, **common,
                )
            )
        elif identity == "inverse_curve":
            reports = [
                verify_inverse_curve_derivative(curve, t0, pts, tol, k=sc.k, **common)
                for t0 in sc.t0
            ]
            out.append(merge_reports(reports))
        elif identity == "bracket":
            X = VectorField.from_strings(sc.fields["x"], sc.m, domain)
            Y = VectorField.from_strings(sc.fields["y"], sc.m, domain)
            out.append(verify_bracket_identity(X, Y, section, pts, tol, **common))
        elif identity == "curve_naturality":
            nat = sc.naturality
            path = SmoothMap.from_strings(nat["path"], 0, domain, time_dependent=True)
            psi = SmoothMap.from_strings(nat["psi"], sc.m, domain)
            battery = [parse(s, sc.m) for s in nat.get("scalars", [])]
            out.append(
                verify_curve_naturality(
                    path, psi, int(nat.get("k", sc.k)), tol,
                    scalar_battery=battery, eps_zero=sc.eps_zero, **common,
                )
            )
    return out


# -- generation -------------------------------------------------------------------


_PROFILES = ("poly", "trig", "mixed", "flow", "higher-order-k2", "higher-order-k3")
_T0_CYCLE = (0.0, 0.07, -0.05, 0.11, -0.09, 0.13)


def _fmt(c: float) -> str:
    return f"({c!r})" if c < 0 else repr(c)


def _poly_terms(rng, m: int, max_terms: int, quad: bool = True):
    """Random terms as (source, sup of |value| and |gradient| on the box)."""
    terms = []
    for _ in range(rng.integers(1, max_terms + 1)):
        kind = rng.integers(0, 3 if quad else 2)
        j = int(rng.integers(1, m + 1))
        if kind == 0:
            terms.append(("1", 1.0))
        elif kind == 1:
            terms.append((f"x{j}", 1.2))
        else:
            l = int(rng.integers(1, m + 1))
            src = f"x{j}^2" if l == j else f"x{j}*x{l}"
            terms.append((src, 2.4))
    return terms


def _trig_terms(rng, m: int, max_terms: int):
    terms = []
    for _ in range(rng.integers(1, max_terms + 1)):
        j = int(rng.integers(1, m + 1))
        w = float(np.round(rng.uniform(0.5, 1.8), 3))
        phase = float(np.round(rng.uniform(-0.5, 0.5), 3))
        fn = "sin" if rng.integers(0, 2) == 0 else "cos"
        terms.append((f"{fn}({_fmt(w)}*x{j} + {_fmt(phase)})", max(w, 1.0)))
    return terms


def _perturbation(rng, m: int, style: str, budget: float) -> list[str]:
    """One expression per component; both sup|value| and the summed
    sup|gradient| stay below `budget` on the box."""
    comps = []
    for _ in range(m):
        if style == "poly":
            terms = _poly_terms(rng, m, 3)
        elif style == "trig":
            terms = _trig_terms(rng, m, 2)
        else:
            terms = _poly_terms(rng, m, 2) + _trig_terms(rng, m, 1)
        raw = rng.uniform(-1.0, 1.0, size=len(terms))
        weight = sum(abs(c) * dv for c, (_, dv) in zip(raw, terms))
        scale = budget * rng.uniform(0.5, 1.0) / max(weight, 1e-9)
        parts = [f"{_fmt(float(np.round(c * scale, 6)))}*{src}" for c, (src, _) in zip(raw, terms)]
        comps.append(" + ".join(parts))
    return comps


def _section_components(rng, m: int, spec: FunctorSpec, style: str) -> list[str]:
    comps = []
    for _ in range(spec.fiber_dim(m)):
        terms = [("1", 0.0)] + (
            _trig_terms(rng, m, 1) if style == "trig" else _poly_terms(rng, m, 2)
        )
        raw = np.round(rng.uniform(-1.0, 1.0, size=len(terms)), 6)
        comps.append(" + ".join(f"{_fmt(float(c))}*{src}" for c, (src, _) in zip(raw, terms)))
    return comps


def _curve_components(rng, m: int, style: str) -> list[str]:
    lead = _perturbation(rng, m, style, budget=0.9)
    second = _perturbation(rng, m, "poly", budget=0.5)
    return [
        f"x{i + 1} + t*({lead[i]}) + t^2*({second[i]})"
        for i in range(m)
    ]


def _higher_order_components(rng, m: int, k: int, t0: float, style: str) -> list[str]:
    """psi o (id + (t - t0)^k g), composed at the expression level."""
    from .expr import render
    from .maps import compose_maps

    g = _perturbation(rng, m, style, budget=0.9)
    inner = [f"x{i + 1} + (t - {_fmt(t0)})^{k}*({g[i]})" for i in range(m)]
    psi_comps = _perturbation(rng, m, style, budget=0.35)
    psi_src = [f"x{i + 1} + {psi_comps[i]}" for i in range(m)]
    inner_map = SmoothMap.from_strings(inner, m, time_dependent=True)
    psi_map = SmoothMap.from_strings(psi_src, m)
    return [render(c) for c in compose_maps(psi_map, inner_map).components]


def generate(seed: int, count: int, profile: str, m: int | None = None) -> dict:
    """Deterministically generate `count` scenarios for a profile."""
    if profile not in _PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {', '.join(_PROFILES)}")
    rng = np.random.default_rng(seed)
    scenarios = []
    for idx in range(count):
        dim = m if m is not None else 1 + idx % 3
        p, q, w = FUNCTOR_BATTERY[idx % len(FUNCTOR_BATTERY)]
        spec = FunctorSpec(p, q, w)
        style = {"poly": "poly", "trig": "trig"}.get(profile, "mixed" if profile == "mixed" else "poly")
        if profile == "mixed":
            style = ("poly", "trig", "mixed")[idx % 3]
        t0 = _T0_CYCLE[idx % len(_T0_CYCLE)]
        sid = f"{profile}-m{dim}-{idx:04d}"
        base = {
            "id": sid,
            "m": dim,
            "box": [[-1.2, 1.2]] * dim,
            "functor": spec.to_dict(),
            "section": _section_components(rng, dim, spec, style),
            "points": 20,
            "margin": 0.35,
            "seed": int(rng.integers(0, 2**31 - 1)),
        }
        if profile in ("poly", "trig", "mixed"):
            base["curve"] = {
                "kind": "expr",
                "components": _curve_components(rng, dim, style),
                "time_window": [t0 - 0.25, t0 + 0.25],
            }
            base["t0"] = [t0]
            base["identities"] = ["pullback_d1", "pushforward_d1"]
        elif profile == "flow":
            base["curve"] = {
                "kind": "flow",
                "components": _perturbation(rng, dim, "mixed", budget=0.6),
                "time_dependent": False,
                "time_window": [-0.3, 0.3],
            }
            base["t0"] = [float(np.round(t0 * 0.5, 4))]
            base["identities"] = ["pullback_d1", "pushforward_d1"]
        else:
            k = 2 if profile.endswith("k2") else 3
            base["curve"] = {
                "kind": "expr",
                "components": _higher_order_components(rng, dim, k, t0, style),
                "time_window": [t0 - 0.25, t0 + 0.25],
            }
            base["t0"] = [t0]
            base["k"] = k
            base["identities"] = ["pullback_dk", "pushforward_dk"]
            base["points"] = 12
            base["margin"] = 0.45
        scenarios.append(base)
    return {"schema": SCHEMA, "profile": profile, "seed": seed, "scenarios": scenarios}


def save_config(config: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
