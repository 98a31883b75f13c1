"""liejet: machine verification of pullback/push-forward derivative
identities for tensor-density fields, built on truncated Taylor (jet)
arithmetic, a runtime expression DSL, and RK4 flows.

Set ``LIEJET_NO_NUMBA=1`` to force the pure-numpy multiply kernel.
"""

__version__ = "0.1.0"

from .bundles import FiberValue, FunctorSpec, check_functoriality, induced_map
from .calculus import (
    IDENTITY_IDS,
    IdentityReport,
    Tolerances,
    curve_fields,
    first_nonvanishing_derivative,
    verify_bracket_identity,
    verify_curve_naturality,
    verify_identity_curve_derivative,
    verify_inverse_curve_derivative,
    verify_pullback_derivative,
    verify_pushforward_derivative,
)
from .errors import (
    ConfigError,
    ContextMismatchError,
    ConvergenceError,
    DomainError,
    ExprError,
    JetDomainError,
    LieJetError,
    SingularJacobianError,
)
from .expr import parse, render
from .flows import FlowCurve, FlowResult, flow, flow_curve
from .jet import (
    Jet,
    JetContext,
    extract_derivative,
    jet_add,
    jet_const,
    jet_div,
    jet_elem,
    jet_mul,
    jet_neg,
    jet_var,
)
from .maps import DiffeoCurve, Domain, SmoothMap, VectorField, compose_maps
from .sections import (
    FDScheme,
    Section,
    lie_derivative_analytic,
    lie_derivative_flow,
    pullback_at,
    pushforward_at,
)

__all__ = [
    "__version__",
    "FunctorSpec", "FiberValue", "induced_map", "check_functoriality",
    "Jet", "JetContext", "jet_const", "jet_var", "jet_add", "jet_mul",
    "jet_neg", "jet_div", "jet_elem", "extract_derivative",
    "parse", "render",
    "Domain", "SmoothMap", "VectorField", "DiffeoCurve", "compose_maps",
    "FlowResult", "FlowCurve", "flow", "flow_curve",
    "Section", "FDScheme", "pullback_at", "pushforward_at",
    "lie_derivative_analytic", "lie_derivative_flow",
    "Tolerances", "IdentityReport", "IDENTITY_IDS",
    "curve_fields", "first_nonvanishing_derivative",
    "verify_pullback_derivative", "verify_pushforward_derivative",
    "verify_identity_curve_derivative", "verify_inverse_curve_derivative",
    "verify_bracket_identity", "verify_curve_naturality",
    "LieJetError", "ExprError", "JetDomainError", "DomainError",
    "ContextMismatchError", "SingularJacobianError", "ConvergenceError",
    "ConfigError",
]
