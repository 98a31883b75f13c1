"""First-order natural vector bundles: tensor-density functors and their
induced fiber maps.

A functor is described by (p, q, w): p contravariant slots, q covariant
slots, and a real density weight w.  For an invertible Jacobian J of a map
f, the induced fiber map acts on components by

    T^{i..}_{j..}  ->  |det J|^(-w) * J^{i1}_{a1}..J^{ip}_{ap}
                       * (J^{-1})^{b1}_{j1}..(J^{-1})^{bq}_{jq} * T^{a..}_{b..}

so that the pullback of a weight-w density rho along phi picks up the
factor |det D(phi)|^w, and L_X rho = X(rho) + w div(X) rho.  Components are
stored flat in row-major order with the contravariant block first.

This family covers the tangent bundle (1,0,0), the cotangent bundle
(0,1,0), mixed tensors such as endomorphism fields (1,1,0), densities
(0,0,w), and the trivial line bundle (0,0,0).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import SingularJacobianError
from .jet import jabs, jpow

__all__ = ["FunctorSpec", "FiberValue", "induced_map", "check_functoriality", "apply_fiber_map"]


@dataclass(frozen=True)
class FunctorSpec:
    p: int
    q: int
    w: float = 0.0

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("slot counts must be non-negative")

    @property
    def rank(self) -> int:
        return self.p + self.q

    def fiber_dim(self, m: int) -> int:
        return m**self.rank

    def fiber_indices(self, m: int) -> list[tuple[int, ...]]:
        return list(itertools.product(range(m), repeat=self.rank))

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "w": self.w}

    @classmethod
    def from_dict(cls, d: dict) -> "FunctorSpec":
        return cls(int(d["p"]), int(d["q"]), float(d.get("w", 0.0)))


@dataclass
class FiberValue:
    spec: FunctorSpec
    m: int
    components: np.ndarray  # flat, length m**(p+q); batched rows allowed

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=np.float64)
        if self.components.shape[-1] != self.spec.fiber_dim(self.m):
            raise ValueError("component count does not match fiber dimension")


def induced_map(spec: FunctorSpec, J: np.ndarray) -> np.ndarray:
    """Fiber matrix of the induced map for Jacobian J; batched when J is.

    The matrix acts on flat components; it is |det J|^(-w) times the
    Kronecker product of p copies of J with q copies of inv(J)^T.
    """
    J = np.asarray(J, dtype=np.float64)
    batched = J.ndim == 3
    Jb = J if batched else J[None]
    with np.errstate(all="ignore"):
        det = np.linalg.det(np.where(np.isfinite(Jb), Jb, np.nan))
    if np.any(np.abs(det) < 1e-300) or not np.all(np.isfinite(det)):
        if not batched:
            raise SingularJacobianError("induced map needs an invertible Jacobian")
    with np.errstate(all="ignore"):
        factors = [Jb] * spec.p
        if spec.q:
            JinvT = np.swapaxes(np.linalg.inv(Jb), -1, -2)
            factors += [JinvT] * spec.q
        if factors:
            out = reduce(_batched_kron, factors)
        else:
            out = np.ones((Jb.shape[0], 1, 1))
        if spec.w != 0.0:
            out = out * (np.abs(det) ** (-spec.w))[:, None, None]
    return out if batched else out[0]


def _batched_kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    B, n1, m1 = a.shape
    _, n2, m2 = b.shape
    out = np.einsum("bij,bkl->bikjl", a, b)
    return out.reshape(B, n1 * n2, m1 * m2)


def apply_fiber_map(spec: FunctorSpec, A, A_inv, det_A, components):
    """Induced map applied to components over an arbitrary ring.

    ``A`` / ``A_inv`` are m x m row-lists of ring elements (jets or
    numbers), ``det_A`` the determinant, ``components`` the flat fiber
    entries.  This is the jet-pipeline twin of :func:`induced_map`.
    """
    m = len(A)
    idx = spec.fiber_indices(m)
    flat = {multi: components[r] for r, multi in enumerate(idx)}
    weight = None
    if spec.w != 0.0:
        weight = jpow(jabs(det_A), -spec.w)
    out = []
    for out_multi in idx:
        acc = None
        for in_multi in idx:
            term = flat[in_multi]
            for r in range(spec.p):
                term = term * A[out_multi[r]][in_multi[r]]
            for s in range(spec.q):
                term = term * A_inv[in_multi[spec.p + s]][out_multi[spec.p + s]]
            acc = term if acc is None else acc + term
        if acc is None:  # rank-0 fiber
            acc = flat[()]
        if weight is not None:
            acc = acc * weight
        out.append(acc)
    return out


def check_functoriality(spec: FunctorSpec, J1: np.ndarray, J2: np.ndarray, tol: float = 1e-12) -> dict:
    """Composition and identity laws of the induced map, as a small report."""
    J1 = np.asarray(J1, dtype=np.float64)
    J2 = np.asarray(J2, dtype=np.float64)
    m = J1.shape[-1]
    lhs = induced_map(spec, J2 @ J1)
    rhs = induced_map(spec, J2) @ induced_map(spec, J1)
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    comp_err = float(np.max(np.abs(lhs - rhs))) / scale
    ident = induced_map(spec, np.eye(m))
    ident_err = float(np.max(np.abs(ident - np.eye(spec.fiber_dim(m)))))
    return {
        "composition_rel_err": comp_err,
        "identity_err": ident_err,
        "passed": bool(comp_err <= tol and ident_err == 0.0),
    }
