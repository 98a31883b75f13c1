"""Small dense linear algebra over an arbitrary commutative ring.

Matrices are lists of row lists whose entries are anything supporting
``+ - * /`` (floats, numpy arrays, jets).  Cofactor expansion is used
throughout; base dimensions here are tiny (m <= 3 in practice), so the
factorial cost is irrelevant and no pivoting decisions are needed, which
keeps the code valid for jet entries and batched lanes alike.
"""

from __future__ import annotations

__all__ = ["ring_det", "ring_inv", "ring_solve", "ring_matvec"]


def ring_det(mat):
    n = len(mat)
    if n == 1:
        return mat[0][0]
    if n == 2:
        return mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    det = None
    for j in range(n):
        minor = [[mat[r][c] for c in range(n) if c != j] for r in range(1, n)]
        term = mat[0][j] * ring_det(minor)
        if j % 2 == 1:
            term = -term
        det = term if det is None else det + term
    return det


def ring_inv(mat, det=None):
    """Adjugate inverse; returns (inverse, determinant)."""
    n = len(mat)
    if det is None:
        det = ring_det(mat)
    recip = 1.0 / det
    if n == 1:
        return [[recip]], det
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [
                [mat[r][c] for c in range(n) if c != i] for r in range(n) if r != j
            ]
            cof = ring_det(minor)
            if (i + j) % 2 == 1:
                cof = -cof
            inv[i][j] = cof * recip
    return inv, det


def ring_matvec(mat, vec):
    out = []
    for row in mat:
        acc = row[0] * vec[0]
        for c in range(1, len(vec)):
            acc = acc + row[c] * vec[c]
        out.append(acc)
    return out


def ring_solve(mat, vec):
    inv, _ = ring_inv(mat)
    return ring_matvec(inv, vec)
