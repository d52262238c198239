"""Operators given by short sums of Kronecker products, applied in factored form.

Vectorization is column-major throughout: for a coefficient matrix ``U`` of
shape (spatial, angular), ``(A_mu kron A_z) vec(U) = vec(A_z U A_mu^T)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .lowrank import LowRankMatrix, canonicalize, rounded_sum, truncated_svd, zeros

MATERIALIZE_LIMIT = 4096


class LinearMap:
    """Square linear map on column blocks of shape (dim, k)."""

    dim: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        return self.apply(np.eye(self.dim))


class IdentityMap(LinearMap):
    def __init__(self, dim: int):
        self.dim = dim

    def apply(self, x):
        return x

    def to_dense(self):
        return np.eye(self.dim)


class DenseMap(LinearMap):
    def __init__(self, a: np.ndarray):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("DenseMap requires a square matrix")
        self.a = a
        self.dim = a.shape[0]

    def apply(self, x):
        return self.a @ x

    def to_dense(self):
        return self.a


class DiagMap(LinearMap):
    def __init__(self, d: np.ndarray):
        self.d = np.asarray(d, dtype=float)
        self.dim = self.d.shape[0]

    def apply(self, x):
        return self.d[:, None] * x

    def to_dense(self):
        return np.diag(self.d)


class CholConjMap(LinearMap):
    """T^{-1} A T^{-T} with T a lower-bidiagonal Cholesky factor.

    T is stored as its two diagonals; the solves are forward/back substitution,
    so the conjugated block is never materialized.
    """

    def __init__(self, t_diag: np.ndarray, t_sub: np.ndarray, a: np.ndarray):
        self.t_diag = np.asarray(t_diag, dtype=float)
        self.t_sub = np.asarray(t_sub, dtype=float)
        self.a = np.asarray(a, dtype=float)
        self.dim = self.t_diag.shape[0]
        if self.a.shape != (self.dim, self.dim):
            raise ValueError("inner matrix size mismatch")

    def _solve_lower(self, b):
        ab = np.zeros((2, self.dim))
        ab[0] = self.t_diag
        ab[1, :-1] = self.t_sub
        return solve_banded((1, 0), ab, b)

    def _solve_upper(self, b):
        ab = np.zeros((2, self.dim))
        ab[0, 1:] = self.t_sub
        ab[1] = self.t_diag
        return solve_banded((0, 1), ab, b)

    def apply(self, x):
        return self._solve_lower(self.a @ self._solve_upper(x))


class EigMap(LinearMap):
    """Q diag(vals) Q^T for an orthogonal Q."""

    def __init__(self, q: np.ndarray, vals: np.ndarray):
        self.q = np.asarray(q, dtype=float)
        self.vals = np.asarray(vals, dtype=float)
        self.dim = self.q.shape[0]

    def apply(self, x):
        return self.q @ (self.vals[:, None] * (self.q.T @ x))


class ComposedMap(LinearMap):
    """Composition maps[0] o maps[1] o ... (applied right to left)."""

    def __init__(self, maps: list[LinearMap]):
        if not maps:
            raise ValueError("empty composition")
        dims = {m.dim for m in maps}
        if len(dims) != 1:
            raise ValueError("dimension mismatch in composition")
        self.maps = list(maps)
        self.dim = maps[0].dim

    def apply(self, x):
        for m in reversed(self.maps):
            x = m.apply(x)
        return x


@dataclass(frozen=True)
class KronTerm:
    coeff: float
    angular: LinearMap
    spatial: LinearMap


class KronOperator:
    """Finite sum of terms coeff * (angular kron spatial)."""

    def __init__(self, terms: list[KronTerm]):
        if not terms:
            raise ValueError("KronOperator needs at least one term")
        self.terms = list(terms)
        self.spatial_dim = terms[0].spatial.dim
        self.angular_dim = terms[0].angular.dim
        for t in terms:
            if t.spatial.dim != self.spatial_dim or t.angular.dim != self.angular_dim:
                raise ValueError("inconsistent term dimensions")
            if not np.isfinite(t.coeff):
                raise ValueError("non-finite term coefficient")

    def __len__(self):
        return len(self.terms)


def kron_apply(op: KronOperator, w: LowRankMatrix,
               round_tol: float = 0.0) -> LowRankMatrix:
    """Apply ``op`` to a factored matrix (spatial rows, angular columns)."""
    if w.rows != op.spatial_dim or w.cols != op.angular_dim:
        raise ValueError("operand dimensions do not match operator")
    if w.rank == 0:
        return zeros(w.rows, w.cols)
    lefts, rights, sigmas = [], [], []
    for t in op.terms:
        lefts.append(t.spatial.apply(w.left))
        rights.append(t.angular.apply(w.right))
        sigmas.append(w.sigma * t.coeff)
    stacked = LowRankMatrix(np.hstack(lefts), np.hstack(rights),
                            np.concatenate(sigmas))
    out = canonicalize(stacked)
    if round_tol > 0.0:
        out = truncated_svd(out, round_tol)
    return out


def materialize(op: KronOperator) -> np.ndarray:
    """Dense matrix acting on vec(U); test oracle only, guarded by size."""
    n = op.spatial_dim * op.angular_dim
    if n > MATERIALIZE_LIMIT:
        raise ValueError(f"materialize refused for size {n} > {MATERIALIZE_LIMIT}")
    out = np.zeros((n, n))
    for t in op.terms:
        out += t.coeff * np.kron(t.angular.to_dense(), t.spatial.to_dense())
    return out


def compose_sandwich(p_half: KronOperator, e: KronOperator) -> KronOperator:
    """Terms of P^{-1/2} E P^{-1/2}, ordered outer node, E term, inner node."""
    if (p_half.spatial_dim != e.spatial_dim
            or p_half.angular_dim != e.angular_dim):
        raise ValueError("operator dimensions do not match")
    terms = []
    for outer in p_half.terms:
        for mid in e.terms:
            for inner in p_half.terms:
                terms.append(KronTerm(
                    outer.coeff * mid.coeff * inner.coeff,
                    ComposedMap([outer.angular, mid.angular, inner.angular]),
                    ComposedMap([outer.spatial, mid.spatial, inner.spatial]),
                ))
    return KronOperator(terms)
