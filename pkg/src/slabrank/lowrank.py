"""Factored low-rank matrices: canonicalization, truncation, soft thresholding.

A matrix is stored as ``left @ diag(sigma) @ right.T``. In canonical form the
factor columns are orthonormal and ``sigma`` is positive and nonincreasing,
i.e. the representation is a thin SVD. All operations are pure; instances are
never mutated after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Relative floor below which singular values are treated as zero.
RANK_FLOOR = 1e-14


@dataclass(frozen=True)
class LowRankMatrix:
    left: np.ndarray   # (rows, r)
    right: np.ndarray  # (cols, r)
    sigma: np.ndarray  # (r,)
    canonical: bool = False

    @property
    def rows(self) -> int:
        return self.left.shape[0]

    @property
    def cols(self) -> int:
        return self.right.shape[0]

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def todense(self) -> np.ndarray:
        """Materialize the full matrix. Intended for small sizes and oracles."""
        return (self.left * self.sigma) @ self.right.T

    def scaled(self, a: float) -> "LowRankMatrix":
        """Scalar multiple; the sign is absorbed into the left factor."""
        if a == 0.0 or self.rank == 0:
            return zeros(self.rows, self.cols)
        if a > 0:
            return LowRankMatrix(self.left, self.right, self.sigma * a, self.canonical)
        return LowRankMatrix(-self.left, self.right, self.sigma * (-a), False)


def zeros(rows: int, cols: int) -> LowRankMatrix:
    return LowRankMatrix(
        np.zeros((rows, 0)), np.zeros((cols, 0)), np.zeros(0), canonical=True
    )


def from_dense(a: np.ndarray) -> LowRankMatrix:
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > (RANK_FLOOR * s[0] if s.size and s[0] > 0 else 0.0)
    return _fix_signs(LowRankMatrix(u[:, keep], vt[keep].T, s[keep], canonical=True))


def from_factors(left: np.ndarray, right: np.ndarray,
                 sigma: np.ndarray | None = None) -> LowRankMatrix:
    """Wrap raw factors ``left @ diag(sigma) @ right.T`` without canonicalizing."""
    left = np.atleast_2d(np.asarray(left, dtype=float))
    right = np.atleast_2d(np.asarray(right, dtype=float))
    if sigma is None:
        sigma = np.ones(left.shape[1])
    return LowRankMatrix(left, right, np.asarray(sigma, dtype=float))


def _fix_signs(w: LowRankMatrix) -> LowRankMatrix:
    """Make the first nonzero entry of each left column positive."""
    if w.rank == 0:
        return w
    left = w.left.copy()
    right = w.right.copy()
    for k in range(left.shape[1]):
        col = left[:, k]
        nz = np.nonzero(np.abs(col) > RANK_FLOOR * np.max(np.abs(col)))[0]
        if nz.size and col[nz[0]] < 0:
            left[:, k] = -col
            right[:, k] = -right[:, k]
    return LowRankMatrix(left, right, w.sigma, w.canonical)


def canonicalize(w: LowRankMatrix) -> LowRankMatrix:
    """Return the canonical (thin-SVD) form of the same matrix.

    Thin QR of both factor blocks followed by an SVD of the small core;
    the full matrix is never formed. Singular values below
    ``RANK_FLOOR * sigma_max`` are dropped.
    """
    if not (np.all(np.isfinite(w.left)) and np.all(np.isfinite(w.right))
            and np.all(np.isfinite(w.sigma))):
        raise ValueError("non-finite entries in low-rank factors")
    if w.rank == 0:
        return zeros(w.rows, w.cols)
    if w.canonical:
        return w
    q1, r1 = np.linalg.qr(w.left)
    q2, r2 = np.linalg.qr(w.right)
    core = (r1 * w.sigma) @ r2.T
    u, s, vt = np.linalg.svd(core, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return zeros(w.rows, w.cols)
    keep = s > RANK_FLOOR * s[0]
    out = LowRankMatrix(q1 @ u[:, keep], q2 @ vt[keep].T, s[keep], canonical=True)
    return _fix_signs(out)


def truncated_svd(w: LowRankMatrix, tol: float) -> LowRankMatrix:
    """Smallest-rank truncation with Frobenius tail norm at most ``tol``."""
    if tol < 0:
        raise ValueError("truncation tolerance must be nonnegative")
    if not w.canonical:
        w = canonicalize(w)
    if w.rank == 0 or tol == 0.0:
        return w
    tails = np.sqrt(np.cumsum(w.sigma[::-1] ** 2))[::-1]  # tails[k] = ||sigma[k:]||
    idx = np.nonzero(tails <= tol)[0]
    keep = int(idx[0]) if idx.size else w.rank
    if keep == w.rank:
        return w
    if keep == 0:
        return zeros(w.rows, w.cols)
    return LowRankMatrix(w.left[:, :keep], w.right[:, :keep], w.sigma[:keep],
                         canonical=True)


def soft_threshold(w: LowRankMatrix, delta: float) -> LowRankMatrix:
    """Shrink every singular value by ``delta``, dropping the clipped ones."""
    if delta < 0:
        raise ValueError("threshold must be nonnegative")
    if not w.canonical:
        w = canonicalize(w)
    if delta == 0.0 or w.rank == 0:
        return w
    s = w.sigma - delta
    keep = s > 0
    if not np.any(keep):
        return zeros(w.rows, w.cols)
    return LowRankMatrix(w.left[:, keep], w.right[:, keep], s[keep], canonical=True)


def rounded_sum(terms: list[LowRankMatrix], tol: float = 0.0) -> LowRankMatrix:
    """Sum of factored matrices, canonicalized and truncated to ``tol``."""
    if not terms:
        raise ValueError("empty term list")
    rows, cols = terms[0].rows, terms[0].cols
    for t in terms:
        if (t.rows, t.cols) != (rows, cols):
            raise ValueError("dimension mismatch in rounded_sum")
    stacked = LowRankMatrix(
        np.hstack([t.left for t in terms]),
        np.hstack([t.right for t in terms]),
        np.concatenate([t.sigma for t in terms]),
    )
    out = canonicalize(stacked)
    if tol > 0.0:
        out = truncated_svd(out, tol)
    return out


def frobenius_norm(w: LowRankMatrix) -> float:
    if w.rank == 0:
        return 0.0
    if w.canonical:
        return float(np.sqrt(np.sum(w.sigma ** 2)))
    gl = (w.left * w.sigma).T @ (w.left * w.sigma)
    gr = w.right.T @ w.right
    return float(np.sqrt(max(np.sum(gl * gr), 0.0)))


def frobenius_inner(w: LowRankMatrix, v: LowRankMatrix) -> float:
    """Frobenius inner product <W, V> computed in factored form."""
    if w.rank == 0 or v.rank == 0:
        return 0.0
    gl = (w.left * w.sigma).T @ (v.left * v.sigma)
    gr = w.right.T @ v.right
    return float(np.sum(gl * gr))


def diff_norm(w: LowRankMatrix, v: LowRankMatrix) -> float:
    """||W - V||_F without forming the difference."""
    val = (frobenius_norm(w) ** 2 + frobenius_norm(v) ** 2
           - 2.0 * frobenius_inner(w, v))
    return float(np.sqrt(max(val, 0.0)))
