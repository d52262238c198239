"""Exponential-sum approximation of t^{-1/2} and the Kronecker preconditioner.

The inverse square root of a Kronecker-sum matrix is approximated by a short
sum of exponentials; each node contributes one Kronecker product of matrix
exponentials of the two blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import AssembledSystem
from .kron import DiagMap, EigMap, KronOperator, KronTerm, LinearMap
from .lowrank import LowRankMatrix
from . import kron

CERT_GRID = 10_000
CERT_MARGIN = 0.95
MAX_NODES = 512


@dataclass(frozen=True)
class ExpSumApproximation:
    beta: float
    eps: float
    h: float
    i1: int
    i2: int
    lam: float
    Lam: float

    @property
    def r_p(self) -> int:
        return self.i1 + self.i2 + 1

    @property
    def nodes(self) -> np.ndarray:
        """rho_i = e^{ih} for i = -i1 .. i2."""
        return np.exp(np.arange(-self.i1, self.i2 + 1) * self.h)

    @property
    def weights(self) -> np.ndarray:
        """alpha_i(beta) = e^{beta i h} for i = -i1 .. i2."""
        return np.exp(self.beta * np.arange(-self.i1, self.i2 + 1) * self.h)


def step_size(eps: float, beta: float = 0.5) -> float:
    return 2.0 * np.pi / (np.log(3.0) + beta * abs(np.log(np.cos(1.0)))
                          + abs(np.log(eps)))


def _max_rel_error(i1: int, i2: int, h: float, lam: float, Lam: float,
                   n_grid: int) -> float:
    """max over a log grid of |sqrt(t) * Psi_{1/2}(t) - 1|."""
    s = np.linspace(np.log(lam), np.log(Lam), n_grid)
    i = np.arange(-i1, i2 + 1)
    arg = i[None, :] * h + s[:, None]
    g = (h / np.sqrt(np.pi)) * np.exp(-np.exp(arg) + 0.5 * arg).sum(axis=1)
    return float(np.max(np.abs(g - 1.0)))


def expsum_params(eps: float, lam: float, Lam: float,
                  beta: float = 0.5) -> ExpSumApproximation:
    """Smallest number of nodes certifying the relative bound on [lam, Lam].

    The step size follows the a-priori bound; (i1, i2) are grown from zero,
    taking the first pair (smallest total, then smallest i1) that certifies
    the relative error below a slightly tightened tolerance on a log grid.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    if not (0.0 < lam <= Lam):
        raise ValueError("need 0 < lam <= Lam")
    if beta != 0.5:
        raise NotImplementedError("only beta = 1/2 is exercised")
    h = step_size(eps, beta)
    target = CERT_MARGIN * eps
    grid = min(CERT_GRID, 2000) + 1
    for total in range(1, MAX_NODES + 1):
        for i1 in range(total):
            i2 = total - 1 - i1
            if _max_rel_error(i1, i2, h, lam, Lam, grid) <= target:
                approx = ExpSumApproximation(beta, eps, h, i1, i2, lam, Lam)
                if _max_rel_error(i1, i2, h, lam, Lam, CERT_GRID + 1) <= eps:
                    return approx
    raise RuntimeError(
        f"no certified exponential sum with at most {MAX_NODES} nodes "
        f"on [{lam:.3e}, {Lam:.3e}]")


def expsum_eval(approx: ExpSumApproximation, t) -> np.ndarray | float:
    """Psi_beta(t) = (h / Gamma(beta)) sum_i alpha_i exp(-rho_i t)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    val = (approx.h / np.sqrt(np.pi)) * (
        approx.weights[None, :]
        * np.exp(-np.outer(t.ravel(), approx.nodes))).sum(axis=1)
    return float(val[0]) if t.ndim == 0 else val.reshape(t.shape)


@dataclass(frozen=True)
class Preconditioner:
    expsum: ExpSumApproximation
    terms: KronOperator          # r_p Kronecker terms
    mu_eigvals: np.ndarray
    mu_eigvecs: np.ndarray
    z_eigvals: np.ndarray
    z_eigvecs: np.ndarray

    @property
    def r_p(self) -> int:
        return self.expsum.r_p


def _exp_map(eigvals: np.ndarray, eigvecs: np.ndarray, rho: float,
             diagonal: bool) -> LinearMap:
    if diagonal:
        return DiagMap(np.exp(-rho * eigvals))
    return EigMap(eigvecs, np.exp(-rho * eigvals))


def build_preconditioner(approx: ExpSumApproximation,
                         mu_eigvals, mu_eigvecs,
                         z_eigvals, z_eigvecs,
                         mu_diagonal: bool = False) -> Preconditioner:
    """Assemble the r_p Kronecker terms from per-node matrix exponentials.

    Both blocks are given by their symmetric eigendecompositions, computed
    once; node m carries coefficient (h/sqrt(pi)) * alpha_m and the pair of
    exponentials exp(-rho_m * block).
    """
    mu_eigvals = np.asarray(mu_eigvals, dtype=float)
    z_eigvals = np.asarray(z_eigvals, dtype=float)
    if np.min(mu_eigvals) <= 0 or np.min(z_eigvals) <= 0:
        raise ValueError("Kronecker-sum blocks must be positive definite")
    scale = approx.h / np.sqrt(np.pi)
    terms = []
    for alpha, rho in zip(approx.weights, approx.nodes):
        terms.append(KronTerm(
            scale * alpha,
            _exp_map(mu_eigvals, mu_eigvecs, rho, mu_diagonal),
            _exp_map(z_eigvals, z_eigvecs, rho, False),
        ))
    return Preconditioner(approx, KronOperator(terms),
                          mu_eigvals, mu_eigvecs, z_eigvals, z_eigvecs)


def preconditioner_for_system(system: AssembledSystem,
                              eps: float = 0.1) -> Preconditioner:
    mu_diag = system.spec.scheme == "SN"
    approx = expsum_params(eps, system.lam, system.Lam)
    return build_preconditioner(
        approx, system.mu_eigvals, system.mu_eigvecs,
        system.J_hat_z_eigvals, system.J_hat_z_eigvecs,
        mu_diagonal=mu_diag)


def precond_apply(p: Preconditioner, w: LowRankMatrix,
                  round_tol: float = 0.0) -> LowRankMatrix:
    return kron.kron_apply(p.terms, w, round_tol)
