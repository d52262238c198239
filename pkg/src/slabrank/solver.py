"""Preconditioned, rank-controlled Richardson iterations.

Three variants: the plain iteration, the soft-thresholded iteration with an
adaptive threshold, and the variant with inexact residual evaluation that
caps intermediate ranks via a sorted-summation apply routine.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import AssembledSystem
from .expsum import Preconditioner
from .kron import KronOperator, kron_apply
from .lowrank import (LowRankMatrix, canonicalize, diff_norm, frobenius_norm,
                      rounded_sum, soft_threshold, zeros)


def derived_constants(gamma1: float, gamma2: float, eps_sum: float):
    """(gamma1_eps, gamma2_eps, omega_star, rho) for the preconditioned system."""
    if not (0.0 < gamma1 <= gamma2):
        raise ValueError("need 0 < gamma1 <= gamma2")
    if eps_sum >= 1.0:
        raise ValueError("exponential-sum tolerance must be below 1")
    g1e = (1.0 - eps_sum) ** 2 * gamma1
    g2e = (1.0 + eps_sum) ** 2 * gamma2
    omega_star = 2.0 / (g1e + g2e)
    rho = (g2e - g1e) / (g2e + g1e)
    return g1e, g2e, omega_star, rho


@dataclass
class SolverParams:
    eps_target: float
    gamma1_eps: float
    gamma2_eps: float
    omega: float
    rho: float
    delta0: float = 0.1
    theta: float = 0.75
    nu: float = 0.5
    tau1: float | None = None
    tau2: float | None = None
    eta0: float = 0.1
    max_iter: int | None = None

    def __post_init__(self):
        if not (0.0 < self.theta <= 1.0):
            raise ValueError("theta must lie in (0, 1]")
        if not (0.0 < self.nu < 1.0):
            raise ValueError("nu must lie in (0, 1)")
        if not (0.0 < self.omega < 2.0 / self.gamma2_eps):
            raise ValueError("omega out of the admissible range")
        if self.tau1 is None:
            self.tau1 = (1.0 - self.rho) / (4.0 * (3.0 - self.rho))
        if self.tau2 is None:
            self.tau2 = (1.0 - self.rho) / 4.0
        if not (0.0 < self.tau1 < 1.0):
            raise ValueError("tau1 must lie in (0, 1)")
        if not (0.0 < self.tau2 < 0.5 * (1.0 - self.rho)):
            raise ValueError("tau2 must lie in (0, (1 - rho)/2)")
        if self.max_iter is None:
            if self.rho > 0.0:
                expected = np.log(self.eps_target) / np.log(self.rho)
                self.max_iter = 50 * int(np.ceil(max(expected, 1.0)))
            else:
                self.max_iter = 1000

    @classmethod
    def from_gammas(cls, gamma1, gamma2, eps_sum, eps_target, **kw):
        g1e, g2e, omega, rho = derived_constants(gamma1, gamma2, eps_sum)
        return cls(eps_target=eps_target, gamma1_eps=g1e, gamma2_eps=g2e,
                   omega=omega, rho=rho, **kw)


@dataclass
class SolveTrace:
    iterations: list = field(default_factory=list)  # dicts per outer iteration
    converged: bool = True
    n_iter: int = 0
    n_residual_evals: int = 0   # counts the k = 0 evaluation as well
    final_rank: int = 0
    final_residual: float = np.nan
    max_intermediate_rank: int = 0

    def record(self, k, rank, delta, eta, res_norm, wall, halvings=0):
        self.iterations.append(dict(k=k, rank=rank, delta=delta, eta=eta,
                                    res_norm=res_norm, wall=wall,
                                    halvings=halvings))


class KronOperatorAdapter:
    """Wraps a plain KronOperator behind the solver's operator interface."""

    def __init__(self, op: KronOperator):
        self.op = op
        self.shape = (op.spatial_dim, op.angular_dim)

    def apply(self, w: LowRankMatrix) -> LowRankMatrix:
        return kron_apply(self.op, w, 0.0)

    def to_work(self, w: LowRankMatrix) -> LowRankMatrix:
        return w

    def from_work(self, w: LowRankMatrix) -> LowRankMatrix:
        return w


def _as_operator(a):
    if isinstance(a, KronOperator):
        return KronOperatorAdapter(a)
    return a


class TransformedOperator:
    """P^{-1/2} E_hat P^{-1/2} applied in the eigenbases of the two blocks.

    In those orthonormal coordinates every preconditioner factor is diagonal
    and the four system terms are small dense blocks, so one operator
    application costs O((J^2 + N^2) r) while Frobenius norms, singular values
    and hence the whole iteration are unchanged.
    """

    def __init__(self, system: AssembledSystem, precond: Preconditioner):
        self.system = system
        self.precond = precond
        qz = precond.z_eigvecs
        qmu = precond.mu_eigvecs
        self.qz = qz
        self.qmu = qmu
        self._mu_identity = system.spec.scheme == "SN"
        self.shape = (system.spec.J + 1, system.spec.n_angular)

        t_diag, t_sub = system.spatial.T_diag, system.spatial.T_sub
        n = t_diag.shape[0]
        ab = np.zeros((2, n))
        ab[0] = t_diag
        ab[1, :-1] = t_sub

        def conj(a):
            x = scipy.linalg.solve_banded((1, 0), ab, a)
            c = scipy.linalg.solve_banded((1, 0), ab, x.T).T
            return qz.T @ c @ qz

        sp = system.spatial
        ang = system.angular

        def rot_mu(a):
            return a if self._mu_identity else qmu.T @ a @ qmu

        self.e_coeffs = [1.0, 1.0, -1.0, 1.0]
        self.e_spatial = [conj(sp.D_inv_sigma_t), conj(sp.M_z_sigma_t),
                          conj(sp.M_z_sigma_s), conj(sp.B)]
        self.e_angular = [rot_mu(ang.M_mu_mu2), rot_mu(ang.M_mu),
                          rot_mu(ang.S_scatter), rot_mu(ang.M_mu_mu)]

        ex = precond.expsum
        scale = ex.h / np.sqrt(np.pi)
        self.p_coeffs = scale * ex.weights
        self.p_z = np.exp(-np.outer(ex.nodes, precond.z_eigvals))
        self.p_mu = np.exp(-np.outer(ex.nodes, precond.mu_eigvals))
        self.r_p = ex.r_p

    # -- coordinate changes ------------------------------------------------
    def to_work(self, w: LowRankMatrix) -> LowRankMatrix:
        if w.rank == 0:
            return w
        return LowRankMatrix(self.qz.T @ w.left, self.qmu.T @ w.right,
                             w.sigma, w.canonical)

    def from_work(self, w: LowRankMatrix) -> LowRankMatrix:
        if w.rank == 0:
            return w
        return LowRankMatrix(self.qz @ w.left, self.qmu @ w.right,
                             w.sigma, w.canonical)

    # -- building blocks (all exact in factored arithmetic) -----------------
    def _p_stack(self, w: LowRankMatrix) -> LowRankMatrix:
        lefts = [self.p_z[m][:, None] * w.left for m in range(self.r_p)]
        rights = [self.p_mu[m][:, None] * w.right for m in range(self.r_p)]
        sig = np.concatenate([w.sigma * c for c in self.p_coeffs])
        return LowRankMatrix(np.hstack(lefts), np.hstack(rights), sig)

    def _e_stack(self, w: LowRankMatrix) -> LowRankMatrix:
        lefts = [a @ w.left for a in self.e_spatial]
        rights = [a @ w.right for a in self.e_angular]
        sig = np.concatenate([w.sigma * c for c in self.e_coeffs])
        return LowRankMatrix(np.hstack(lefts), np.hstack(rights), sig)

    def _p_single(self, w: LowRankMatrix, m: int) -> LowRankMatrix:
        return LowRankMatrix(self.p_z[m][:, None] * w.left,
                             self.p_mu[m][:, None] * w.right,
                             w.sigma * self.p_coeffs[m])

    def apply_p(self, w: LowRankMatrix) -> LowRankMatrix:
        if w.rank == 0:
            return w
        return canonicalize(self._p_stack(w))

    def apply(self, w: LowRankMatrix) -> LowRankMatrix:
        """Exact application; intermediate canonicalizations are exact and
        only cap the factored rank at min(J+1, N)."""
        if w.rank == 0:
            return w
        w = canonicalize(self._p_stack(w))
        w = canonicalize(self._e_stack(w))
        return canonicalize(self._p_stack(w))

    def apply_inexact(self, w: LowRankMatrix, eta: float) -> LowRankMatrix:
        """Sorted-summation application with guarantee ||exact - result||_F
        <= eta / 2: the r_p^2 node products are formed exactly, the smallest
        prefix (up to a quarter of the guarantee) is dropped, and the rest is
        accumulated in ascending norm order with budgeted truncations."""
        if eta <= 0:
            raise ValueError("eta must be positive")
        if w.rank == 0:
            return zeros(*self.shape)
        target = eta / 2.0
        prods = []
        for m1 in range(self.r_p):
            z = self._e_stack(self._p_single(w, m1))
            for m0 in range(self.r_p):
                prods.append(self._p_single(z, m0))
        taus = np.array([frobenius_norm(p) for p in prods])
        order = np.argsort(taus, kind="stable")
        sorted_taus = taus[order]
        csum = np.cumsum(sorted_taus)
        q0 = int(np.searchsorted(csum, target / 2.0, side="right"))
        total = len(prods)
        if q0 >= total:
            return zeros(*self.shape)
        weights = (total - np.arange(q0, total)) * sorted_taus[q0:]
        denom = 2.0 * float(np.sum(weights))
        acc = canonicalize(prods[order[q0]])
        running = 0.0
        for j in range(q0 + 1, total):
            running += sorted_taus[j]
            zeta = target * running / denom if denom > 0 else 0.0
            nxt = canonicalize(prods[order[j]])
            acc = rounded_sum([acc, nxt], zeta)
        return acc


def materialize_dense(op: TransformedOperator) -> np.ndarray:
    """Dense matrix of the preconditioned operator in work coordinates.

    Column-major vectorization: the spatial index varies fastest. Guarded to
    small systems; intended for dense spectral oracles only.
    """
    nz, nmu = op.shape
    dim = nz * nmu
    if dim > 4096:
        raise ValueError(f"dense materialization capped at dimension 4096, "
                         f"got {dim}")
    p = np.zeros((dim, dim))
    for m in range(op.r_p):
        p += op.p_coeffs[m] * np.kron(np.diag(op.p_mu[m]),
                                      np.diag(op.p_z[m]))
    e = np.zeros((dim, dim))
    for c, az, amu in zip(op.e_coeffs, op.e_spatial, op.e_angular):
        e += c * np.kron(amu.T, az)
    return p @ e @ p


def residual_exact(a, w: LowRankMatrix, f: LowRankMatrix) -> LowRankMatrix:
    if w.rank == 0:
        return f.scaled(-1.0)
    return rounded_sum([a.apply(w), f.scaled(-1.0)], 0.0)


def richardson_plain(a, f: LowRankMatrix, params: SolverParams,
                     round_tol: float = 0.0):
    """Plain preconditioned Richardson iteration, no thresholding."""
    a = _as_operator(a)
    trace = SolveTrace()
    tol = params.gamma1_eps * params.eps_target
    w = zeros(f.rows, f.cols)
    r = f.scaled(-1.0)
    res = frobenius_norm(r)
    trace.n_residual_evals = 1
    k = 0
    t0 = time.perf_counter()
    while res > tol:
        if k >= params.max_iter:
            trace.converged = False
            break
        w = rounded_sum([w, r.scaled(-params.omega)], round_tol)
        r = residual_exact(a, w, f)
        res = frobenius_norm(r)
        trace.n_residual_evals += 1
        k += 1
        trace.record(k, w.rank, None, None, res, time.perf_counter() - t0)
    trace.n_iter = k
    trace.final_rank = w.rank
    trace.final_residual = res
    return w, trace


#: step-stagnation coefficient of the threshold-adaptation rule: the
#: threshold shrinks once the Richardson step gets small relative to the
#: residual, meaning the iteration has converged at the current resolution.
SHRINK_COEFF = 0.13
#: the threshold never drops below this multiple of the current residual:
#: thresholding far below the attainable accuracy only retains noise
#: components of the iterate and inflates the final rank.
THRESHOLD_FLOOR = 3e-3
#: on termination the threshold must also resolve singular-value increments
#: (of size ~ delta / omega per Richardson step) down to a sqrt(eps)
#: fraction of the tolerance; stopping with a larger threshold
#: under-resolves the small singular values the accuracy supports.
THRESHOLD_TERM = 14.0


def _initial_threshold(params: SolverParams, f_norm: float) -> float:
    # the convergence analysis needs delta_0 >= omega * ||F||_F
    return max(params.delta0, params.omega * f_norm)


def _delta_target(res: float, params: SolverParams) -> float:
    """Smallest useful threshold at the current residual level."""
    tol = params.gamma1_eps * params.eps_target
    return max(THRESHOLD_FLOOR * res,
               THRESHOLD_TERM * params.omega * tol
               * np.sqrt(params.eps_target))


def st_solve(a, f: LowRankMatrix, params: SolverParams):
    """Soft-thresholded Richardson iteration with adaptive threshold."""
    a = _as_operator(a)
    trace = SolveTrace()
    tol = params.gamma1_eps * params.eps_target
    w = zeros(f.rows, f.cols)
    r = f.scaled(-1.0)
    res = frobenius_norm(r)
    delta = _initial_threshold(params, res)
    trace.n_residual_evals = 1
    k = 0
    t0 = time.perf_counter()
    while res > tol or delta > _delta_target(res, params):
        if k >= params.max_iter:
            trace.converged = False
            break
        w_next = soft_threshold(rounded_sum([w, r.scaled(-params.omega)], 0.0),
                                delta)
        r = residual_exact(a, w_next, f)
        res = frobenius_norm(r)
        trace.n_residual_evals += 1
        stalled = diff_norm(w_next, w) <= SHRINK_COEFF * res
        if (stalled or res <= tol) and delta > _delta_target(res, params):
            delta *= params.theta
        w = w_next
        k += 1
        trace.record(k, w.rank, delta, None, res, time.perf_counter() - t0)
    trace.n_iter = k
    trace.final_rank = w.rank
    trace.final_residual = res
    return w, trace


def inexact_constants(params: SolverParams) -> tuple[float, float]:
    """Threshold-adaptation constants for the inexact-residual iteration."""
    t1, t2 = params.tau1, params.tau2
    rho, nu, om, g2e = params.rho, params.nu, params.omega, params.gamma2_eps
    b = ((1.0 - rho) * (1.0 - t1) * nu
         / ((1.0 + t2) * (rho + (1.0 + rho) * t2 / (1.0 - t2)) * g2e))
    c = min(
        (1.0 - t1) * t2 * b / ((1.0 + t1 + g2e * b) * om),
        rho * nu * t2 * (1.0 - t1) ** 2
        / ((rho * (1.0 + t1) * (1.0 + t2) + nu * (1.0 - t1) * (1.0 - rho)) * om),
    )
    if b <= 0 or c <= 0:
        raise ValueError("inadmissible parameters: constants not positive")
    return b, c


#: termination threshold of the inexact-residual iteration, as a multiple of
#: tol * sqrt(eps). The inexact variant controls truncation noise through the
#: residual accuracy eta, so its threshold can be driven further down than in
#: the exact iteration, resolving the full set of significant singular values.
THRESHOLD_TERM_INEXACT = 0.05


def st_solve_inexact(a, f: LowRankMatrix, params: SolverParams):
    """Soft-thresholded Richardson with inexact residuals (sorted summation)."""
    a = _as_operator(a)
    _, c_const = inexact_constants(params)
    trace = SolveTrace()
    tol = params.gamma1_eps * params.eps_target
    delta_min = (THRESHOLD_TERM_INEXACT * tol
                 * np.sqrt(params.eps_target))

    def residual(w, eta):
        if w.rank == 0:
            return f.scaled(-1.0)
        w_eta = a.apply_inexact(w, eta)
        trace.max_intermediate_rank = max(trace.max_intermediate_rank,
                                          w_eta.rank)
        return rounded_sum([w_eta, f.scaled(-1.0)], eta / 2.0)

    eta = params.eta0
    w = zeros(f.rows, f.cols)
    r = f.scaled(-1.0)
    res = frobenius_norm(r)
    delta = _initial_threshold(params, res)
    trace.n_residual_evals = 1
    k = 0
    t0 = time.perf_counter()
    while res + eta > tol or delta > delta_min:
        if k >= params.max_iter:
            trace.converged = False
            break
        halvings = 0
        w_next = soft_threshold(rounded_sum([w, r.scaled(-params.omega)], 0.0),
                                delta)
        while (eta > params.tau2 / params.omega * diff_norm(w_next, w)
               and eta > c_const * res):
            eta *= 0.5
            halvings += 1
            r = residual(w, eta)
            res = frobenius_norm(r)
            trace.n_residual_evals += 1
            w_next = soft_threshold(
                rounded_sum([w, r.scaled(-params.omega)], 0.0), delta)
        eta_next = 2.0 * eta
        while True:
            eta_next *= 0.5
            r_next = residual(w_next, eta_next)
            res_next = frobenius_norm(r_next)
            trace.n_residual_evals += 1
            if res_next + eta_next <= tol and delta <= delta_min:
                k += 1
                trace.record(k, w_next.rank, delta, eta_next, res_next,
                             time.perf_counter() - t0, halvings)
                trace.n_iter = k
                trace.final_rank = w_next.rank
                trace.final_residual = res_next
                return w_next, trace
            if eta_next <= params.tau1 * res_next:
                break
        stalled = diff_norm(w_next, w) <= SHRINK_COEFF * res_next
        if stalled or res_next + eta_next <= tol:
            if delta > delta_min:
                delta *= params.theta
            # the residual must resolve components at the threshold scale,
            # otherwise directions near delta are truncated away before the
            # soft threshold can retain them
            eta_next = min(params.tau1 * res_next, params.nu * delta)
        w, r, res, eta = w_next, r_next, res_next, eta_next
        k += 1
        trace.record(k, w.rank, delta, eta, res, time.perf_counter() - t0,
                     halvings)
    trace.n_iter = k
    trace.final_rank = w.rank
    trace.final_residual = res
    return w, trace
