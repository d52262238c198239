"""Convergence studies: assemble, solve, back-transform, and measure errors.

Reproduces the benchmark tables: L2 / graph-norm errors with rates, iteration
counts, and the ranks of the solver output and of its back transformation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .assembly import (AssembledSystem, DiscretizationSpec,
                       angular_basis_values, angular_quadrature, assemble,
                       assemble_load, element_quadrature)
from .cases import ManufacturedCase
from .expsum import Preconditioner, precond_apply, preconditioner_for_system
from .lowrank import LowRankMatrix, canonicalize, from_dense
from .solver import (SolverParams, SolveTrace, TransformedOperator,
                     richardson_plain, st_solve, st_solve_inexact)

#: relative singular-value cutoff when reporting the rank of U
RANK_REPORT_TOL = 1e-14


def pn_order(J: int) -> int:
    """Angular truncation order paired with J elements: the smallest odd
    integer exceeding J^(2/3)."""
    n = int(np.floor(J ** (2.0 / 3.0))) + 1
    return n if n % 2 == 1 else n + 1


def reported_rank(w: LowRankMatrix, rel_tol: float = RANK_REPORT_TOL) -> int:
    if w.rank == 0:
        return 0
    return int(np.count_nonzero(w.sigma >= rel_tol * w.sigma[0]))


def back_transform(system: AssembledSystem, precond: Preconditioner,
                   w: LowRankMatrix) -> LowRankMatrix:
    """Nodal-basis coefficients U = T^{-T} (P^{-1/2} W), in factored form."""
    pw = precond_apply(precond, w, 0.0)
    if pw.rank == 0:
        return pw
    n = system.spec.J + 1
    ab = np.zeros((2, n))
    ab[0] = system.spatial.T_diag
    ab[1, :-1] = system.spatial.T_sub
    # transpose of the lower-bidiagonal factor is upper-bidiagonal
    ab_t = np.zeros((2, n))
    ab_t[1] = system.spatial.T_diag
    ab_t[0, 1:] = system.spatial.T_sub
    left = scipy.linalg.solve_banded((0, 1), ab_t, pw.left)
    return canonicalize(LowRankMatrix(left, pw.right, pw.sigma))


def error_norms(case: ManufacturedCase, spec: DiscretizationSpec,
                u_nodal: LowRankMatrix,
                mu_min_points: int = 0) -> tuple[float, float]:
    """(L2 error, graph-norm error) of the Galerkin coefficients against the
    exact solution, by tensor-product Gauss quadrature."""
    if case.u is None or case.u_z is None:
        raise ValueError(f"case {case.case_id} has no exact solution")
    h = spec.Z / spec.J
    z, wz, elem = element_quadrature(spec, [spec.sigma_t, spec.sigma_s])
    a = (z - elem * h) / h
    mu, wmu = angular_quadrature(spec, mu_min_points)
    hmat = angular_basis_values(spec, mu)

    if u_nodal.rank > 0:
        ls = u_nodal.left * u_nodal.sigma
        az = (1 - a)[:, None] * ls[elem] + a[:, None] * ls[elem + 1]
        daz = (ls[elem + 1] - ls[elem]) / h
        bm = hmat @ u_nodal.right
    else:
        az = daz = np.zeros((z.size, 0))
        bm = np.zeros((mu.size, 0))

    err_l2_sq = 0.0
    err_dz_sq = 0.0
    block = max(1, 2 ** 22 // max(mu.size, 1))
    for s in range(0, z.size, block):
        sl = slice(s, min(s + block, z.size))
        zc = z[sl][:, None]
        diff = case.u(zc, mu[None, :]) - az[sl] @ bm.T
        err_l2_sq += wz[sl] @ (diff ** 2) @ wmu
        ddiff = case.u_z(zc, mu[None, :]) - daz[sl] @ bm.T
        err_dz_sq += wz[sl] @ (ddiff ** 2) @ (wmu * mu ** 2)
    return float(np.sqrt(err_l2_sq)), float(np.sqrt(err_l2_sq + err_dz_sq))


@dataclass
class ConvergenceRow:
    J: int
    N: int
    n_it: int = 0
    err_l2: Optional[float] = None
    rate_l2: Optional[float] = None
    err_w2g: Optional[float] = None
    rate_w2g: Optional[float] = None
    rank_w: int = 0
    rank_u: int = 0
    r_inexact: Optional[int] = None
    r_naive: Optional[int] = None
    converged: bool = True
    error: Optional[str] = None
    trace: Optional[SolveTrace] = field(default=None, repr=False)


def make_spec(case: ManufacturedCase, scheme: str, J: int) -> DiscretizationSpec:
    n = pn_order(J) if scheme == "PN" else J
    return DiscretizationSpec(scheme, J, n, case.Z, case.sigma_t, case.sigma_s)


def solve_case(case: ManufacturedCase, spec: DiscretizationSpec,
               eps_target: float, algorithm: str = "st",
               eps_sum: float = 0.1, mu_min_points: int = 0,
               **param_overrides) -> ConvergenceRow:
    """Assemble and solve one (J, N) configuration, returning a table row."""
    system = assemble(spec)
    precond = preconditioner_for_system(system, eps_sum)
    op = TransformedOperator(system, precond)
    params = SolverParams.from_gammas(system.gamma1, system.gamma2, eps_sum,
                                      eps_target, **param_overrides)
    f_hat = assemble_load(spec, system.spatial, case.q, case.g0, case.gZ,
                          mu_min_points=mu_min_points)
    f = op.apply_p(op.to_work(from_dense(f_hat)))
    if algorithm == "st":
        w, trace = st_solve(op, f, params)
    elif algorithm == "st_inexact":
        w, trace = st_solve_inexact(op, f, params)
    elif algorithm == "plain":
        w, trace = richardson_plain(op, f, params)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    w_hat = op.from_work(w)
    u = back_transform(system, precond, w_hat)

    row = ConvergenceRow(J=spec.J, N=spec.N, n_it=trace.n_iter,
                         rank_w=w.rank, rank_u=reported_rank(u),
                         converged=trace.converged, trace=trace)
    if algorithm == "st_inexact":
        row.r_inexact = trace.max_intermediate_rank
        max_rank = max((it["rank"] for it in trace.iterations), default=0)
        row.r_naive = 4 * precond.r_p ** 2 * max_rank
    if case.u is not None:
        row.err_l2, row.err_w2g = error_norms(case, spec, u, mu_min_points)
    return row


def _study_row(case_id: str, scheme: str, J: int, eps: float,
               algorithm: str, eps_sum: float, mu_min_points: int,
               param_overrides: dict) -> ConvergenceRow:
    """One (J, N) row; module-level so process pools can pickle the call."""
    from .cases import manufactured_case
    case = manufactured_case(case_id)
    spec = make_spec(case, scheme, J)
    try:
        return solve_case(case, spec, eps, algorithm, eps_sum,
                          mu_min_points, **param_overrides)
    except Exception as exc:  # record the failure, keep the study going
        return ConvergenceRow(J=spec.J, N=spec.N, converged=False,
                              error=f"{type(exc).__name__}: {exc}")


def _study_row_star(args) -> ConvergenceRow:
    return _study_row(*args)


def run_convergence_study(case: ManufacturedCase, scheme: str,
                          sizes: list[int], tolerance_rule: str = "fixed",
                          algorithm: str = "st", eps_sum: float = 0.1,
                          mu_min_points: int = 0, eps_target: float = None,
                          jobs: int = 1,
                          **param_overrides) -> list[ConvergenceRow]:
    """One table: rows for ascending J, with log2 rates between rows.

    ``eps_target`` overrides the case default under the fixed tolerance
    rule; ``jobs`` > 1 solves rows in parallel worker processes.
    """
    if list(sizes) != sorted(set(sizes)):
        raise ValueError("sizes must be strictly ascending")
    if tolerance_rule not in ("fixed", "scaled_0.1_over_J"):
        raise ValueError(f"unknown tolerance rule {tolerance_rule!r}")

    def row_eps(J):
        if tolerance_rule != "fixed":
            return 0.1 / J
        return case.eps_default if eps_target is None else eps_target

    calls = [(case.case_id, scheme, J, row_eps(J), algorithm, eps_sum,
              mu_min_points, param_overrides) for J in sizes]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_study_row_star, calls))
    else:
        rows = [_study_row(*c) for c in calls]
    for prev, cur in zip(rows, rows[1:]):
        if prev.err_l2 and cur.err_l2:
            cur.rate_l2 = float(np.log2(prev.err_l2 / cur.err_l2))
        if prev.err_w2g and cur.err_w2g:
            cur.rate_w2g = float(np.log2(prev.err_w2g / cur.err_w2g))
    return rows
