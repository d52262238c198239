"""Richardson variants against dense oracles on small systems."""

import numpy as np
import pytest

from slabrank.assembly import DiscretizationSpec, analytic, assemble, \
    assemble_load
from slabrank.cases import manufactured_case
from slabrank.expsum import preconditioner_for_system
from slabrank.lowrank import (diff_norm, from_dense, frobenius_norm,
                              rounded_sum, soft_threshold, zeros)
from slabrank.solver import (SolverParams, TransformedOperator,
                             derived_constants, inexact_constants,
                             materialize_dense, residual_exact,
                             richardson_plain, st_solve, st_solve_inexact)


def small_problem(J=8, N=4, scheme="SN", eps_sum=0.1, eps_target=1e-7):
    case = manufactured_case("TC1")
    n = N if scheme == "SN" else 2 * N + 1
    spec = DiscretizationSpec(scheme, J, n, case.Z, case.sigma_t, case.sigma_s)
    system = assemble(spec)
    precond = preconditioner_for_system(system, eps_sum)
    op = TransformedOperator(system, precond)
    params = SolverParams.from_gammas(system.gamma1, system.gamma2,
                                      eps_sum, eps_target)
    f_hat = assemble_load(spec, system.spatial, case.q, case.g0, case.gZ)
    f = op.apply_p(op.to_work(from_dense(f_hat)))
    return op, f, params


def dense_solution(op, f):
    a = materialize_dense(op)
    x = np.linalg.solve(a, f.todense().flatten(order="F"))
    return x.reshape(op.shape, order="F")


def test_derived_constants_formulas():
    g1e, g2e, omega, rho = derived_constants(1.0, 4.0, 0.1)
    assert g1e == pytest.approx(0.81)
    assert g2e == pytest.approx(4.84)
    assert omega == pytest.approx(2.0 / (0.81 + 4.84))
    assert rho == pytest.approx((4.84 - 0.81) / (4.84 + 0.81))
    with pytest.raises(ValueError):
        derived_constants(-1.0, 4.0, 0.1)
    with pytest.raises(ValueError):
        derived_constants(4.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        derived_constants(1.0, 4.0, 1.0)


def test_solver_params_validation():
    kw = dict(eps_target=1e-7, gamma1_eps=0.8, gamma2_eps=4.8,
              omega=0.35, rho=0.7)
    p = SolverParams(**kw)
    assert p.tau1 == pytest.approx((1 - 0.7) / (4 * (3 - 0.7)))
    assert p.tau2 == pytest.approx((1 - 0.7) / 4)
    assert p.max_iter == 50 * int(np.ceil(np.log(1e-7) / np.log(0.7)))
    with pytest.raises(ValueError):
        SolverParams(**kw, theta=1.5)
    with pytest.raises(ValueError):
        SolverParams(**kw, nu=1.0)
    with pytest.raises(ValueError):
        SolverParams(**kw, tau2=0.2)  # >= (1 - rho)/2
    with pytest.raises(ValueError):
        SolverParams(**dict(kw, omega=0.5))  # >= 2/gamma2_eps


def test_inexact_constants_positive():
    p = SolverParams(eps_target=1e-7, gamma1_eps=0.09, gamma2_eps=5.6,
                     omega=0.35, rho=0.968)
    b, c = inexact_constants(p)
    assert b > 0 and c > 0


def test_materialize_dense_guard():
    op, _, _ = small_problem()
    op.shape = (100, 100)
    with pytest.raises(ValueError):
        materialize_dense(op)


def test_preconditioned_spectrum_within_coercivity_bounds():
    op, _, params = small_problem()
    a = materialize_dense(op)
    eigs = np.linalg.eigvalsh(0.5 * (a + a.T))
    assert eigs.min() >= params.gamma1_eps * (1 - 1e-12)
    assert eigs.max() <= params.gamma2_eps * (1 + 1e-12)


def test_plain_richardson_matches_dense_solve():
    op, f, params = small_problem()
    w, trace = richardson_plain(op, f, params)
    assert trace.converged
    w_star = dense_solution(op, f)
    err = np.linalg.norm(w.todense() - w_star)
    # residual tolerance gamma1_eps * eps guarantees error <= eps
    assert err <= params.eps_target


def test_st_solve_matches_dense_solve():
    op, f, params = small_problem()
    w, trace = st_solve(op, f, params)
    assert trace.converged
    assert trace.final_residual <= params.gamma1_eps * params.eps_target
    w_star = dense_solution(op, f)
    assert np.linalg.norm(w.todense() - w_star) <= params.eps_target


def test_st_solve_inexact_matches_dense_solve():
    op, f, params = small_problem()
    w, trace = st_solve_inexact(op, f, params)
    assert trace.converged
    w_star = dense_solution(op, f)
    assert np.linalg.norm(w.todense() - w_star) <= params.eps_target
    assert trace.max_intermediate_rank <= min(op.shape)


def test_residual_decreases_under_plain_iteration():
    op, f, params = small_problem()
    _, trace = richardson_plain(op, f, params)
    res = [it["res_norm"] for it in trace.iterations]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(res, res[1:]))


def test_max_iter_reports_non_convergence():
    op, f, params = small_problem()
    params.max_iter = 3
    _, trace = st_solve(op, f, params)
    assert not trace.converged
    assert trace.n_iter == 3


def fixed_point_iteration(op, f, params, delta, w0=None, n_max=200_000):
    """Fixed point of w -> S_delta(w - omega (A w - F)) by direct iteration."""
    w = w0 if w0 is not None else zeros(f.rows, f.cols)
    for _ in range(n_max):
        r = residual_exact(op, w, f)
        w_next = soft_threshold(
            rounded_sum([w, r.scaled(-params.omega)], 0.0), delta)
        if diff_norm(w_next, w) <= 1e-14 * max(frobenius_norm(w_next), 1.0):
            return w_next
        w = w_next
    raise AssertionError("fixed-point iteration did not settle")


@pytest.mark.parametrize("delta", [1e-2, 1e-3])
def test_fixed_point_distance_sandwich(delta):
    op, f, params = small_problem()
    w_star = from_dense(dense_solution(op, f))
    w_delta = fixed_point_iteration(op, f, params, delta)
    gap = frobenius_norm(rounded_sum(
        [soft_threshold(w_star, delta), w_star.scaled(-1.0)], 0.0))
    dist = diff_norm(w_delta, w_star)
    rho = params.rho
    assert gap / (1.0 + rho) <= dist * (1 + 1e-9)
    assert dist <= gap / (1.0 - rho) * (1 + 1e-9)
