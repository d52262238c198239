"""Study harness: size pairing, back transformation, error measures, rates."""

import numpy as np
import pytest

from slabrank.assembly import assemble
from slabrank.cases import manufactured_case
from slabrank.expsum import precond_apply, preconditioner_for_system
from slabrank.lowrank import LowRankMatrix, from_dense, zeros
from slabrank.study import (back_transform, error_norms, make_spec, pn_order,
                            reported_rank, run_convergence_study, solve_case)


def test_pn_order_pairing():
    # smallest odd integer above J^(2/3)
    assert [pn_order(j) for j in (128, 256, 512, 1024, 2048, 4096)] \
        == [27, 41, 65, 103, 163, 257]


def test_make_spec_schemes():
    case = manufactured_case("TC1")
    sn = make_spec(case, "SN", 64)
    assert (sn.J, sn.N) == (64, 64)
    pn = make_spec(case, "PN", 128)
    assert (pn.J, pn.N) == (128, 27)
    assert pn.n_angular == 14


def test_reported_rank_cutoff():
    w = LowRankMatrix(np.eye(5), np.eye(5),
                      np.array([1.0, 1e-2, 1e-10, 1e-15, 1e-16]))
    assert reported_rank(w) == 3
    assert reported_rank(zeros(4, 4)) == 0


def test_back_transform_dense_oracle():
    case = manufactured_case("TC1")
    spec = make_spec(case, "SN", 6)
    system = assemble(spec)
    precond = preconditioner_for_system(system, 0.1)
    rng = np.random.default_rng(11)
    w_hat = from_dense(rng.standard_normal((7, 6)))
    u = back_transform(system, precond, w_hat)
    t = np.diag(system.spatial.T_diag) + np.diag(system.spatial.T_sub, -1)
    want = precond_apply(precond, w_hat, 0.0).todense()
    np.testing.assert_allclose(t.T @ u.todense(), want, atol=1e-12)


def test_error_norms_of_zero_equal_solution_norms():
    case = manufactured_case("TC1")
    spec = make_spec(case, "SN", 16)
    err_l2, err_w2g = error_norms(case, spec, zeros(17, 16))
    # independent tensor quadrature of ||u|| and ||mu u_z||
    z, wz = np.polynomial.legendre.leggauss(200)
    z = 0.5 * (z + 1)
    wz *= 0.5
    mu, wmu = np.polynomial.legendre.leggauss(200)
    mu = 0.5 * (mu + 1)
    wmu *= 0.5
    uu = case.u(z[:, None], mu[None, :])
    uz = case.u_z(z[:, None], mu[None, :])
    l2 = np.sqrt(wz @ uu ** 2 @ wmu)
    graph = np.sqrt(wz @ uu ** 2 @ wmu + wz @ uz ** 2 @ (wmu * mu ** 2))
    assert err_l2 == pytest.approx(l2, rel=1e-10)
    assert err_w2g == pytest.approx(graph, rel=1e-10)


def test_error_norms_require_exact_solution():
    case = manufactured_case("TC3")
    spec = make_spec(case, "SN", 8)
    with pytest.raises(ValueError):
        error_norms(case, spec, zeros(9, 8))


def test_study_rates_near_first_order():
    case = manufactured_case("TC1")
    rows = run_convergence_study(case, "SN", [16, 32], eps_target=1e-6)
    assert rows[0].rate_l2 is None
    assert rows[1].rate_l2 == pytest.approx(
        np.log2(rows[0].err_l2 / rows[1].err_l2))
    assert 0.8 <= rows[1].rate_l2 <= 1.2
    assert all(r.converged for r in rows)


def test_study_parallel_rows_match_serial():
    case = manufactured_case("TC1")
    serial = run_convergence_study(case, "SN", [8, 16], eps_target=1e-5)
    parallel = run_convergence_study(case, "SN", [8, 16], eps_target=1e-5,
                                     jobs=2)
    for a, b in zip(serial, parallel):
        assert (a.J, a.N, a.n_it, a.rank_w, a.rank_u) \
            == (b.J, b.N, b.n_it, b.rank_w, b.rank_u)
        assert a.err_l2 == b.err_l2 and a.err_w2g == b.err_w2g


def test_study_input_validation():
    case = manufactured_case("TC1")
    with pytest.raises(ValueError):
        run_convergence_study(case, "SN", [16, 8])
    with pytest.raises(ValueError):
        run_convergence_study(case, "SN", [8], tolerance_rule="bogus")
    with pytest.raises(ValueError):
        solve_case(case, make_spec(case, "SN", 8), 1e-5, algorithm="bogus")


def test_study_records_row_failures():
    case = manufactured_case("TC1")
    rows = run_convergence_study(case, "SN", [8], eps_target=1e-6,
                                 max_iter=2)
    assert not rows[0].converged


def test_inexact_study_reports_rank_columns():
    case = manufactured_case("TC1")
    rows = run_convergence_study(case, "SN", [8], eps_target=1e-5,
                                 algorithm="st_inexact")
    row = rows[0]
    assert row.r_inexact is not None and row.r_naive is not None
    assert row.r_inexact >= row.rank_w
    max_rank = max(it["rank"] for it in row.trace.iterations)
    assert row.r_naive == 4 * max_rank * _r_p(case, 8) ** 2


def _r_p(case, J):
    system = assemble(make_spec(case, "SN", J))
    return preconditioner_for_system(system, 0.1).r_p
