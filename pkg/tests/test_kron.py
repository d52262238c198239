"""Kronecker-structured operators against dense vec oracles."""

import numpy as np
import pytest

from slabrank.kron import (ComposedMap, DenseMap, DiagMap, IdentityMap,
                           KronOperator, KronTerm, compose_sandwich,
                           kron_apply, materialize)
from slabrank.lowrank import from_dense, zeros


def random_op(rng, nz, nmu, n_terms=3):
    terms = [KronTerm(float(rng.uniform(-2, 2)),
                      DenseMap(rng.standard_normal((nmu, nmu))),
                      DenseMap(rng.standard_normal((nz, nz))))
             for _ in range(n_terms)]
    return KronOperator(terms)


def test_kron_apply_matches_vec_oracle():
    rng = np.random.default_rng(0)
    nz, nmu = 5, 4
    op = random_op(rng, nz, nmu)
    u = rng.standard_normal((nz, nmu))
    # column-major convention: (A kron B) vec(U) = vec(B U A^T)
    dense = materialize(op)
    expected = dense @ u.flatten(order="F")
    got = kron_apply(op, from_dense(u)).todense().flatten(order="F")
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_kron_apply_zero_and_dimension_check():
    rng = np.random.default_rng(1)
    op = random_op(rng, 4, 3)
    assert kron_apply(op, zeros(4, 3)).rank == 0
    with pytest.raises(ValueError):
        kron_apply(op, zeros(3, 4))


def test_identity_and_diag_maps():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((4, 2))
    assert np.array_equal(IdentityMap(4).apply(x), x)
    d = rng.uniform(0.5, 2.0, 4)
    np.testing.assert_allclose(DiagMap(d).apply(x), d[:, None] * x)
    np.testing.assert_allclose(DiagMap(d).to_dense(), np.diag(d))


def test_composed_map_applies_right_to_left():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 4))
    b = rng.standard_normal((4, 4))
    x = rng.standard_normal((4, 3))
    comp = ComposedMap([DenseMap(a), DenseMap(b)])
    np.testing.assert_allclose(comp.apply(x), a @ (b @ x), atol=1e-13)


def test_compose_sandwich_matches_dense_product():
    rng = np.random.default_rng(4)
    nz, nmu = 4, 3
    p = random_op(rng, nz, nmu, n_terms=2)
    e = random_op(rng, nz, nmu, n_terms=2)
    sandwich = compose_sandwich(p, e)
    assert len(sandwich) == len(p) * len(e) * len(p)
    dp, de = materialize(p), materialize(e)
    u = rng.standard_normal((nz, nmu))
    expected = (dp @ de @ dp @ u.flatten(order="F")).reshape((nz, nmu),
                                                             order="F")
    got = kron_apply(sandwich, from_dense(u)).todense()
    np.testing.assert_allclose(got, expected, atol=1e-11)


def test_materialize_guard():
    big = KronOperator([KronTerm(1.0, IdentityMap(128), IdentityMap(128))])
    with pytest.raises(ValueError):
        materialize(big)


def test_operator_validation():
    with pytest.raises(ValueError):
        KronOperator([])
    with pytest.raises(ValueError):
        KronOperator([KronTerm(np.nan, IdentityMap(2), IdentityMap(2))])
    with pytest.raises(ValueError):
        KronOperator([KronTerm(1.0, IdentityMap(2), IdentityMap(2)),
                      KronTerm(1.0, IdentityMap(3), IdentityMap(2))])
