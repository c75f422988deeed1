from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heiscr.cr_algebra import field_by_name, flow_with_jacobian
from heiscr.heisenberg import (
    base_contact_form,
    contact_volume,
    dilation,
    dilation_map,
    from_matrix,
    identity,
    induced_horizontal_map,
    inv,
    involution,
    involution_map,
    jacobian_determinant,
    left_translation_map,
    map_jacobian,
    matrix_rep,
    mul,
    negate_phi,
    penalized_metric,
    pullback_form,
    pullback_residual,
    right_translation_map,
    standard_structure,
    structure_residuals,
)
from heiscr.sasaki_cone import deform, sample_ball
from heiscr.tensor import killing_residual

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=7)


def points(n):
    return st.lists(rationals, min_size=2 * n + 1, max_size=2 * n + 1).map(lambda v: np.array(v, dtype=object))


def test_mul_example():
    assert list(mul([1, 2, 3], [4, 5, 6])) == [5, 7, 14]


def test_inv_example():
    assert list(inv([1, 2, 3])) == [-1, -2, -1]
    assert list(inv([0, 0, 0])) == [0, 0, 0]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(points(n), points(n), points(n))))
def test_group_axioms_exact(pqr):
    p, q, r = pqr
    n = (len(p) - 1) // 2
    assert list(mul(mul(p, q), r)) == list(mul(p, mul(q, r)))
    assert list(mul(p, identity(n))) == list(p)
    assert list(mul(p, inv(p))) == [0] * (2 * n + 1)
    assert list(inv(inv(p))) == list(p)
    # matrix oracle
    assert list(from_matrix(matrix_rep(p).dot(matrix_rep(q)))) == list(mul(p, q))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2).flatmap(lambda n: st.tuples(points(n), points(n))))
def test_dilation_is_automorphism(pq):
    p, q = pq
    lam = Fraction(3)
    assert list(dilation(lam, mul(p, q))) == list(mul(dilation(lam, p), dilation(lam, q)))


def test_dilation_examples():
    assert list(dilation(2, [1, 1, 1])) == [2, 2, 4]
    assert list(dilation(1, [1, 2, 3])) == [1, 2, 3]
    with pytest.raises(ValueError):
        dilation(0, [1, 2, 3])


def test_mul_dimension_mismatch():
    with pytest.raises(ValueError):
        mul([1, 2, 3], [1, 2, 3, 4, 5])


def test_involution():
    assert list(involution([1, 2, 3])) == [2, 1, 3]
    p = [Fraction(1, 3), 2, -1, 5, 7]
    assert list(involution(involution(p))) == p
    assert jacobian_determinant(involution_map(1), [0.1, 0.2, 0.3]) == pytest.approx(-1.0)
    assert jacobian_determinant(involution_map(2), [0.1] * 5) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2])
def test_involution_pulls_left_to_right(n):
    L, R = standard_structure("left", n), standard_structure("right", n)
    for p in sample_ball(n, 10, seed=1):
        assert pullback_residual(L, R, involution_map(n), p) < 1e-12
        np.testing.assert_allclose(pullback_form(L.eta, involution_map(n), p), R.eta_values(p), atol=1e-14)


def test_printed_right_metric_values():
    # dx^2 + dy^2 + (dz - y dx)^2
    g = penalized_metric(1, 1)
    np.testing.assert_array_equal(g([0, 0, 0]), np.eye(3))
    assert g([0, 1, 0])[0, 0] == 2.0


def test_scaled_right_metric_values():
    # the structure metric carries the contact scale t = 2
    S = standard_structure("right", 1)
    np.testing.assert_array_equal(S.g([0, 0, 0]), np.diag([1.0, 1.0, 4.0]))
    assert S.g([0, 1, 0])[0, 0] == 5.0
    np.testing.assert_array_equal(S.xi_values([1, 2, 3]), [0, 0, 0.5])
    np.testing.assert_array_equal(S.eta_values([1, 2, 3]), [-4, 0, 2])


def test_right_structure_by_hand():
    # eta = 2(dz - y dx); Phi(d_y) = d_x + y d_z, Phi(d_x) = -d_y
    S = standard_structure("right", 1)
    x, y, z = 0.3, -1.1, 0.8
    phi = np.array([[0, 1, 0], [-1, 0, 0], [0, y, 0]])
    np.testing.assert_allclose(S.phi_values([x, y, z]), phi, atol=1e-15)
    g = np.diag([1.0, 1.0, 0.0]) + 4 * np.outer([-y, 0, 1], [-y, 0, 1])
    np.testing.assert_allclose(S.g([x, y, z]), g, atol=1e-14)


@pytest.mark.parametrize("model", ["right", "left", "intermediate"])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_model_structures_satisfy_identities(model, n):
    S = standard_structure(model, n)
    for p in sample_ball(n, 12, seed=n):
        assert structure_residuals(S, p).max() < 1e-12
        assert killing_residual(S.g, S.xi, p) < 1e-12
        eta = S.eta_values(p)
        for V in S.frame():
            assert abs(eta @ V.values(p)) < 1e-14


def test_unknown_model():
    with pytest.raises(ValueError):
        standard_structure("diagonal", 1)


def test_negated_phi_breaks_recipe():
    S = negate_phi(standard_structure("right", 1))
    assert structure_residuals(S, [0.2, 0.4, -0.1]).metric_recipe > 0.5


@pytest.mark.parametrize("n,expected", [(1, 1.0), (2, 2.0), (3, 6.0)])
def test_contact_volume(n, expected):
    for p in sample_ball(n, 5, seed=3):
        assert abs(abs(contact_volume(base_contact_form("right", n), n, p)) - expected) < 1e-12


def test_deformed_contact_volume_nonzero():
    S = deform((0.7, 1.5))
    for p in sample_ball(2, 10, seed=4):
        assert abs(contact_volume(S.eta, 2, p)) > 1e-6


@pytest.mark.parametrize("n", [1, 2])
def test_translation_invariance(n):
    R, L = standard_structure("right", n), standard_structure("left", n)
    rng = np.random.default_rng(5)
    for p, h in zip(sample_ball(n, 8, seed=6), rng.uniform(-2, 2, size=(8, 2 * n + 1))):
        assert pullback_residual(R, R, right_translation_map(list(h), n), p) < 1e-12
        assert pullback_residual(L, L, left_translation_map(list(h), n), p) < 1e-12
    # the right structure is not left invariant
    assert pullback_residual(R, R, left_translation_map([0, 1] + [0] * (2 * n - 1), n), [0.3] * (2 * n + 1)) > 0.1


def test_translation_map_matches_mul():
    h = [Fraction(1, 2), -2, 3]
    F = right_translation_map(h, 1)
    G = left_translation_map(h, 1)
    p = [Fraction(3), Fraction(-1, 3), Fraction(2)]
    assert [f(p) for f in F] == list(mul(p, h))
    assert [f(p) for f in G] == list(mul(h, p))


def _orientation(S, p, image, jac):
    M, leak = induced_horizontal_map(S, p, image, jac)
    assert leak < 1e-9
    return np.linalg.det(M)


@pytest.mark.parametrize("n", [1, 2])
def test_orientation_preserved(n):
    S = standard_structure("right", n)
    rng = np.random.default_rng(11)
    for p in sample_ball(n, 4, seed=12):
        for F in (right_translation_map(list(rng.uniform(-1, 1, 2 * n + 1)), n), dilation_map(Fraction(3, 2), n)):
            image, jac = map_jacobian(F, p)
            assert _orientation(S, p, image, jac) > 0
        # U(n) rotations act through the flows of X_ii and Y_ij
        names = ["X11"] + (["Y12", "X12"] if n > 1 else [])
        for name in names:
            image, jac = flow_with_jacobian(field_by_name(n, name), p, 0.9)
            assert _orientation(S, p, image, jac) > 0
