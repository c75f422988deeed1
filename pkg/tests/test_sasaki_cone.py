from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from heiscr.heisenberg import standard_structure, structure_residuals
from heiscr.sasaki_cone import (
    ConeElement,
    ConeParams,
    calibrate_constants,
    deform,
    eta_einstein_residual,
    extremality_report,
    moment_map,
    perturbed_metric,
    phi_sectional,
    positivity,
    printed_coefficients,
    reduce,
    reeb_field,
    reeb_flow_closed,
    reeb_flow_numeric,
    sample_ball,
    scalar_closed_form,
    scalar_toric,
    toric_coefficients,
)
from heiscr.tensor import curvature, killing_residual

# ---------------------------------------------------------------------------
# cone elements


def test_positivity_examples():
    assert positivity(ConeElement(1.0, (1.0,)))
    assert not positivity(ConeElement(0.0, (0.0,)))
    v = positivity(ConeElement(1.0, (-0.1,)))
    assert not v and v.witness_radius == pytest.approx(math.sqrt(10))


def test_reduce_examples():
    assert reduce(ConeElement(2.0, (4.0, 2.0))).a == (1.0, 2.0)
    assert reduce(ConeElement(1.0, (0.0, 0.0))).a == (0.0, 0.0)
    assert reduce(ConeElement(1.0, (0.3, 0.1))).a == (0.1, 0.3)
    with pytest.raises(ValueError):
        reduce(ConeElement(1.0, (-1.0,)))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10), st.lists(st.floats(0, 5), min_size=1, max_size=4))
def test_reduce_idempotent_and_weyl_invariant(a0, b):
    r = reduce(ConeElement(a0, tuple(b)))
    assert reduce(ConeElement(1.0, r.a)) == r
    assert reduce(ConeElement(a0, tuple(reversed(b)))) == r


def test_cone_params_reject_negative():
    with pytest.raises(ValueError):
        ConeParams((0.5, -0.1))
    with pytest.raises(ValueError):
        deform((-1.0,))


# ---------------------------------------------------------------------------
# deformed structures


def test_zero_deformation_is_right_structure():
    S, R = deform((0.0, 0.0)), standard_structure("right", 2)
    for p in sample_ball(2, 5, seed=1):
        np.testing.assert_array_equal(S.g(p), R.g(p))
        np.testing.assert_array_equal(S.phi_values(p), R.phi_values(p))
        np.testing.assert_array_equal(S.eta_values(p), R.eta_values(p))


def test_reeb_normalization():
    S = deform((0.7,))
    for p in sample_ball(1, 100, seed=2):
        assert abs(S.eta_values(p) @ S.xi_values(p) - 1) < 1e-12
        assert np.max(np.abs(S.xi_values(p) @ S.d_eta(p))) < 1e-12


@pytest.mark.parametrize("a", [(0.7,), (1.0, 2.0), (0.25, 0.5, 2.0)])
def test_deformed_structures(a):
    S = deform(a)
    n = len(a)
    R = standard_structure("right", n)
    for p in sample_ball(n, 10, seed=3):
        assert structure_residuals(S, p).max() < 1e-9
        assert killing_residual(S.g, S.xi, p) < 1e-8
        # same contact distribution
        for V in R.frame():
            assert abs(S.eta_values(p) @ V.values(p)) < 1e-12


def _sympy_deformed_metric(a):
    x, y, z = sp.symbols("x y z")
    C = [x, y, z]
    Q = 1 + a * (x**2 + y**2)
    eta = sp.Matrix([-2 * y, 0, 2]) / Q
    xi = (sp.Matrix([0, 0, 1]) + a * sp.Matrix([-2 * y, 2 * x, x**2 - y**2])) / 2
    Phi = sp.Matrix([[0, 1, 0], [-1, 0, 0], [0, y, 0]])
    Phia = Phi - (Phi * xi) * eta.T
    deta = sp.Matrix(3, 3, lambda i, j: sp.diff(eta[j], C[i]) - sp.diff(eta[i], C[j]))
    g = Phia.T * deta / 2 + eta * eta.T
    return C, sp.simplify((g + g.T) / 2)


def _sympy_scalar(C, g, p):
    ginv = g.inv()
    m = len(C)
    G = [[[sum(ginv[k, l] * (sp.diff(g[l, j], C[i]) + sp.diff(g[l, i], C[j]) - sp.diff(g[i, j], C[l])) for l in range(m)) / 2 for j in range(m)] for i in range(m)] for k in range(m)]
    sub = dict(zip(C, p))
    s = 0
    for i in range(m):
        for j in range(m):
            ric = sum(
                sp.diff(G[k][i][j], C[k]) - sp.diff(G[k][i][k], C[j]) + sum(G[k][k][l] * G[l][i][j] - G[k][j][l] * G[l][i][k] for l in range(m))
                for k in range(m)
            )
            s += (ginv[i, j] * ric).subs(sub)
    return float(sp.N(s, 20))


@pytest.fixture(scope="module")
def sympy_g1():
    return _sympy_deformed_metric(sp.Integer(1))


def test_deformed_metric_against_sympy(sympy_g1):
    C, g = sympy_g1
    S = deform((1.0,))
    for p in [(0, 0, 0), (0.5, -0.3, 0.2), (1.2, 0.4, -1.0)]:
        np.testing.assert_allclose(np.array(g.subs(dict(zip(C, p))), dtype=float), S.g(p), atol=1e-13)


@pytest.mark.parametrize("p", [(0, 0, 0), (1, 0, 0), (sp.Rational(1, 2), sp.Rational(-1, 3), 2)])
def test_deformed_scalar_against_sympy(sympy_g1, p):
    C, g = sympy_g1
    ref = _sympy_scalar(C, g, p)
    pf = [float(v) for v in p]
    assert abs(curvature(deform((1.0,)).g, pf).scalar - ref) < 1e-9
    assert abs(scalar_toric((1.0,), pf) - ref) < 1e-9


# ---------------------------------------------------------------------------
# Reeb flows and moment map


def test_reeb_flow_examples():
    p0 = np.array([0.3, -0.4, 1.0])
    np.testing.assert_allclose(reeb_flow_closed((0.0,), p0, 2.5), p0 + [0, 0, 2.5], atol=1e-15)
    np.testing.assert_allclose(reeb_flow_closed((0.5,), [1, 0, 0], math.pi), [-1, 0, math.pi], atol=1e-12)
    np.testing.assert_allclose(reeb_flow_numeric((0.5,), [1.0, 0, 0], math.pi), [-1, 0, math.pi], atol=1e-9)


@pytest.mark.parametrize("a", [(0.0,), (0.5,), (1.0, 2.0)])
def test_reeb_flow_closed_matches_integrator(a):
    n = len(a)
    for p0 in sample_ball(n, 3, seed=4, radius=1.0, axis_points=0):
        for t in np.linspace(0, 10, 11):
            assert np.max(np.abs(reeb_flow_closed(a, p0, t) - reeb_flow_numeric(a, p0, t))) < 1e-6


def test_reeb_flow_block_period():
    a = (0.5, 2.0)
    p0 = np.array([1.0, 0.5, -0.3, 0.2, 0.0])
    for i, ai in enumerate(a):
        q = reeb_flow_closed(a, p0, math.pi / ai)
        assert abs(q[i] - p0[i]) < 1e-12 and abs(q[2 + i] - p0[2 + i]) < 1e-12


def test_reeb_field_matches_definition():
    n = 2
    X = reeb_field((0.5, 1.5))
    p = np.array([0.3, -0.2, 0.4, 0.1, 0.7])
    x, y = p[:n], p[n : 2 * n]
    a = np.array([0.5, 1.5])
    ref = np.concatenate([-2 * a * y, 2 * a * x, [1 + np.sum(a * (x**2 - y**2))]])
    np.testing.assert_allclose(X.values(p), ref, atol=1e-15)


def test_moment_map_examples():
    assert np.all(moment_map((1.0,), [0, 0, 3]) == 0)
    assert moment_map((1.0,), [1, 0, 0])[0] == pytest.approx(0.5)
    a = (0.5, 1.5)
    for p in sample_ball(2, 4, seed=5):
        h = moment_map(a, p)
        assert np.all(h >= 0)
        for t in np.linspace(0, 10, 6):
            assert np.max(np.abs(moment_map(a, reeb_flow_closed(a, p, t)) - h)) < 1e-9


# ---------------------------------------------------------------------------
# scalar curvature


@pytest.mark.parametrize("n", [1, 2, 3])
def test_closed_form_anchor(n):
    for p in sample_ball(n, 4, seed=6):
        assert scalar_closed_form((0.0,) * n, p) == -2 * n


def test_closed_form_conformal_example_at_origin():
    # value stated for the conformal-chart computation; see the decisions ledger
    assert abs(scalar_closed_form((1.0,), [0.0, 0.0, 0.0]) - 2.0) < 1e-6


@pytest.mark.parametrize("a", [(1.0,), (0.25,), (0.5, 2.0), (1.0, 1.0)])
def test_closed_form_matches_engine_on_held_out_points(a):
    n = len(a)
    g = deform(a).g
    for p in sample_ball(n, 10, seed=99, axis_points=0):
        assert abs(scalar_closed_form(a, p) - curvature(g, p).scalar) < 1e-6


@pytest.mark.parametrize("a", [(1.0,), (0.5, 2.0), (0.25, 0.5, 1.0)])
def test_calibration_recovers_toric_coefficients(a):
    cal = calibrate_constants(a, samples=max(24, 3 * len(a) + 6))
    assert cal.residual < 1e-8
    np.testing.assert_allclose(cal.coefficients, toric_coefficients(a), atol=1e-8)


def test_calibration_examples():
    cal = calibrate_constants((0.0,))
    assert cal.residual < 1e-9 and abs(cal.c0 + 2) < 1e-9
    assert calibrate_constants((1.0,)).residual < 1e-8
    S = deform((1.0,))
    bad = calibrate_constants((1.0,), metric=perturbed_metric(S, 0.5))
    assert bad.residual > 1e-3


def test_calibration_degenerate_design():
    with pytest.raises(ValueError):
        calibrate_constants((1.0,), points=np.zeros((5, 3)))
    with pytest.raises(ValueError):
        calibrate_constants((1.0,), samples=2)


def test_printed_constants_differ_except_at_zero():
    assert printed_coefficients((0.0,)) == (-2.0, 0.0)
    assert printed_coefficients((1.0,)) != toric_coefficients((1.0,))


def test_extremality_examples():
    r0 = extremality_report((0.0,))
    assert r0.affine_residual < 1e-9 and r0.scalar_variance < 1e-10
    r1 = extremality_report((1.0,))
    assert r1.affine_residual < 1e-8 and r1.scalar_variance > 0.1
    assert extremality_report((1.0, 1.0)).affine_residual < 1e-8


@pytest.mark.parametrize("a", [a for a in itertools.product([0.0, 0.5, 2.0], repeat=2)])
def test_variance_vanishes_only_at_zero(a):
    rep = extremality_report(a, samples=12)
    if any(a):
        assert rep.scalar_variance > 1e-3
    else:
        assert rep.scalar_variance < 1e-10


# ---------------------------------------------------------------------------
# phi-sectional curvature


@pytest.mark.parametrize("n", [1, 2])
def test_phi_sectional_standard(n):
    S = standard_structure("right", n)
    for p in sample_ball(n, 5, seed=7):
        rep = curvature(S.g, p)
        for i in range(n):
            assert abs(phi_sectional((0.0,) * n, p, i, structure=S) + 3) < 1e-8
        assert eta_einstein_residual(S, p, report=rep) < 1e-8


def test_phi_sectional_deformed_not_constant():
    a = (1.0,)
    assert abs(phi_sectional(a, [1, 0, 0], 0) - phi_sectional(a, [0, 0, 5], 0)) > 1e-3


def test_phi_sectional_index_range():
    with pytest.raises(ValueError):
        phi_sectional((1.0,), [0, 0, 0], 1)
