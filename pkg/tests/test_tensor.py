from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from heiscr.heisenberg import standard_structure
from heiscr.jets import Jet2
from heiscr.poly import Frac, Poly, coordinate_polys
from heiscr.tensor import (
    MetricField,
    OneForm,
    PolyVectorField,
    curvature,
    killing_residual,
    poly_bracket,
    sectional,
)

X, Y, Z = sp.symbols("x y z")
SYMS = (X, Y, Z)


def sympy_curvature(g: sp.Matrix, coords):
    """Textbook Christoffel/Ricci/scalar; used as an independent oracle."""
    m = len(coords)
    ginv = sp.simplify(g.inv())
    gam = [[[sum(ginv[k, l] * (sp.diff(g[l, j], coords[i]) + sp.diff(g[l, i], coords[j]) - sp.diff(g[i, j], coords[l])) for l in range(m)) / 2 for j in range(m)] for i in range(m)] for k in range(m)]
    ric = sp.zeros(m, m)
    for i in range(m):
        for j in range(m):
            ric[i, j] = sum(
                sp.diff(gam[k][i][j], coords[k]) - sp.diff(gam[k][i][k], coords[j])
                + sum(gam[k][k][l] * gam[l][i][j] - gam[k][j][l] * gam[l][i][k] for l in range(m))
                for k in range(m)
            )
    scal = sum(ginv[i, j] * ric[i, j] for i in range(m) for j in range(m))
    return gam, ric, scal


def right_metric_sympy():
    eta = sp.Matrix([-Y, 0, 1])  # dz - y dx
    return sp.diag(1, 1, 0) + 4 * eta * eta.T


@pytest.fixture(scope="module")
def right_oracle():
    g = right_metric_sympy()
    gam, ric, scal = sympy_curvature(g, SYMS)
    return g, gam, ric, sp.simplify(scal)


def test_right_metric_entries_match_sympy():
    S = standard_structure("right", 1)
    g = right_metric_sympy()
    for p in [(0, 0, 0), (0.3, -1.2, 0.7), (2, 1, -1)]:
        np.testing.assert_allclose(S.g(p), np.array(g.subs(dict(zip(SYMS, p))), dtype=float), atol=1e-14)


@pytest.mark.parametrize("p", [(0.0, 0.0, 0.0), (0.4, -0.9, 1.3), (-1.5, 0.25, -0.6)])
def test_curvature_matches_sympy(right_oracle, p):
    g, gam, ric, scal = right_oracle
    sub = dict(zip(SYMS, p))
    rep = curvature(standard_structure("right", 1).g, p)
    assert abs(rep.scalar - float(scal.subs(sub))) < 1e-10
    np.testing.assert_allclose(rep.ricci, np.array(ric.subs(sub), dtype=float), atol=1e-10)
    G = np.array([[[float(gam[k][i][j].subs(sub)) for j in range(3)] for i in range(3)] for k in range(3)])
    np.testing.assert_allclose(rep.christoffel, G, atol=1e-12)


def test_right_scalar_symbolic_is_minus_two(right_oracle):
    assert right_oracle[3] == -2


def _fd_christoffel(g: MetricField, p, h=1e-5):
    p = np.asarray(p, dtype=float)
    N = len(p)
    dg = np.empty((N, N, N))
    for k in range(N):
        e = np.zeros(N)
        e[k] = h
        dg[k] = (g(p + e) - g(p - e)) / (2 * h)
    ginv = np.linalg.inv(g(p))
    G1 = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    return np.einsum("kl,lij->kij", ginv, G1)


@pytest.mark.parametrize("model", ["right", "left", "intermediate"])
@pytest.mark.parametrize("n", [1, 2])
def test_christoffel_against_finite_differences(model, n):
    g = standard_structure(model, n).g
    rng = np.random.default_rng(7)
    for p in rng.uniform(-1, 1, size=(3, 2 * n + 1)):
        assert np.max(np.abs(curvature(g, p).christoffel - _fd_christoffel(g, p))) < 1e-6


def _conformal(f_coeffs):
    a, b, c = f_coeffs

    def fn(xs):
        x, y, z = xs
        f = x * a - y * z * b + z * z * c
        w = (f * 2.0).exp()
        zero = x * 0.0
        return [[w, zero, zero], [zero, w, zero], [zero, zero, w]]

    return MetricField.from_function(fn, 3)


@pytest.mark.parametrize("coeffs", [(0.3, 0.2, 0.1), (-0.5, 0.7, 0.0)])
def test_conformally_flat_scalar_closed_form(coeffs):
    # s = -e^{-2f} (2(m-1) lap f + (m-2)(m-1) |grad f|^2) with m = 3
    a, b, c = coeffs
    g = _conformal(coeffs)
    for p in [(0.1, 0.2, -0.3), (1.0, -0.5, 0.4)]:
        x, y, z = p
        f = a * x - b * y * z + c * z * z
        grad = np.array([a, -b * z, -b * y + 2 * c * z])
        lap = 2 * c
        expected = -np.exp(-2 * f) * (4 * lap + 2 * grad @ grad)
        assert abs(curvature(g, p).scalar - expected) < 1e-10


def test_flat_metric_has_zero_curvature():
    rep = curvature(MetricField.euclidean(5), np.zeros(5))
    assert np.max(np.abs(rep.riemann)) == 0.0


def test_round_sphere_sectional_is_one():
    # stereographic chart: g = 4 / (1 + |x|^2)^2 delta
    def fn(xs):
        r2 = xs[0] * xs[0] + xs[1] * xs[1]
        w = (r2 + 1.0).reciprocal() ** 2 * 4.0
        zero = xs[0] * 0.0
        return [[w, zero], [zero, w]]

    g = MetricField.from_function(fn, 2)
    for p in [(0.0, 0.0), (0.7, -0.3)]:
        assert abs(sectional(g, p, [1, 0], [0, 1]) - 1.0) < 1e-12
        assert abs(curvature(g, p).scalar - 2.0) < 1e-12


def test_sectional_rejects_degenerate_plane():
    g = standard_structure("right", 1).g
    with pytest.raises(ValueError):
        sectional(g, [0, 0, 0], [1, 0, 0], [2, 0, 0])


def test_metric_rejects_indefinite():
    x, y, z = coordinate_polys(3)
    g = MetricField.from_fracs([[1, 0, 0], [0, 1, 0], [0, 0, Poly.const(1, 3) - x]])
    g([0.5, 0, 0])
    with pytest.raises(ValueError):
        g([2.0, 0, 0])


def test_reeb_is_killing():
    S = standard_structure("right", 2)
    xi = PolyVectorField.coordinate(4, 5)
    assert killing_residual(S.g, xi, [0.3, -0.2, 0.5, 1.0, -0.4]) < 1e-13


def test_exterior_derivative_convention():
    # d(x dy) has d[0][1] = d_x(x) = 1 (no factor 1/2)
    x, y, z = coordinate_polys(3)
    w = OneForm([Frac.lift(0, 3), Frac.lift(x, 3), Frac.lift(0, 3)])
    D = w.d_values([0.2, 0.1, 0.0])
    assert D[0][1] == 1 and D[1][0] == -1


# ---------------------------------------------------------------------------
# polynomial and jet layers

small = st.integers(-3, 3)
monomials = st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2))
polys = st.dictionaries(monomials, small, max_size=4)


def _to_poly(d):
    return Poly(3, {m: c for m, c in d.items()})


def _to_sympy(d):
    return sum((c * X**m[0] * Y**m[1] * Z**m[2] for m, c in d.items()), sp.Integer(0))


def _from_sympy(e):
    P = sp.Poly(sp.expand(e), X, Y, Z)
    return Poly(3, {m: Fraction(int(c.p), int(c.q)) for m, c in zip(P.monoms(), P.coeffs())})


@settings(max_examples=60, deadline=None)
@given(polys, polys)
def test_poly_arithmetic_matches_sympy(a, b):
    P, Q = _to_poly(a), _to_poly(b)
    A, B = _to_sympy(a), _to_sympy(b)
    assert P * Q == _from_sympy(A * B)
    assert P + Q == _from_sympy(A + B)
    assert P - Q == _from_sympy(A - B)
    assert P.diff(1) == _from_sympy(sp.diff(A, Y))


@settings(max_examples=40, deadline=None)
@given(polys, polys)
def test_vector_field_bracket_antisymmetric_and_matches_sympy(a, b):
    U = PolyVectorField([_to_poly(a), Poly.zero(3), Poly.var(0, 3)])
    V = PolyVectorField([Poly.zero(3), _to_poly(b), Poly.var(1, 3)])
    W = poly_bracket(U, V)
    assert (W + poly_bracket(V, U)).is_zero()
    Us = [_to_sympy(a), 0, X]
    Vs = [0, _to_sympy(b), Y]
    for k in range(3):
        ref = sum(Us[i] * sp.diff(Vs[k], SYMS[i]) - Vs[i] * sp.diff(Us[k], SYMS[i]) for i in range(3))
        assert W.components[k] == _from_sympy(ref)


def test_jet_second_derivatives():
    x, y = Jet2.variables([0.3, -0.7])
    f = (x * y).sin() + x.exp() * y
    fx = np.cos(0.3 * -0.7) * -0.7 + np.exp(0.3) * -0.7
    fxy = -np.sin(-0.21) * 0.3 * -0.7 + np.cos(-0.21) + np.exp(0.3)
    assert abs(f.grad[0] - fx) < 1e-14
    assert abs(f.hess[0, 1] - fxy) < 1e-14
