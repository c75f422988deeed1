"""Sasaki cone of the standard CR structure and the deformed structures.

Convention: the cone element with weights ``a_i >= 0`` has Reeb field

    xi_a = xi + sum_i a_i X_ii,    eta0(X_ii) = x_i^2 + y_i^2,

so ``eta0(xi_a) = Q := 1 + sum_i a_i (x_i^2 + y_i^2)`` and the contact form is
``eta_a = eta0 / Q``.  The structure is then scaled like the standard one (see
:mod:`heiscr.heisenberg`): ``eta = t eta_a``, Reeb field ``xi_a / t``,
``Phi_a = Phi - (Phi xi_a) x eta_a`` and the recipe metric.  Moment components
are ``h_i = eta_a(X_ii) = (x_i^2 + y_i^2) / Q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cr_algebra import basis, flow
from .heisenberg import (
    DEFAULT_SCALE,
    SasakiStructure,
    _base_eta,
    _base_phi,
    recipe_metric,
    standard_structure,
)
from .jets import Jet2
from .poly import Frac, Poly, coordinate_polys
from .tensor import MetricField, OneForm, PolyVectorField, curvature, sectional

DEFAULT_RADIUS = 2.0


def _frac(v) -> Fraction:
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    return Fraction(repr(float(v)))


@dataclass(frozen=True)
class ConeElement:
    """``a0 xi + sum b_i X_ii`` in the maximal Abelian subalgebra."""

    a0: float
    b: tuple

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(self.b))


@dataclass(frozen=True)
class ConeParams:
    a: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        if any(not math.isfinite(v) for v in a):
            raise ValueError("weights must be finite")
        if any(v < 0 for v in a):
            raise ValueError(f"deformation weights must be non-negative, got {a}")
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return len(self.a)

    def canonical(self) -> "ConeParams":
        return ConeParams(tuple(sorted(self.a)))


@dataclass(frozen=True)
class Positivity:
    positive: bool
    witness_radius: float | None
    witness_block: int | None

    def __bool__(self):
        return self.positive


def positivity_value(e: ConeElement, p) -> float:
    """``eta0(a0 xi + sum b_i X_ii)`` at ``p`` for the unscaled right form."""
    p = np.asarray(p, dtype=float)
    n = len(e.b)
    r2 = p[:n] ** 2 + p[n : 2 * n] ** 2
    return float(e.a0 + np.dot(e.b, r2))


def positivity(e: ConeElement, n: int | None = None) -> Positivity:
    """Whether ``eta0(a0 xi + sum b_i X_ii) > 0`` everywhere.

    On failure a witness radius ``r_i`` in block ``i`` is returned at which the
    pairing is ``<= 0`` (all other blocks at the origin).
    """
    if n is not None and len(e.b) != n:
        raise ValueError("cone element dimension mismatch")
    if e.a0 <= 0:
        return Positivity(False, 0.0, None)
    neg = [i for i, b in enumerate(e.b) if b < 0]
    if not neg:
        return Positivity(True, None, None)
    i = min(neg, key=lambda k: e.b[k])
    return Positivity(False, math.sqrt(e.a0 / -e.b[i]), i)


def reduce(e: ConeElement) -> ConeParams:
    """Normalize ``a0`` to 1 and order the weights."""
    if not positivity(e):
        raise ValueError(f"cone element {e} is not positive")
    return ConeParams(tuple(sorted(b / e.a0 for b in e.b)))


def _as_params(a, n: int | None = None) -> ConeParams:
    params = a if isinstance(a, ConeParams) else ConeParams(tuple(np.atleast_1d(a)))
    if n is not None and params.n != n:
        raise ValueError(f"expected {n} weights, got {params.n}")
    return params


def torus_fields(n: int) -> list[PolyVectorField]:
    """``X_11, ..., X_nn``."""
    out = []
    for b in basis(n):
        if b.tag == "X" and b.index[0] == b.index[1]:
            out.append(b.field)
    return out


def q_poly(a: Sequence, n: int) -> Poly:
    N = 2 * n + 1
    c = coordinate_polys(N)
    Q = Poly.const(1, N)
    for i, ai in enumerate(a):
        Q = Q + (c[i] * c[i] + c[n + i] * c[n + i]) * _frac(ai)
    return Q


def reeb_field(a, n: int | None = None) -> PolyVectorField:
    """Unscaled ``xi_a = xi + sum a_i X_ii``."""
    params = _as_params(a, n)
    n = params.n
    X = PolyVectorField.coordinate(2 * n, 2 * n + 1)
    for ai, Xii in zip(params.a, torus_fields(n)):
        if ai:
            X = X + Xii * _frac(ai)
    return X


def deform(a, n: int | None = None, scale=DEFAULT_SCALE) -> SasakiStructure:
    """Deformed structure ``S_{1,a}`` (right model at ``a = 0``)."""
    params = _as_params(a, n)
    n = params.n
    if all(v == 0 for v in params.a):
        base = standard_structure("right", n, scale)
        return SasakiStructure(n, "deformed", base.xi, base.eta, base.phi, base.g, base.scale, params.a)
    t = Fraction(scale)
    N = 2 * n + 1
    Q = q_poly(params.a, n)
    eta0 = _base_eta("right", n)
    eta_a = [Frac(c, Q, 1) for c in eta0]
    xi_a = reeb_field(params, n)
    phi0 = _base_phi("right", n)
    phi_xi = [sum((phi0[k][i] * xi_a.components[i] for i in range(N)), Frac.lift(0, N)) for k in range(N)]
    phi = [[phi0[k][i] - phi_xi[k] * eta_a[i] for i in range(N)] for k in range(N)]
    eta = OneForm([c * t for c in eta_a])
    g = MetricField.from_fracs(recipe_metric(phi, eta))
    return SasakiStructure(n, "deformed", xi_a * (1 / t), eta, tuple(tuple(r) for r in phi), g, t, params.a)


def moment_map(a, p) -> np.ndarray:
    """``h_i = (x_i^2 + y_i^2) / Q``."""
    params = _as_params(a)
    n = params.n
    p = np.asarray(p, dtype=float)
    if p.shape != (2 * n + 1,):
        raise ValueError("point dimension does not match the weights")
    r2 = p[:n] ** 2 + p[n : 2 * n] ** 2
    return r2 / (1.0 + np.dot(params.a, r2))


def reeb_flow_closed(a, p0, t: float) -> np.ndarray:
    """Closed-form flow of the unscaled ``xi_a``; blocks rotate at rate ``2 a_i``."""
    params = _as_params(a)
    n = params.n
    p0 = np.asarray(p0, dtype=float)
    x0, y0, z0 = p0[:n], p0[n : 2 * n], p0[2 * n]
    w = 2.0 * np.asarray(params.a)
    c, s = np.cos(w * t), np.sin(w * t)
    x = x0 * c - y0 * s
    y = x0 * s + y0 * c
    z = z0 + t + np.sum((x0**2 - y0**2) * np.sin(2 * w * t) / 4 - x0 * y0 * np.sin(w * t) ** 2)
    return np.concatenate([x, y, [z]])


def reeb_flow_numeric(a, p0, t: float, **kw) -> np.ndarray:
    return flow(reeb_field(a), p0, t, **kw)


def sample_ball(n: int, count: int, seed: int = 0, radius: float = DEFAULT_RADIUS, axis_points: int = 2) -> np.ndarray:
    """Seeded points in the ball ``|p| <= radius``; the first few lie on the z-axis."""
    if count < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    N = 2 * n + 1
    d = rng.normal(size=(count, N))
    d /= np.linalg.norm(d, axis=1)[:, None]
    r = radius * rng.uniform(size=count) ** (1.0 / N)
    pts = d * r[:, None]
    k = min(axis_points, count)
    pts[:k, : 2 * n] = 0.0
    return pts


@dataclass(frozen=True)
class Calibration:
    n: int
    a: tuple
    c0: float
    c: tuple
    residual: float
    points: np.ndarray = field(repr=False, compare=False)
    scalars: np.ndarray = field(repr=False, compare=False)

    @property
    def coefficients(self) -> tuple:
        return (self.c0,) + tuple(self.c)


def engine_scalars(g: MetricField, points) -> np.ndarray:
    return np.array([curvature(g, p).scalar for p in points])


def calibrate_constants(a, n: int | None = None, samples: int = 24, *, seed: int = 0, radius: float = DEFAULT_RADIUS, metric: MetricField | None = None, points=None) -> Calibration:
    """Least-squares fit ``s = c0 + sum c_i h_i`` of engine scalar curvature."""
    params = _as_params(a, n)
    n = params.n
    if points is None:
        if samples < n + 2:
            raise ValueError(f"need at least n + 2 = {n + 2} samples")
        points = sample_ball(n, samples, seed, radius)
    points = np.asarray(points, dtype=float)
    H = np.array([moment_map(params, p) for p in points])
    design = np.column_stack([np.ones(len(points)), H])
    if len(points) < n + 2 or np.linalg.matrix_rank(design) < n + 1:
        raise ValueError("degenerate sample design: moment values do not separate the coefficients")
    g = metric if metric is not None else deform(params).g
    s = engine_scalars(g, points)
    coef, *_ = np.linalg.lstsq(design, s, rcond=None)
    residual = float(np.max(np.abs(design @ coef - s)))
    return Calibration(n, params.a, float(coef[0]), tuple(float(c) for c in coef[1:]), residual, points, s)


def scalar_toric(a, p, n: int | None = None) -> float:
    """Scalar curvature from the toric data of the transverse Kaehler metric.

    With ``H_ij = g^T(K_i, K_j)`` written in the moment coordinates,
    ``H_ij = 4 [h_i delta_ij - (a_i + a_j) h_i h_j + h_i h_j sum_k a_k^2 h_k]``,
    the transverse scalar curvature is ``-sum_ij d_i d_j H_ij`` and ``s = s^T - 2n``.
    """
    params = _as_params(a, n)
    n = params.n
    h = moment_map(params, p)
    A = np.asarray(params.a)
    return float(8 * (n + 1) * A.sum() - 2 * n - 4 * (n + 1) * (n + 2) * np.dot(A**2, h))


def toric_coefficients(a, n: int | None = None) -> tuple:
    params = _as_params(a, n)
    n = params.n
    A = np.asarray(params.a)
    return (8 * (n + 1) * A.sum() - 2 * n,) + tuple(-4 * (n + 1) * (n + 2) * A**2)


def naive_conformal_coefficients(a, n: int | None = None) -> tuple:
    """Coefficients obtained by treating ``Q^{-1}(dx^2 + dy^2)`` in the ``(x, y)`` chart as the transverse metric.

    This chart is not adapted to the ``xi_a`` orbits when ``a != 0``; kept for reporting.
    """
    params = _as_params(a, n)
    n = params.n
    A = np.asarray(params.a)
    return (4 * (2 * n - 1) * A.sum() - 2 * n,) + tuple(-2 * (n + 1) * (2 * n - 1) * A**2)


def printed_scalar(a, p, n: int | None = None) -> float:
    """The printed formula ``-n(2n+7) sum a_j^2 r_j^2 / Q + 2n(4|a| - 1)`` (for comparison)."""
    params = _as_params(a, n)
    n = params.n
    h = moment_map(params, p)
    A = np.asarray(params.a)
    return float(-n * (2 * n + 7) * np.dot(A**2, h) + 2 * n * (4 * A.sum() - 1))


def printed_coefficients(a, n: int | None = None) -> tuple:
    params = _as_params(a, n)
    n = params.n
    A = np.asarray(params.a)
    return (2 * n * (4 * A.sum() - 1),) + tuple(-n * (2 * n + 7) * A**2)


def scalar_closed_form(a, p, n: int | None = None, calibration: Calibration | None = None, *, tol: float = 1e-8) -> float:
    """Calibrated affine closed form ``c0 + sum c_i h_i(p)``."""
    params = _as_params(a, n)
    cal = calibration if calibration is not None else _cached_calibration(params.a)
    if cal.a != params.a:
        raise ValueError("calibration was computed for different weights")
    if cal.residual > tol:
        raise ArithmeticError(f"calibration residual {cal.residual:.3e} exceeds {tol:g}; the affine form does not hold")
    if all(v == 0 for v in params.a):
        return float(-2 * params.n)
    return float(cal.c0 + np.dot(cal.c, moment_map(params, p)))


_CAL_CACHE: dict = {}


def _cached_calibration(a: tuple) -> Calibration:
    if a not in _CAL_CACHE:
        _CAL_CACHE[a] = calibrate_constants(a)
    return _CAL_CACHE[a]


@dataclass(frozen=True)
class ExtremalityReport:
    affine_residual: float
    scalar_variance: float
    calibration: Calibration


def extremality_report(a, n: int | None = None, samples: int = 24, *, seed: int = 0) -> ExtremalityReport:
    cal = calibrate_constants(a, n, samples, seed=seed)
    return ExtremalityReport(cal.residual, float(np.var(cal.scalars)), cal)


def phi_sectional(a, p, i: int, n: int | None = None, *, structure: SasakiStructure | None = None) -> float:
    """``K(u, Phi_a u)`` with ``u`` the i-th horizontal frame vector ``V_i`` at ``p``."""
    params = _as_params(a, n)
    S = structure if structure is not None else deform(params)
    if not 0 <= i < S.n:
        raise ValueError(f"direction index must be in 0..{S.n - 1}")
    p = np.asarray(p, dtype=float)
    u = S.frame()[i].values(p)
    return phi_sectional_direction(S, p, u)


def phi_sectional_direction(S: SasakiStructure, p, u, *, report=None) -> float:
    """``K(u, Phi u)`` for a horizontal vector ``u`` (projected into ``ker eta``)."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    u = u - (S.eta_values(p) @ u) * S.xi_values(p)
    return sectional(S.g, p, u, S.phi_values(p) @ u, report=report)


def eta_einstein_residual(S: SasakiStructure, p, *, report=None) -> float:
    """``max |Ric + 2 g - (2n + 2) eta x eta|``."""
    rep = report if report is not None else curvature(S.g, p)
    eta = S.eta_values(p)
    return float(np.max(np.abs(rep.ricci + 2 * rep.metric - (2 * S.n + 2) * np.outer(eta, eta))))


def perturbed_metric(S: SasakiStructure, eps: float) -> MetricField:
    """``g + eps dz^2`` (a non-Sasakian control)."""
    N = S.nvars
    base = S.g

    def fn(p):
        G, dG, d2G = base.jets(p)
        G = G.copy()
        G[N - 1, N - 1] += eps
        return Jet2(G, np.moveaxis(dG, 0, -1), np.moveaxis(np.moveaxis(d2G, 0, -1), 0, -1))

    return MetricField(fn, N)
