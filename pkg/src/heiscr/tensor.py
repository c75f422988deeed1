"""Exact vector-field algebra and jet-based Riemannian curvature.

Vector fields and 1-forms with polynomial (or ``Frac``) coefficients are handled
exactly.  Metrics are evaluated as second-order jets at a point and fed through
the Levi-Civita pipeline numerically.

Index conventions (all arrays dense, dimension ``N = 2n+1``):

* ``christoffel[k, i, j] = Gamma^k_{ij}``
* ``riemann[l, i, j, k] = R^l_{ijk}`` with ``R(d_j, d_k) d_i = R^l_{ijk} d_l``
* ``ricci[i, k] = R^j_{ijk}``
* exterior derivative without a 1/2: ``dw[i, j] = d_i w_j - d_j w_i``
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .jets import FracBatch, Jet2, PolyBatch
from .poly import Frac, Poly

DEFAULT_CURVATURE_RTOL = 1e-8


def dim_to_n(nvars: int) -> int:
    if nvars < 3 or nvars % 2 == 0:
        raise ValueError(f"expected an odd dimension 2n+1 >= 3, got {nvars}")
    return (nvars - 1) // 2


def check_point(p, nvars: int) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape != (nvars,):
        raise ValueError(f"point must have {nvars} coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite coordinates")
    return arr


class PolyVectorField:
    """Vector field ``sum_k X^k d_k`` with exact polynomial coefficients."""

    def __init__(self, components: Sequence[Poly]):
        comps = tuple(components)
        if not comps:
            raise ValueError("vector field needs at least one component")
        nv = comps[0].nvars
        if len(comps) != nv or any(c.nvars != nv for c in comps):
            raise ValueError("vector field components must match the number of variables")
        self.components = comps

    @classmethod
    def zero(cls, nvars: int) -> "PolyVectorField":
        return cls([Poly.zero(nvars)] * nvars)

    @classmethod
    def coordinate(cls, i: int, nvars: int) -> "PolyVectorField":
        comps = [Poly.zero(nvars)] * nvars
        comps[i] = Poly.const(1, nvars)
        return cls(comps)

    @classmethod
    def from_terms(cls, nvars: int, terms: dict) -> "PolyVectorField":
        """Build from ``{coordinate index: coefficient polynomial}``."""
        comps = [Poly.zero(nvars) for _ in range(nvars)]
        for k, c in terms.items():
            comps[k] = comps[k] + c
        return cls(comps)

    @property
    def nvars(self) -> int:
        return len(self.components)

    def _check(self, other: "PolyVectorField"):
        if not isinstance(other, PolyVectorField):
            raise TypeError("expected a PolyVectorField")
        if other.nvars != self.nvars:
            raise ValueError(f"dimension mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other):
        self._check(other)
        return PolyVectorField([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        self._check(other)
        return PolyVectorField([a - b for a, b in zip(self.components, other.components)])

    def __neg__(self):
        return PolyVectorField([-a for a in self.components])

    def __mul__(self, c):
        return PolyVectorField([a * c for a in self.components])

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def apply(self, f):
        """Directional derivative ``X(f)`` of a Poly or Frac."""
        total = None
        for k, c in enumerate(self.components):
            if c.is_zero():
                continue
            term = f.diff(k) * c if isinstance(f, Frac) else c * f.diff(k)
            total = term if total is None else total + term
        if total is None:
            return f * 0
        return total

    def bracket(self, other: "PolyVectorField") -> "PolyVectorField":
        return poly_bracket(self, other)

    @cached_property
    def _batch(self) -> PolyBatch:
        return PolyBatch(self.components)

    def values(self, p) -> np.ndarray:
        return self._batch.values(check_point(p, self.nvars))

    def jets(self, p) -> Jet2:
        return self._batch.jets(check_point(p, self.nvars))

    def __repr__(self):
        names = _coord_names(self.nvars)
        parts = [f"({c})*d{names[k]}" for k, c in enumerate(self.components) if not c.is_zero()]
        return " + ".join(parts) if parts else "0"


def _coord_names(nvars: int) -> list[str]:
    n = (nvars - 1) // 2
    return [f"x{i+1}" for i in range(n)] + [f"y{i+1}" for i in range(n)] + ["z"]


def poly_bracket(X: PolyVectorField, Y: PolyVectorField) -> PolyVectorField:
    """Exact Lie bracket ``[X,Y]^k = X(Y^k) - Y(X^k)``."""
    X._check(Y)
    return PolyVectorField([X.apply(yk) - Y.apply(xk) for xk, yk in zip(X.components, Y.components)])


class OneForm:
    """1-form ``sum_k w_k dx^k`` with Frac coefficients."""

    def __init__(self, components: Sequence):
        comps = list(components)
        nv = None
        for c in comps:
            if isinstance(c, (Poly, Frac)):
                nv = c.nvars
                break
        if nv is None or len(comps) != nv:
            raise ValueError("1-form needs one coefficient per coordinate")
        self.components = [Frac.lift(c, nv) for c in comps]

    @property
    def nvars(self) -> int:
        return len(self.components)

    @cached_property
    def _batch(self) -> FracBatch:
        return FracBatch(self.components)

    def values(self, p) -> np.ndarray:
        v = self._batch.values(check_point(p, self.nvars))
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite 1-form evaluation")
        return v

    def jets(self, p) -> Jet2:
        return self._batch.jets(check_point(p, self.nvars))

    def pair(self, X: PolyVectorField) -> Frac:
        total = Frac.lift(0, self.nvars)
        for w, xk in zip(self.components, X.components):
            if not xk.is_zero():
                total = total + w * xk
        return total

    def scaled(self, c) -> "OneForm":
        return OneForm([w * c for w in self.components])

    @cached_property
    def d(self) -> list[list[Frac]]:
        """Exact components ``dw[i][j] = d_i w_j - d_j w_i``."""
        N = self.nvars
        partial = [[self.components[j].diff(i) for j in range(N)] for i in range(N)]
        return [[partial[i][j] - partial[j][i] for j in range(N)] for i in range(N)]

    @cached_property
    def _d_batch(self) -> FracBatch:
        return FracBatch([c for row in self.d for c in row])

    def d_values(self, p) -> np.ndarray:
        N = self.nvars
        return self._d_batch.values(check_point(p, N)).reshape(N, N)

    def lie_derivative(self, X: PolyVectorField) -> "OneForm":
        """Exact ``L_X w`` via Cartan: ``(L_X w)_j = X^k d_k w_j + w_k d_j X^k``."""
        N = self.nvars
        out = []
        for j in range(N):
            term = X.apply(self.components[j])
            for k in range(N):
                dxk = X.components[k].diff(j)
                if not dxk.is_zero():
                    term = term + self.components[k] * dxk
            out.append(term)
        return OneForm(out)


def exterior_derivative(omega: OneForm, p) -> np.ndarray:
    """Antisymmetric component matrix of ``d omega`` at ``p`` (no 1/2 factor)."""
    m = omega.d_values(p)
    if not np.all(np.isfinite(m)):
        raise ValueError("non-finite exterior derivative")
    return m


def lie_derivative_form(X: PolyVectorField, omega: OneForm, p) -> np.ndarray:
    """Covector ``(L_X omega)(p)``."""
    if X.nvars != omega.nvars:
        raise ValueError("dimension mismatch")
    v = omega.lie_derivative(X).values(p)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite Lie derivative")
    return v


def field_jets(components: Sequence[Frac], p) -> Jet2:
    """Float jets of an arbitrary list of Frac fields at ``p``."""
    return FracBatch(components).jets(p)


def bracket_at(Xj: Jet2, Yj: Jet2) -> np.ndarray:
    """Numeric ``[X,Y](p)`` from first-order jets of the components."""
    return Yj.grad @ Xj.val - Xj.grad @ Yj.val


class MetricField:
    """Riemannian metric given by an evaluator returning a matrix-valued Jet2.

    ``jet_fn(p)`` must return a Jet2 whose ``val`` is ``(N, N)``, ``grad`` is
    ``(N, N, N)`` (last axis = derivative direction) and ``hess`` ``(N, N, N, N)``.
    """

    def __init__(self, jet_fn: Callable[[np.ndarray], Jet2], nvars: int, *, sym_tol: float = 1e-9):
        self._jet_fn = jet_fn
        self._value_fn: Callable[[np.ndarray], np.ndarray] | None = None
        self.nvars = nvars
        self.sym_tol = sym_tol

    @classmethod
    def from_fracs(cls, matrix: Sequence[Sequence]) -> "MetricField":
        N = len(matrix)
        nv = None
        for row in matrix:
            for c in row:
                if isinstance(c, (Poly, Frac)):
                    nv = c.nvars
        if nv != N:
            raise ValueError("metric matrix must be N x N with N variables")
        entries = [Frac.lift(c, N) for row in matrix for c in row]
        batch = FracBatch(entries)

        def fn(p):
            j = batch.jets(p)
            return Jet2(j.val.reshape(N, N), j.grad.reshape(N, N, N), j.hess.reshape(N, N, N, N))

        field = cls(fn, N)
        field._value_fn = lambda p: batch.values(p).reshape(N, N)
        field.entries = [[Frac.lift(c, N) for c in row] for row in matrix]
        return field

    @classmethod
    def from_function(cls, fn: Callable[[list], Sequence[Sequence]], nvars: int) -> "MetricField":
        """``fn`` maps a list of coordinate jets to a nested N x N list of jets or numbers."""

        def jet_fn(p):
            xs = Jet2.variables([float(v) for v in p])
            rows = fn(xs)
            flat = []
            for row in rows:
                for c in row:
                    flat.append(c if isinstance(c, Jet2) else xs[0] * 0 + c)
            j = Jet2.stack(flat)
            N = nvars
            return Jet2(j.val.reshape(N, N), j.grad.reshape(N, N, N), j.hess.reshape(N, N, N, N))

        return cls(jet_fn, nvars)

    @classmethod
    def euclidean(cls, nvars: int) -> "MetricField":
        eye = np.eye(nvars)

        def fn(p):
            return Jet2(eye.copy(), np.zeros((nvars,) * 3), np.zeros((nvars,) * 4))

        return cls(fn, nvars)

    def jets(self, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(g, dg, d2g)`` with ``dg[k,i,j] = d_k g_ij``."""
        p = check_point(p, self.nvars)
        j = self._jet_fn(p)
        g = np.asarray(j.val, dtype=float)
        dg = np.moveaxis(np.asarray(j.grad, dtype=float), -1, 0)
        d2g = np.moveaxis(np.moveaxis(np.asarray(j.hess, dtype=float), -1, 0), -1, 0)
        if not (np.all(np.isfinite(dg)) and np.all(np.isfinite(d2g))):
            raise ValueError("non-finite metric jets")
        self._check_values(g)
        return g, dg, d2g

    def _check_values(self, g: np.ndarray) -> None:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite metric values")
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - g.T)) > self.sym_tol * scale:
            raise ValueError("metric is not symmetric")
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise ValueError("metric is not positive definite at this point") from None

    def __call__(self, p) -> np.ndarray:
        if self._value_fn is None:
            return self.jets(p)[0]
        g = np.asarray(self._value_fn(check_point(p, self.nvars)), dtype=float)
        self._check_values(g)
        return g


@dataclass(frozen=True)
class CurvatureReport:
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    metric: np.ndarray
    bianchi_residual: float
    antisymmetry_residual: float


def christoffel_from_jets(g, dg, d2g=None):
    """Christoffel symbols and (optionally) their first derivatives."""
    ginv = np.linalg.inv(g)
    # first kind: G1[l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    G1 = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    gamma = np.einsum("kl,lij->kij", ginv, G1)
    if d2g is None:
        return gamma, None
    # dG1[m, l, i, j] = d_m of G1[l, i, j]
    dG1 = 0.5 * (
        np.einsum("mijl->mlij", d2g) + np.einsum("mjil->mlij", d2g) - np.einsum("mlij->mlij", d2g)
    )
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    dgamma = np.einsum("mkl,lij->mkij", dginv, G1) + np.einsum("kl,mlij->mkij", ginv, dG1)
    return gamma, dgamma


def curvature(g: MetricField, p, *, rtol: float = DEFAULT_CURVATURE_RTOL) -> CurvatureReport:
    """Levi-Civita curvature of ``g`` at ``p``."""
    G, dG, d2G = g.jets(p)
    if abs(np.linalg.det(G)) < 1e-300:
        raise ValueError("singular metric")
    gamma, dgamma = christoffel_from_jets(G, dG, d2G)
    # R^l_{ijk} = d_j Gamma^l_{ki} - d_k Gamma^l_{ji} + Gamma^l_{jm} Gamma^m_{ki} - Gamma^l_{km} Gamma^m_{ji}
    R = (
        np.einsum("jlki->lijk", dgamma)
        - np.einsum("klji->lijk", dgamma)
        + np.einsum("ljm,mki->lijk", gamma, gamma)
        - np.einsum("lkm,mji->lijk", gamma, gamma)
    )
    ricci = np.einsum("jijk->ik", R)
    scalar = float(np.einsum("ik,ik->", np.linalg.inv(G), ricci))
    scale = max(1.0, float(np.max(np.abs(R))))
    bianchi = R + np.einsum("ljki->lijk", R) + np.einsum("lkij->lijk", R)
    anti = R + np.einsum("likj->lijk", R)
    report = CurvatureReport(
        christoffel=gamma,
        riemann=R,
        ricci=0.5 * (ricci + ricci.T),
        scalar=scalar,
        metric=G,
        bianchi_residual=float(np.max(np.abs(bianchi))) / scale,
        antisymmetry_residual=float(np.max(np.abs(anti))) / scale,
    )
    if not np.isfinite(scalar):
        raise ValueError("non-finite curvature")
    if report.bianchi_residual > rtol:
        raise ArithmeticError(f"first Bianchi identity residual {report.bianchi_residual:.3e} exceeds {rtol:g}")
    return report


def sectional(g: MetricField, p, u, v, *, report: CurvatureReport | None = None, tol: float = 1e-12) -> float:
    """Sectional curvature ``g(R(u,v)v, u) / (|u|^2 |v|^2 - g(u,v)^2)``."""
    rep = report if report is not None else curvature(g, p)
    G = rep.metric
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    denom = (u @ G @ u) * (v @ G @ v) - (u @ G @ v) ** 2
    if denom <= tol * max(1.0, (u @ G @ u) * (v @ G @ v)):
        raise ValueError("degenerate plane: u and v are (nearly) linearly dependent")
    Ruvv = np.einsum("lijk,i,j,k->l", rep.riemann, v, u, v)
    return float(Ruvv @ G @ u / denom)


def killing_residual(g: MetricField, X: PolyVectorField, p) -> float:
    """Max-abs entry of ``(L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k``."""
    G, dG, _ = g.jets(p)
    xj = X.jets(p)
    Xv, dX = np.asarray(xj.val, dtype=float), np.asarray(xj.grad, dtype=float)  # dX[k, i] = d_i X^k
    L = np.einsum("k,kij->ij", Xv, dG) + dX.T @ G + G @ dX
    r = float(np.max(np.abs(L)))
    if not np.isfinite(r):
        raise ValueError("non-finite Killing residual")
    return r
