"""Infinitesimal CR automorphisms of the right CR structure.

The algebra is spanned by

* ``xi = dz``, ``R_i = dx_i``, ``S_i = dy_i + x_i dz`` (the Heisenberg ideal ``h``),
* ``X_ij = x_i dy_j + x_j dy_i - y_i dx_j - y_j dx_i + (x_i x_j - y_i y_j) dz`` for ``i <= j``,
* ``Y_ij = x_i dx_j - x_j dx_i + y_i dy_j - y_j dy_i`` for ``i < j``,
* ``D = 2z dz + sum(x_k dx_k + y_k dy_k)``.

Brackets are computed and re-expanded in this basis with exact rational
arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .heisenberg import SasakiStructure
from .poly import Frac, Poly, coordinate_polys
from .tensor import FracBatch, OneForm, PolyVectorField, check_point, poly_bracket

MAX_N = 4


@dataclass(frozen=True)
class CRBasisElement:
    tag: str
    index: tuple
    field: PolyVectorField

    @property
    def name(self) -> str:
        if not self.index:
            return self.tag
        return self.tag + "".join(str(i + 1) for i in self.index)


def _check_n(n: int):
    if not 1 <= n <= MAX_N:
        raise ValueError(f"n must be in 1..{MAX_N}, got {n}")


def basis(n: int) -> list[CRBasisElement]:
    """The ``n^2 + 2n + 2`` generating fields, Heisenberg ideal first."""
    _check_n(n)
    N = 2 * n + 1
    c = coordinate_polys(N)
    x, y, z = c[:n], c[n : 2 * n], c[2 * n]
    one = Poly.const(1, N)
    Z = 2 * n
    out = [CRBasisElement("Xi", (), PolyVectorField.coordinate(Z, N))]
    for i in range(n):
        out.append(CRBasisElement("R", (i,), PolyVectorField.coordinate(i, N)))
    for i in range(n):
        out.append(CRBasisElement("S", (i,), PolyVectorField.from_terms(N, {n + i: one, Z: x[i]})))
    for i in range(n):
        for j in range(i, n):
            terms: dict = {}
            for k, v in ((n + j, x[i]), (n + i, x[j]), (j, -y[i]), (i, -y[j]), (Z, x[i] * x[j] - y[i] * y[j])):
                terms[k] = terms.get(k, Poly.zero(N)) + v
            out.append(CRBasisElement("X", (i, j), PolyVectorField.from_terms(N, terms)))
    for i in range(n):
        for j in range(i + 1, n):
            terms = {j: x[i], i: -x[j], n + j: y[i], n + i: -y[j]}
            out.append(CRBasisElement("Y", (i, j), PolyVectorField.from_terms(N, terms)))
    dil = {Z: z * 2}
    for k in range(n):
        dil[k] = x[k]
        dil[n + k] = y[k]
    out.append(CRBasisElement("D", (), PolyVectorField.from_terms(N, dil)))
    return out


def heisenberg_dim(n: int) -> int:
    return 2 * n + 1


def hamiltonian_field(F: Poly) -> PolyVectorField:
    """Contact field with Hamiltonian ``F`` (so that ``eta0(X) = F``) for ``eta0 = dz - y.dx``."""
    N = F.nvars
    n = (N - 1) // 2
    c = coordinate_polys(N)
    y = c[n : 2 * n]
    Fz = F.diff(2 * n)
    comps = [Poly.zero(N) for _ in range(N)]
    zc = F
    for i in range(n):
        Fy = F.diff(n + i)
        zc = zc - y[i] * Fy
        comps[i] = -Fy
        comps[n + i] = y[i] * Fz + F.diff(i)
    comps[2 * n] = zc
    return PolyVectorField(comps)


# ---------------------------------------------------------------------------
# exact linear algebra over Q


def _field_vector(X: PolyVectorField) -> dict:
    return {(k, m): c for k, comp in enumerate(X.components) for m, c in comp.terms.items()}


class _Expander:
    """Exact expansion of a vector field in a fixed list of fields."""

    def __init__(self, fields: Sequence[PolyVectorField]):
        vecs = [_field_vector(f) for f in fields]
        self.keys = sorted({k for v in vecs for k in v})
        index = {k: i for i, k in enumerate(self.keys)}
        m = len(fields)
        # rows = keys, columns = fields, augmented later
        self.A = [[Fraction(0)] * m for _ in self.keys]
        for j, v in enumerate(vecs):
            for k, c in v.items():
                self.A[index[k]][j] = c
        self.index = index
        self.m = m
        self._reduce()

    def _reduce(self):
        # row-reduce once, remembering the row operations as a matrix acting on the right-hand side
        A = [row[:] for row in self.A]
        R = len(A)
        ops = [[Fraction(int(i == j)) for j in range(R)] for i in range(R)]
        pivots = []
        r = 0
        for col in range(self.m):
            piv = next((i for i in range(r, R) if A[i][col] != 0), None)
            if piv is None:
                raise ValueError("basis fields are linearly dependent")
            A[r], A[piv] = A[piv], A[r]
            ops[r], ops[piv] = ops[piv], ops[r]
            inv = 1 / A[r][col]
            A[r] = [v * inv for v in A[r]]
            ops[r] = [v * inv for v in ops[r]]
            for i in range(R):
                if i != r and A[i][col] != 0:
                    f = A[i][col]
                    A[i] = [a - f * b for a, b in zip(A[i], A[r])]
                    ops[i] = [a - f * b for a, b in zip(ops[i], ops[r])]
            pivots.append(r)
            r += 1
        self.ops = ops
        self.rank = r

    def expand(self, X: PolyVectorField):
        """Coefficients of ``X`` in the basis, or ``None`` if ``X`` is not in the span."""
        v = _field_vector(X)
        if any(k not in self.index for k in v):
            return None
        b = [Fraction(0)] * len(self.keys)
        for k, c in v.items():
            b[self.index[k]] = c
        red = [sum((o * bb for o, bb in zip(row, b) if o and bb), Fraction(0)) for row in self.ops]
        if any(red[i] != 0 for i in range(self.rank, len(red))):
            return None
        return red[: self.rank]


@dataclass(frozen=True)
class StructureConstants:
    """``[e_i, e_j] = sum_k c[(i, j)][k] e_k`` with exact rationals (zeros omitted)."""

    names: tuple
    table: dict

    def bracket(self, i: int, j: int) -> dict:
        return dict(self.table.get((i, j), {}))

    def antisymmetry_residual(self) -> int:
        bad = 0
        m = len(self.names)
        for i in range(m):
            for j in range(m):
                a, b = self.bracket(i, j), self.bracket(j, i)
                if any(a.get(k, 0) + b.get(k, 0) != 0 for k in set(a) | set(b)):
                    bad += 1
        return bad

    def _bracket_vec(self, u: dict, v: dict) -> dict:
        out: dict = {}
        for i, ci in u.items():
            for j, cj in v.items():
                for k, c in self.table.get((i, j), {}).items():
                    out[k] = out.get(k, 0) + ci * cj * c
        return {k: c for k, c in out.items() if c != 0}

    def jacobi_failures(self) -> list:
        m = len(self.names)
        fails = []
        for i in range(m):
            for j in range(i + 1, m):
                for k in range(j + 1, m):
                    e = lambda a: {a: Fraction(1)}
                    t1 = self._bracket_vec(self._bracket_vec(e(i), e(j)), e(k))
                    t2 = self._bracket_vec(self._bracket_vec(e(j), e(k)), e(i))
                    t3 = self._bracket_vec(self._bracket_vec(e(k), e(i)), e(j))
                    tot = {}
                    for t in (t1, t2, t3):
                        for a, c in t.items():
                            tot[a] = tot.get(a, 0) + c
                    if any(c != 0 for c in tot.values()):
                        fails.append((self.names[i], self.names[j], self.names[k]))
        return fails

    @property
    def dim(self) -> int:
        return len(self.names)


def bracket_table(n: int) -> StructureConstants:
    """All pairwise brackets of :func:`basis` re-expanded exactly in the basis."""
    B = basis(n)
    fields = [b.field for b in B]
    exp = _Expander(fields)
    table = {}
    for i, a in enumerate(fields):
        for j, b in enumerate(fields):
            if i == j:
                continue
            br = poly_bracket(a, b)
            if br.is_zero():
                continue
            coeffs = exp.expand(br)
            if coeffs is None:
                raise ArithmeticError(f"[{B[i].name}, {B[j].name}] does not close in the basis")
            table[(i, j)] = {k: c for k, c in enumerate(coeffs) if c != 0}
    return StructureConstants(tuple(b.name for b in B), table)


def expand_in_basis(X: PolyVectorField, n: int):
    """Exact coefficients of ``X`` in :func:`basis`, or ``None``."""
    return _Expander([b.field for b in basis(n)]).expand(X)


def linear_part(X: PolyVectorField) -> np.ndarray:
    """Matrix ``A`` of the ``(x, y)``-components of ``X`` (must be linear in ``x, y``, free of ``z``)."""
    N = X.nvars
    m = N - 1
    A = np.full((m, m), Fraction(0), dtype=object)
    for k in range(m):
        for mono, c in X.components[k].terms.items():
            deg = sum(mono)
            if deg == 0:
                continue
            if deg != 1 or mono[N - 1]:
                raise ValueError("field is not linear in the horizontal coordinates")
            A[k, mono.index(1)] = c
    return A


def quotient_image(X: PolyVectorField) -> np.ndarray:
    """Image in ``cr / h`` represented as ``-A`` (a Lie algebra homomorphism to gl(2n))."""
    return -linear_part(X)


def _commutator(A, B):
    return A.dot(B) - B.dot(A)


@dataclass
class IdealReport:
    ok: bool
    ideal: bool
    unitary: bool
    dilation_central: bool
    quotient_dim: int
    witnesses: dict
    failures: list


def verify_ideal(n: int) -> IdealReport:
    """Check that ``h`` is an ideal and ``cr / h`` is ``u(n) + R`` with ``D`` central."""
    B = basis(n)
    table = bracket_table(n)
    hdim = heisenberg_dim(n)
    failures = []
    for (i, j), coeffs in table.table.items():
        if i < hdim or j < hdim:
            if any(k >= hdim for k in coeffs):
                failures.append(f"[{B[i].name}, {B[j].name}] leaves h")
    ideal = not failures
    m = 2 * n
    J0 = np.full((m, m), Fraction(0), dtype=object)
    for i in range(n):
        J0[n + i, i] = Fraction(1)
        J0[i, n + i] = Fraction(-1)
    images = {b.name: quotient_image(b.field) for b in B}
    unitary = True
    for b in B[hdim:-1]:
        A = images[b.name]
        if np.any(A + A.T != 0) or np.any(_commutator(A, J0) != 0):
            unitary = False
            failures.append(f"{b.name} is not in u(n)")
    # the quotient map is a homomorphism on every pair
    for (i, j), coeffs in table.table.items():
        lhs = _commutator(images[B[i].name], images[B[j].name])
        rhs = np.full((m, m), Fraction(0), dtype=object)
        for k, c in coeffs.items():
            rhs = rhs + images[B[k].name] * c
        if np.any(lhs != rhs):
            failures.append(f"quotient map fails on [{B[i].name}, {B[j].name}]")
    Dbar = images["D"]
    central = all(np.all(_commutator(Dbar, A) == 0) for A in images.values())
    if not central:
        failures.append("D is not central in the quotient")
    flat = [images[b.name].flatten() for b in B[hdim:]]
    qdim = int(np.linalg.matrix_rank(np.array(flat, dtype=float)))
    if qdim != n * n + 1:
        failures.append(f"quotient dimension {qdim} != n^2 + 1")
    witnesses = {}
    names = list(table.names)
    for a, b in (("X11", "R1"), ("D", "Xi"), ("D", "X11"), ("R1", "S1"), ("D", "S1")):
        i, j = names.index(a), names.index(b)
        witnesses[f"[{a},{b}]"] = {names[k]: c for k, c in table.bracket(i, j).items()}
    return IdealReport(
        ok=not failures,
        ideal=ideal,
        unitary=unitary,
        dilation_central=central,
        quotient_dim=qdim,
        witnesses=witnesses,
        failures=failures,
    )


# ---------------------------------------------------------------------------
# CR condition and flows


def _frac_bracket(X: PolyVectorField, W: Sequence[Frac]) -> list[Frac]:
    """``[X, W]^k = X(W^k) - W(X^k)`` for a polynomial ``X`` and rational ``W``."""
    N = X.nvars
    zero = Frac.lift(0, N)
    out = []
    for k in range(N):
        t = zero
        for i in range(N):
            xi, wi = X.components[i], W[i]
            if not xi.is_zero():
                t = t + W[k].diff(i) * xi
            if not X.components[k].is_zero() and not wi.is_zero():
                t = t - wi * X.components[k].diff(i)
        out.append(t)
    return out


class CRCheck:
    """Infinitesimal CR residuals of ``X`` for ``S``, prepared once and evaluated at many points.

    ``contact = max |(L_X eta ^ eta)_ij|`` and
    ``J = max_V |proj_D [X, Phi V] - Phi proj_D [X, V]|`` over the horizontal frame.
    """

    def __init__(self, X: PolyVectorField, S: SasakiStructure):
        N = S.nvars
        self.S = S
        self.lie = S.eta.lie_derivative(X)
        zero = Frac.lift(0, N)
        comps = []
        for V in S.frame():
            Vf = [Frac.lift(c, N) for c in V.components]
            W = [sum((S.phi[k][i] * V.components[i] for i in range(N) if not V.components[i].is_zero()), zero) for k in range(N)]
            comps += _frac_bracket(X, Vf) + _frac_bracket(X, W)
        self.nframe = len(S.frame())
        try:
            self._batches = [FracBatch(comps)]
        except ValueError:
            self._batches = [FracBatch(comps[j : j + 2 * N]) for j in range(0, len(comps), 2 * N)]

    def __call__(self, p) -> tuple[float, float]:
        S = self.S
        N = S.nvars
        p = check_point(p, N)
        eta = S.eta_values(p)
        L = self.lie.values(p)
        contact = float(np.max(np.abs(np.outer(L, eta) - np.outer(eta, L))))
        xi = S.xi_values(p)
        phi = S.phi_values(p)
        vals = np.concatenate([b.values(p) for b in self._batches]).reshape(self.nframe, 2, N)
        worst = 0.0
        for XV, XW in vals:
            r = (XW - (eta @ XW) * xi) - phi @ (XV - (eta @ XV) * xi)
            worst = max(worst, float(np.max(np.abs(r))))
        return contact, worst


def cr_residual(X: PolyVectorField, S: SasakiStructure, p) -> tuple[float, float]:
    """``(contact, J)`` residuals of the infinitesimal CR conditions at ``p`` (see :class:`CRCheck`)."""
    return CRCheck(X, S)(p)


def flow(X: PolyVectorField, p0, t: float, *, rtol: float = 1e-12, atol: float = 1e-12) -> np.ndarray:
    """Numeric time-``t`` flow of ``X`` from ``p0`` (adaptive DOP853)."""
    p0 = check_point(p0, X.nvars)
    if t == 0:
        return p0.copy()
    batch = X._batch
    sol = solve_ivp(lambda _, y: batch.values(y), (0.0, float(t)), p0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"flow integration failed: {sol.message}")
    return sol.y[:, -1]


def flow_with_jacobian(X: PolyVectorField, p0, t: float, *, rtol: float = 1e-11, atol: float = 1e-12):
    """Flow endpoint and its derivative with respect to the initial point."""
    N = X.nvars
    p0 = check_point(p0, N)
    batch = X._batch

    def rhs(_, s):
        j = batch.jets(s[:N])
        J = s[N:].reshape(N, N)
        return np.concatenate([j.val, (j.grad @ J).ravel()])

    s0 = np.concatenate([p0, np.eye(N).ravel()])
    sol = solve_ivp(rhs, (0.0, float(t)), s0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"flow integration failed: {sol.message}")
    s = sol.y[:, -1]
    return s[:N], s[N:].reshape(N, N)


def x12_flow_closed(p0, t: float) -> np.ndarray:
    """Closed-form flow of ``X_12`` (any ``n >= 2``; other blocks are fixed)."""
    p = np.array(p0, dtype=float)
    N = len(p)
    n = (N - 1) // 2
    if n < 2:
        raise ValueError("X_12 needs n >= 2")
    A, C = p[0], p[1]
    Dv, B = p[n], p[n + 1]
    c, s = np.cos(t), np.sin(t)
    out = p.copy()
    out[0] = A * c - B * s
    out[n + 1] = A * s + B * c
    out[1] = C * c - Dv * s
    out[n] = C * s + Dv * c
    out[2 * n] = p[2 * n] + (A * C - B * Dv) * np.sin(2 * t) / 2 + (A * Dv + B * C) * (np.cos(2 * t) - 1) / 2
    return out


def field_by_name(n: int, name: str) -> PolyVectorField:
    for b in basis(n):
        if b.name == name:
            return b.field
    raise KeyError(name)
