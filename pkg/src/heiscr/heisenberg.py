"""The Heisenberg group and its model Sasakian structures.

Coordinates are ``(x_1..x_n, y_1..y_n, z)`` with group law
``(x, y, z)(x', y', z') = (x + x', y + y', z + z' + x.y')``.

Normalization
-------------
A structure carries a contact form ``eta = t * eta0`` where ``eta0`` is the
model 1-form (``dz - y.dx`` for the right model) and ``t`` is the scale
(default ``t = 2``).  The Reeb field is ``xi0 / t`` and the metric is built by

    g = 1/2 * d(eta) o (Phi x 1) + eta x eta

with ``d`` taken without a 1/2 factor.  With ``t = 2`` the right model becomes
``g = sum(dx_i^2 + dy_i^2) + 4 (dz - y.dx)^2``; this is the normalization in
which ``Phi``-sectional curvature is ``-3`` and the scalar curvature is ``-2n``.
:func:`penalized_metric` gives the un-normalized family
``sum(dx_i^2 + dy_i^2) + L (dz - y.dx)^2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .jets import FracBatch, PolyBatch
from .poly import Frac, Poly, coordinate_polys
from .tensor import MetricField, OneForm, PolyVectorField, check_point, dim_to_n

MODELS = ("right", "left", "intermediate")
DEFAULT_SCALE = 2


# ---------------------------------------------------------------------------
# group operations


def _as_point(p) -> np.ndarray:
    if isinstance(p, np.ndarray) and p.dtype != object:
        arr = p.astype(float)
    elif all(isinstance(v, (int, Fraction, np.integer)) for v in p):
        arr = np.array([Fraction(int(v)) if isinstance(v, np.integer) else Fraction(v) for v in p], dtype=object)
    else:
        arr = np.array([float(v) for v in p], dtype=float)
    dim_to_n(len(arr))
    return arr


def _split(p: np.ndarray):
    n = (len(p) - 1) // 2
    return p[:n], p[n : 2 * n], p[2 * n]


def _join(x, y, z) -> np.ndarray:
    dtype = object if (x.dtype == object or y.dtype == object or isinstance(z, Fraction)) else float
    return np.concatenate([x, y, np.array([z], dtype=dtype)]).astype(dtype)


def identity(n: int) -> np.ndarray:
    return np.array([Fraction(0)] * (2 * n + 1), dtype=object)


def mul(p, q) -> np.ndarray:
    """Group product ``p . q``; exact for int/Fraction input."""
    p, q = _as_point(p), _as_point(q)
    if len(p) != len(q):
        raise ValueError(f"dimension mismatch: {len(p)} vs {len(q)}")
    x, y, z = _split(p)
    x2, y2, z2 = _split(q)
    return _join(x + x2, y + y2, z + z2 + np.dot(x, y2))


def inv(p) -> np.ndarray:
    p = _as_point(p)
    x, y, z = _split(p)
    return _join(-x, -y, -z + np.dot(x, y))


def dilation(lam, p) -> np.ndarray:
    """``(x, y, z) -> (lam x, lam y, lam^2 z)``."""
    if not lam > 0:
        raise ValueError(f"dilation factor must be positive, got {lam}")
    p = _as_point(p)
    x, y, z = _split(p)
    return _join(x * lam, y * lam, z * lam * lam)


def involution(p) -> np.ndarray:
    """``(x, y, z) -> (y, x, z)``."""
    p = _as_point(p)
    x, y, z = _split(p)
    return _join(y.copy(), x.copy(), z)


def matrix_rep(p) -> np.ndarray:
    """The ``(n+2) x (n+2)`` upper triangular matrix of ``p`` (test oracle)."""
    p = _as_point(p)
    x, y, z = _split(p)
    n = len(x)
    dtype = p.dtype
    one = Fraction(1) if dtype == object else 1.0
    zero = Fraction(0) if dtype == object else 0.0
    M = np.full((n + 2, n + 2), zero, dtype=dtype)
    for i in range(n + 2):
        M[i, i] = one
    M[0, 1 : n + 1] = x
    M[0, n + 1] = z
    M[1 : n + 1, n + 1] = y
    return M


def from_matrix(M) -> np.ndarray:
    n = M.shape[0] - 2
    return _join(np.array(M[0, 1 : n + 1]), np.array(M[1 : n + 1, n + 1]), M[0, n + 1])


# ---------------------------------------------------------------------------
# polynomial maps


def _coerce_const(v):
    return Fraction(v) if isinstance(v, (int, Fraction)) else Fraction(repr(float(v)))


def right_translation_map(h, n: int) -> list[Poly]:
    """Components of ``p -> p . h``."""
    N = 2 * n + 1
    c = coordinate_polys(N)
    h = [_coerce_const(v) for v in h]
    xs, ys, z = c[:n], c[n : 2 * n], c[2 * n]
    zc = z + h[2 * n]
    for i in range(n):
        zc = zc + xs[i] * h[n + i]
    return [xs[i] + h[i] for i in range(n)] + [ys[i] + h[n + i] for i in range(n)] + [zc]


def left_translation_map(h, n: int) -> list[Poly]:
    """Components of ``p -> h . p``."""
    N = 2 * n + 1
    c = coordinate_polys(N)
    h = [_coerce_const(v) for v in h]
    xs, ys, z = c[:n], c[n : 2 * n], c[2 * n]
    zc = z + h[2 * n]
    for i in range(n):
        zc = zc + ys[i] * h[i]
    return [xs[i] + h[i] for i in range(n)] + [ys[i] + h[n + i] for i in range(n)] + [zc]


def involution_map(n: int) -> list[Poly]:
    c = coordinate_polys(2 * n + 1)
    return c[n : 2 * n] + c[:n] + [c[2 * n]]


def dilation_map(lam, n: int) -> list[Poly]:
    lam = _coerce_const(lam)
    c = coordinate_polys(2 * n + 1)
    return [v * lam for v in c[: 2 * n]] + [c[2 * n] * (lam * lam)]


def map_jacobian(F: Sequence[Poly], p) -> tuple[np.ndarray, np.ndarray]:
    """``(F(p), dF_p)`` with ``dF[k, j] = d_j F^k``."""
    j = PolyBatch(list(F)).jets(np.asarray(p, dtype=float))
    return np.asarray(j.val), np.asarray(j.grad)


# ---------------------------------------------------------------------------
# structures


@dataclass(frozen=True, eq=False)
class SasakiStructure:
    """Evaluable ``(xi, eta, Phi, g)``; ``phi[k][i]`` is the k-th component of ``Phi(d_i)``."""

    n: int
    model: str
    xi: PolyVectorField
    eta: OneForm
    phi: tuple
    g: MetricField
    scale: Fraction = Fraction(DEFAULT_SCALE)
    a: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nvars(self) -> int:
        return 2 * self.n + 1

    def _phi_batch(self) -> FracBatch:
        if "phi" not in self._cache:
            self._cache["phi"] = FracBatch([c for row in self.phi for c in row])
        return self._cache["phi"]

    def phi_values(self, p) -> np.ndarray:
        N = self.nvars
        return self._phi_batch().values(check_point(p, N)).reshape(N, N)

    def eta_values(self, p) -> np.ndarray:
        return self.eta.values(p)

    def xi_values(self, p) -> np.ndarray:
        return self.xi.values(p)

    def d_eta(self, p) -> np.ndarray:
        return self.eta.d_values(p)

    def frame(self) -> list[PolyVectorField]:
        """Horizontal frame ``(V_1..V_n, U_1..U_n)`` spanning ``ker eta``."""
        return horizontal_frame("right" if self.model == "deformed" else self.model, self.n)

    def metric(self, p) -> np.ndarray:
        return self.g(p)


def _base_eta(model: str, n: int) -> list[Poly]:
    N = 2 * n + 1
    c = coordinate_polys(N)
    comps = [Poly.zero(N) for _ in range(N)]
    comps[2 * n] = Poly.const(1, N)
    for i in range(n):
        x, y = c[i], c[n + i]
        if model == "right":
            comps[i] = -y
        elif model == "left":
            comps[n + i] = -x
        elif model == "intermediate":
            comps[i] = y * 2
            comps[n + i] = x * -2
        else:
            raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return comps


def base_contact_form(model: str, n: int) -> OneForm:
    """Unscaled model 1-form (``dz - y.dx``, ``dz - x.dy`` or ``dz - 2 sum(x dy - y dx)``)."""
    return OneForm(_base_eta(model, n))


def horizontal_frame(model: str, n: int) -> list[PolyVectorField]:
    N = 2 * n + 1
    c = coordinate_polys(N)
    one = Poly.const(1, N)
    V, U = [], []
    for i in range(n):
        x, y = c[i], c[n + i]
        if model == "right":
            V.append(PolyVectorField.from_terms(N, {i: one, 2 * n: y}))
            U.append(PolyVectorField.from_terms(N, {n + i: one}))
        elif model == "left":
            V.append(PolyVectorField.from_terms(N, {n + i: one, 2 * n: x}))
            U.append(PolyVectorField.from_terms(N, {i: one}))
        elif model == "intermediate":
            V.append(PolyVectorField.from_terms(N, {i: one, 2 * n: y * -2}))
            U.append(PolyVectorField.from_terms(N, {n + i: one, 2 * n: x * 2}))
        else:
            raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return V + U


def _base_phi(model: str, n: int) -> list[list[Frac]]:
    N = 2 * n + 1
    c = coordinate_polys(N)
    P = [[Poly.zero(N) for _ in range(N)] for _ in range(N)]
    for i in range(n):
        xi_, yi_ = i, n + i
        x, y = c[i], c[n + i]
        if model == "right":
            # Phi(dy) = dx + y dz, Phi(dx) = -dy
            P[xi_][yi_] = Poly.const(1, N)
            P[2 * n][yi_] = y
            P[yi_][xi_] = Poly.const(-1, N)
        elif model == "left":
            # Phi(dx) = dy + x dz, Phi(dy) = -dx
            P[yi_][xi_] = Poly.const(1, N)
            P[2 * n][xi_] = x
            P[xi_][yi_] = Poly.const(-1, N)
        elif model == "intermediate":
            # Phi(X) = Y, Phi(Y) = -X with X = dx - 2y dz, Y = dy + 2x dz
            P[yi_][xi_] = Poly.const(1, N)
            P[2 * n][xi_] = x * 2
            P[xi_][yi_] = Poly.const(-1, N)
            P[2 * n][yi_] = y * 2
        else:
            raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return [[Frac(e) for e in row] for row in P]


def recipe_metric(phi: Sequence[Sequence[Frac]], eta: OneForm) -> list[list[Frac]]:
    """Exact entries of ``1/2 d(eta)(Phi ., .) + eta x eta``."""
    N = eta.nvars
    d = eta.d
    half = Fraction(1, 2)
    out = []
    for i in range(N):
        row = []
        for j in range(N):
            acc = eta.components[i] * eta.components[j]
            for k in range(N):
                if not phi[k][i].is_zero() and not d[k][j].is_zero():
                    acc = acc + phi[k][i] * d[k][j] * half
            row.append(acc)
        out.append(row)
    return out


def _explicit_metric(model: str, n: int, scale: Fraction) -> list[list[Frac]]:
    """Closed-form metric ``(t/2) sum(dx^2 + dy^2) + t^2 eta0 x eta0`` (right/left)."""
    N = 2 * n + 1
    eta0 = _base_eta(model, n)
    out = []
    for i in range(N):
        row = []
        for j in range(N):
            e = eta0[i] * eta0[j] * (scale * scale)
            if i == j and i < 2 * n:
                e = e + scale / 2
            row.append(Frac(e))
        out.append(row)
    return out


def standard_structure(model: str, n: int, scale=DEFAULT_SCALE) -> SasakiStructure:
    """Model structure ``right``, ``left`` or ``intermediate`` in dimension ``2n+1``."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    if not 1 <= n <= 4:
        raise ValueError(f"n must be in 1..4, got {n}")
    t = Fraction(scale)
    if t <= 0:
        raise ValueError("scale must be positive")
    N = 2 * n + 1
    eta = OneForm([c * t for c in _base_eta(model, n)])
    xi = PolyVectorField.coordinate(2 * n, N) * (1 / t)
    phi = _base_phi(model, n)
    if model == "intermediate":
        gm = recipe_metric(phi, eta)
    else:
        gm = _explicit_metric(model, n, t)
    return SasakiStructure(n, model, xi, eta, tuple(tuple(r) for r in phi), MetricField.from_fracs(gm), t)


def with_phi(S: SasakiStructure, phi) -> SasakiStructure:
    """Copy of ``S`` with a different endomorphism field (metric unchanged)."""
    return replace(S, phi=tuple(tuple(r) for r in phi), _cache={})


def negate_phi(S: SasakiStructure) -> SasakiStructure:
    return with_phi(S, [[-e for e in row] for row in S.phi])


def penalized_metric(n: int, L=1) -> MetricField:
    """``sum(dx_i^2 + dy_i^2) + L (dz - y.dx)^2`` for ``L > 0``."""
    if not L > 0:
        raise ValueError("penalty L must be positive")
    N = 2 * n + 1
    eta0 = _base_eta("right", n)
    Lc = _coerce_const(L)
    m = [[eta0[i] * eta0[j] * Lc + (1 if i == j and i < 2 * n else 0) for j in range(N)] for i in range(N)]
    return MetricField.from_fracs(m)


# ---------------------------------------------------------------------------
# checks


def _wedge(a: dict, b: dict) -> dict:
    out: dict = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            if set(ka) & set(kb):
                continue
            merged = ka + kb
            order = sorted(range(len(merged)), key=lambda i: merged[i])
            sign = _perm_sign(order)
            key = tuple(merged[i] for i in order)
            out[key] = out.get(key, 0.0) + sign * ca * cb
    return out


def _perm_sign(perm: Sequence[int]) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def contact_volume(eta: OneForm, n: int, p) -> float:
    """Coefficient of ``eta ^ (d eta)^n`` against ``dz ^ dx_1 ^ dy_1 ^ ... ^ dx_n ^ dy_n``."""
    N = 2 * n + 1
    if eta.nvars != N:
        raise ValueError("dimension mismatch")
    w = eta.values(p)
    d = eta.d_values(p)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(d))):
        raise ValueError("non-finite evaluation")
    one = {(i,): float(w[i]) for i in range(N) if w[i] != 0}
    two = {(i, j): float(d[i, j]) for i, j in itertools.combinations(range(N), 2) if d[i, j] != 0}
    form = one
    for _ in range(n):
        form = _wedge(form, two)
    top = form.get(tuple(range(N)), 0.0)
    target = [2 * n] + [v for i in range(n) for v in (i, n + i)]
    return float(_perm_sign(np.argsort(target)) * top)


@dataclass(frozen=True)
class StructureResiduals:
    reeb_normalization: float
    reeb_contraction: float
    phi_xi: float
    phi_square: float
    g_xi: float
    metric_recipe: float

    def max(self) -> float:
        return max(self.reeb_normalization, self.reeb_contraction, self.phi_xi, self.phi_square, self.g_xi, self.metric_recipe)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def structure_residuals(S: SasakiStructure, p) -> StructureResiduals:
    """Max-abs residuals of the contact metric identities at ``p``."""
    p = check_point(p, S.nvars)
    xi = S.xi_values(p)
    eta = S.eta_values(p)
    deta = S.d_eta(p)
    phi = S.phi_values(p)
    g = S.g(p)
    N = S.nvars
    recipe = 0.5 * phi.T @ deta + np.outer(eta, eta)
    return StructureResiduals(
        reeb_normalization=float(abs(eta @ xi - 1.0)),
        reeb_contraction=float(np.max(np.abs(xi @ deta))),
        phi_xi=float(np.max(np.abs(phi @ xi))),
        phi_square=float(np.max(np.abs(phi @ phi + np.eye(N) - np.outer(xi, eta)))),
        g_xi=float(np.max(np.abs(g @ xi - eta))),
        metric_recipe=float(np.max(np.abs(g - recipe))),
    )


def pullback_form(eta: OneForm, F: Sequence[Poly], p) -> np.ndarray:
    """``(F^* eta)(p)``."""
    Fp, J = map_jacobian(F, p)
    return eta.values(Fp) @ J


def pullback_structure(S: SasakiStructure, F: Sequence[Poly], p) -> dict:
    """Pulled-back ``(xi, eta, Phi, g)`` values at ``p`` under a polynomial diffeomorphism."""
    Fp, J = map_jacobian(F, p)
    Jinv = np.linalg.inv(J)
    return {
        "xi": Jinv @ S.xi_values(Fp),
        "eta": S.eta_values(Fp) @ J,
        "phi": Jinv @ S.phi_values(Fp) @ J,
        "g": J.T @ S.g(Fp) @ J,
    }


def structure_values(S: SasakiStructure, p) -> dict:
    return {"xi": S.xi_values(p), "eta": S.eta_values(p), "phi": S.phi_values(p), "g": S.g(p)}


def pullback_residual(S: SasakiStructure, T: SasakiStructure, F: Sequence[Poly], p) -> float:
    """Max-abs difference between ``F^* S`` and ``T`` at ``p``."""
    pulled = pullback_structure(S, F, p)
    target = structure_values(T, p)
    return max(float(np.max(np.abs(pulled[k] - target[k]))) for k in pulled)


def induced_horizontal_map(S: SasakiStructure, p, image, jac) -> tuple[np.ndarray, float]:
    """Matrix of ``dF_p|D`` in the horizontal frames at ``p`` and ``F(p)``.

    Returns the ``2n x 2n`` matrix and the leak ``max |eta(dF V)|`` out of ``D``.
    """
    frame = S.frame()
    src = np.array([V.values(p) for V in frame]).T
    dst = np.array([V.values(image) for V in frame]).T
    pushed = np.asarray(jac) @ src
    coeffs, *_ = np.linalg.lstsq(dst, pushed, rcond=None)
    leak = float(np.max(np.abs(S.eta_values(image) @ pushed)))
    return coeffs, leak


def jacobian_determinant(F: Sequence[Poly], p) -> float:
    return float(np.linalg.det(map_jacobian(F, p)[1]))
